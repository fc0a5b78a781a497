"""Exact hitting-time analysis of finite increasing set-valued Markov chains.

States are integer bitmasks partially ordered by inclusion; every
transition strictly enlarges the state, so the reachable graph is a DAG
and all quantities follow from finite backward/forward recursions:

* ``h(S)``        mean remaining hitting time (backward induction)
* ``visit_prob``  probability the chain ever visits S (forward push)
* ``E T``         sum of expected occupation times
* ``var T``       occupation-measure sum of per-state quadratic variation

The variance identity and the per-state unit-drift identity double as
free exactness tests of the solver and are exposed on the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .graphs import CapacityError

STATE_CAP = 1 << 20
ABS_TOL = 1e-9  # exact identities, <= 2^20 double-precision additions


class UnreachableTargetError(RuntimeError):
    """Some reachable state cannot reach the target collection."""


class ChainValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    """An increasing chain: initial bitmask state, transition enumerator
    (strictly increasing, positive rates), and a target predicate."""

    initial: int
    transitions: Callable[[int], list[tuple[int, float]]]
    is_target: Callable[[int], bool]
    state_cap: int = STATE_CAP


@dataclass(frozen=True)
class DiscreteChainSpec:
    """Discrete-time analog: the enumerator returns probabilities of moving
    to strictly larger states; any probability mass left over is a
    self-loop (stay put)."""

    initial: int
    transitions: Callable[[int], list[tuple[int, float]]]
    is_target: Callable[[int], bool]
    state_cap: int = STATE_CAP


@dataclass
class ExactSolution:
    h: dict[int, float]
    visit_prob: dict[int, float]
    expected_time_in: dict[int, float]
    E_T: float
    var_T: float
    kappa: float
    a: dict[int, float]
    b: dict[int, float]
    transitions: dict[int, list[tuple[int, float]]] = field(repr=False)
    initial: int = 0
    targets: frozenset[int] = frozenset()

    def monotone_h(self, tol: float = 1e-12) -> bool:
        """h never increases along any enumerated transition."""
        for s, outs in self.transitions.items():
            hs = self.h[s]
            for s2, _ in outs:
                if self.h[s2] > hs + tol:
                    return False
        return True

    def max_identity_error(self) -> float:
        """Worst deviation of the unit-drift identity b(S) = 1 over
        reachable non-target states."""
        worst = 0.0
        for s in self.transitions:
            worst = max(worst, abs(self.b[s] - 1.0))
        return worst

    def to_json_dict(self) -> dict:
        states = sorted(self.h)
        return {
            "initial": self.initial,
            "E_T": self.E_T,
            "var_T": self.var_T,
            "kappa": self.kappa,
            "states": {
                str(s): {
                    "h": self.h[s],
                    "visit_prob": self.visit_prob.get(s, 0.0),
                    "time_in": self.expected_time_in.get(s, 0.0),
                }
                for s in states
            },
        }


def _enumerate_reachable(spec, kind: str):
    """BFS the reachable states; returns (ordered states, transitions map,
    target set).  Target states are not expanded."""
    seen = {spec.initial}
    stack = [spec.initial]
    transitions: dict[int, list[tuple[int, float]]] = {}
    targets: set[int] = set()
    while stack:
        s = stack.pop()
        if spec.is_target(s):
            targets.add(s)
            continue
        outs = spec.transitions(s)
        if not outs:
            raise UnreachableTargetError(
                f"state {s:#x} has no outgoing transitions and is not a target"
            )
        total = 0.0
        for s2, q in outs:
            if not (q > 0):
                raise ChainValidationError(f"nonpositive {kind} {q} on {s:#x} -> {s2:#x}")
            if (s & s2) != s or s2 == s:
                raise ChainValidationError(
                    f"transition {s:#x} -> {s2:#x} does not strictly increase the state"
                )
            total += q
            if s2 not in seen:
                seen.add(s2)
                stack.append(s2)
                if len(seen) > spec.state_cap:
                    raise CapacityError(f"reachable state count exceeds cap {spec.state_cap}")
        if kind == "probability" and total > 1.0 + 1e-12:
            raise ChainValidationError(f"probabilities out of {s:#x} sum to {total} > 1")
        transitions[s] = outs
    if not targets:
        raise UnreachableTargetError("no target state reachable from the initial state")
    return seen, transitions, targets


def _topo_order(states):
    # decreasing popcount, ties by bitmask value: successors come first
    return sorted(states, key=lambda s: (-s.bit_count(), s))


def solve_hitting(spec: ChainSpec) -> ExactSolution:
    """Exactly solve mean, variance, visit probabilities and occupation
    times of the hitting time of the target collection."""
    states, transitions, targets = _enumerate_reachable(spec, "rate")
    order = _topo_order(states)

    h = {s: 0.0 for s in targets}
    for s in order:
        if s in targets:
            continue
        outs = transitions[s]
        q_tot = sum(q for _, q in outs)
        h[s] = (1.0 + sum(q * h[s2] for s2, q in outs)) / q_tot

    visit_prob = {s: 0.0 for s in states}
    visit_prob[spec.initial] = 1.0
    for s in reversed(order):  # increasing popcount: predecessors first
        if s in targets or visit_prob[s] == 0.0:
            continue
        outs = transitions[s]
        q_tot = sum(q for _, q in outs)
        for s2, q in outs:
            visit_prob[s2] += visit_prob[s] * q / q_tot

    expected_time_in = {}
    a = {}
    b = {}
    E_T = 0.0
    var_T = 0.0
    kappa = 0.0
    for s, outs in transitions.items():
        q_tot = sum(q for _, q in outs)
        expected_time_in[s] = visit_prob[s] / q_tot
        a[s] = sum(q * (h[s] - h[s2]) ** 2 for s2, q in outs)
        b[s] = sum(q * (h[s] - h[s2]) for s2, q in outs)
        kappa = max(kappa, max(h[s] - h[s2] for s2, _ in outs))
        E_T += expected_time_in[s]
        var_T += expected_time_in[s] * a[s]

    return ExactSolution(
        h=h, visit_prob=visit_prob, expected_time_in=expected_time_in,
        E_T=E_T, var_T=var_T, kappa=kappa, a=a, b=b,
        transitions=transitions, initial=spec.initial, targets=frozenset(targets),
    )


def variance_by_first_step(spec: ChainSpec) -> tuple[float, float]:
    """Independent route to (E T, var T): first-step recursions for the
    first and second moment of T.  Used to cross-check the occupation-
    measure variance."""
    states, transitions, targets = _enumerate_reachable(spec, "rate")
    order = _topo_order(states)
    h = {s: 0.0 for s in targets}
    m2 = {s: 0.0 for s in targets}
    for s in order:
        if s in targets:
            continue
        outs = transitions[s]
        q_tot = sum(q for _, q in outs)
        eh = sum(q * h[s2] for s2, q in outs) / q_tot
        em2 = sum(q * m2[s2] for s2, q in outs) / q_tot
        h[s] = 1.0 / q_tot + eh
        # T = W + T' with W ~ Exp(q_tot) independent of the jump target
        m2[s] = 2.0 / q_tot**2 + 2.0 * eh / q_tot + em2
    mean = h[spec.initial]
    return mean, m2[spec.initial] - mean**2


def solve_discrete(spec: DiscreteChainSpec) -> tuple[float, float]:
    """(mean, variance) of the step count until the target, allowing a
    self-loop probability at each state."""
    states, transitions, targets = _enumerate_reachable(spec, "probability")
    order = _topo_order(states)
    n = {s: 0.0 for s in targets}
    m2 = {s: 0.0 for s in targets}
    for s in order:
        if s in targets:
            continue
        outs = transitions[s]
        move = sum(p for _, p in outs)
        stay = 1.0 - move
        if move <= 0:
            raise ChainValidationError(f"state {s:#x} cannot leave itself")
        en = sum(p * n[s2] for s2, p in outs)
        em2 = sum(p * m2[s2] for s2, p in outs)
        n[s] = (1.0 + en) / move
        # N = 1 + N' where N' restarts at s with prob `stay`
        m2[s] = (1.0 + 2.0 * (stay * n[s] + en) + em2) / move
    mean = n[spec.initial]
    return mean, m2[spec.initial] - mean**2


def continuize(spec: DiscreteChainSpec) -> ChainSpec:
    """Continuous-time chain with rates equal to the jump probabilities
    (self-loop mass simply lowers the total exit rate)."""
    return ChainSpec(spec.initial, spec.transitions, spec.is_target, spec.state_cap)


@dataclass
class Lemma1Report:
    kappa: float
    var_over_mean: float
    monotone: bool
    holds: bool


def lemma1_bound(sol: ExactSolution, tol: float = ABS_TOL) -> Lemma1Report:
    """var T / E T <= kappa, valid whenever h is monotone along transitions."""
    mono = sol.monotone_h()
    ratio = sol.var_T / sol.E_T
    holds = mono and ratio <= sol.kappa + tol
    return Lemma1Report(kappa=sol.kappa, var_over_mean=ratio, monotone=mono, holds=holds)


@dataclass
class Lemma2Report:
    delta: float
    epsilon: float
    q_delta: dict[int, float]
    occupation_bad: float
    lhs: float
    rhs: float
    holds: bool


def lemma2_bound(sol: ExactSolution, delta: float, epsilon: float,
                 tol: float = ABS_TOL) -> Lemma2Report:
    """var T/(E T)^2 <= 2*delta + epsilon + (bad occupation time)/(E T),
    where a state is bad when its large-decrement outflow q_delta(S)
    (decrements above 2*delta*E T) is at least epsilon.  Everything on the
    right is evaluated exactly from the occupation measure."""
    if not (delta > 0 and epsilon > 0):
        raise ValueError("delta and epsilon must be positive")
    threshold = 2.0 * delta * sol.E_T
    q_delta = {}
    occupation_bad = 0.0
    for s, outs in sol.transitions.items():
        qd = sum(q * (sol.h[s] - sol.h[s2]) for s2, q in outs
                 if sol.h[s] - sol.h[s2] > threshold)
        q_delta[s] = qd
        if qd >= epsilon:
            occupation_bad += sol.expected_time_in[s]
    lhs = sol.var_T / sol.E_T**2
    rhs = 2.0 * delta + epsilon + occupation_bad / sol.E_T
    return Lemma2Report(delta=delta, epsilon=epsilon, q_delta=q_delta,
                        occupation_bad=occupation_bad, lhs=lhs, rhs=rhs,
                        holds=lhs <= rhs + tol)


@dataclass
class ContinuizationReport:
    mean_disc: float
    var_disc: float
    mean_cont: float
    var_cont: float
    mean_error: float
    var_error: float
    holds: bool


def continuization_check(spec: DiscreteChainSpec, tol: float = 1e-10) -> ContinuizationReport:
    """Check E T_cont = E T_disc and var T_cont = var T_disc + E T_disc by
    solving both chains exactly.  Requires the probabilities out of every
    non-target state to sum to 1 (no self-loops)."""
    states, transitions, _targets = _enumerate_reachable(spec, "probability")
    for s, outs in transitions.items():
        total = sum(p for _, p in outs)
        if abs(total - 1.0) > 1e-12:
            raise ChainValidationError(
                f"probabilities out of state {s:#x} sum to {total}, expected 1"
            )
    mean_disc, var_disc = solve_discrete(spec)
    cont = solve_hitting(continuize(spec))
    mean_err = abs(cont.E_T - mean_disc)
    var_err = abs(cont.var_T - (var_disc + mean_disc))
    return ContinuizationReport(
        mean_disc=mean_disc, var_disc=var_disc,
        mean_cont=cont.E_T, var_cont=cont.var_T,
        mean_error=mean_err, var_error=var_err,
        holds=mean_err <= tol and var_err <= tol,
    )
