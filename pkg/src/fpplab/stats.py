"""Estimators and the two-sided concentration machinery.

Moment estimates carry leave-one-out jackknife standard errors (ratio
statistics like sd/mean have no closed-form CI).  The scale-free smallness
measure is the fixed point of the empirical tail, and the explicit lower
modulus is evaluated entirely in log space because it underflows doubles
well before the interesting range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_NEG_INF = float("-inf")


@dataclass
class SampleStats:
    n: int
    mean: float
    variance: float  # unbiased
    sd: float
    ratio: float     # sd / mean
    mean_se: float
    sd_se: float
    ratio_se: float

    @classmethod
    def from_samples(cls, samples) -> "SampleStats":
        x = np.asarray(samples, dtype=float)
        n = len(x)
        if n < 3:
            raise ValueError("need at least 3 samples")
        mean = float(x.mean())
        var = float(x.var(ddof=1))
        sd = math.sqrt(var)
        s1 = x.sum()
        s2 = (x * x).sum()
        loo_mean = (s1 - x) / (n - 1)
        loo_var = np.maximum((s2 - x * x - (n - 1) * loo_mean**2) / (n - 2), 0.0)
        loo_sd = np.sqrt(loo_var)
        with np.errstate(divide="ignore", invalid="ignore"):
            loo_ratio = np.where(loo_mean != 0.0, loo_sd / loo_mean, 0.0)
        return cls(
            n=n, mean=mean, variance=var, sd=sd,
            ratio=sd / mean if mean != 0.0 else 0.0,
            mean_se=_jack_se(loo_mean),
            sd_se=_jack_se(loo_sd),
            ratio_se=_jack_se(loo_ratio),
        )


def _jack_se(loo_values: np.ndarray) -> float:
    n = len(loo_values)
    center = loo_values.mean()
    return float(math.sqrt((n - 1) / n * float(((loo_values - center) ** 2).sum())))


def jackknife_se(samples, estimator) -> float:
    """Generic leave-one-out jackknife standard error of ``estimator``."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    loo = np.array([estimator(np.delete(x, i)) for i in range(n)])
    return _jack_se(loo)


# ---------------------------------------------------------------------------
# The scale-free smallness measure: inf{d : P(|V| > d) <= d}

@dataclass
class L0Estimate:
    value: float
    n: int


def l0_norm_estimate(samples) -> L0Estimate:
    """Smallest threshold d with (empirical fraction of |v| > d) <= d.

    The empirical tail is a right-continuous nonincreasing step function,
    so the fixed point sits either at a sample value or at one of the
    levels (n - i)/n; scan the constant pieces left to right.
    """
    v = np.abs(np.asarray(samples, dtype=float))
    n = len(v)
    if n < 1:
        raise ValueError("need at least one sample")
    vs = np.sort(v)
    u = np.unique(vs)  # sorted ascending
    # piece boundaries: [0, u0), [u0, u1), ..., [u_last, inf)
    ge_counts = n - np.searchsorted(vs, u, side="left")
    lefts = np.concatenate([[0.0], u])
    rights = np.concatenate([u, [math.inf]])
    tails = np.concatenate([ge_counts / n, [0.0]])  # tail on each piece
    for left, right, g in zip(lefts, rights, tails):
        if left >= right:
            continue
        if g <= left:
            return L0Estimate(value=float(left), n=n)
        if g < right:
            return L0Estimate(value=float(g), n=n)
    raise AssertionError("fixed point always exists on the last piece")


# ---------------------------------------------------------------------------
# Shortfall moment of a uniform sum (Irwin-Hall second shortfall moment)

MC_DRAWS = 10**6
_MC_SEED = 0x5EED_F0


@dataclass
class FKValue:
    K: int
    s: float
    value: float
    log_value: float
    stderr: float  # zero on the exact branches
    method: str


def F_K_eval(K: int, s: float) -> FKValue:
    """E (max(0, s - sum of K iid Uniform(0,1)))^2.

    Exact closed form on the lower piece (s <= 1, evaluated in log space)
    and the saturated piece (s >= K); Monte Carlo with 10^6 draws in
    between.  The MC branch is internally seeded so repeated evaluation is
    deterministic.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0.0:
        return FKValue(K, s, 0.0, LOG_NEG_INF, 0.0, "exact-zero")
    if s <= 1.0:
        log_val = math.log(2.0) + (K + 2) * math.log(s) - math.lgamma(K + 3)
        return FKValue(K, s, math.exp(log_val), log_val, 0.0, "closed-form")
    if s >= K:
        val = (s - K / 2.0) ** 2 + K / 12.0
        return FKValue(K, s, val, math.log(val), 0.0, "saturated")
    rng = np.random.default_rng(np.random.SeedSequence([_MC_SEED, K]))
    sums = rng.random((MC_DRAWS, K)).sum(axis=1)
    short = np.maximum(s - sums, 0.0) ** 2
    val = float(short.mean())
    se = float(short.std(ddof=1) / math.sqrt(MC_DRAWS))
    return FKValue(K, s, val, math.log(val) if val > 0 else LOG_NEG_INF, se, "mc")


@dataclass
class PsiMinusValue:
    delta: float
    K: int
    s: float
    log_value: float
    value: float  # 0.0 when below double-precision range


def psi_minus_eval(delta: float) -> PsiMinusValue:
    """Explicit lower modulus: sqrt of
    (1/4)(3/d - d)^2 * F_K(d^2/(3-d^2)) * d/3 with K = ceil(3/d^2),
    evaluated in log space (astronomically small for small d)."""
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    K = math.ceil(3.0 / delta**2)
    s = delta**2 / (3.0 - delta**2)
    fk = F_K_eval(K, s)
    log_sq = (math.log(0.25) + 2.0 * math.log(3.0 / delta - delta)
              + fk.log_value + math.log(delta / 3.0))
    log_value = 0.5 * log_sq
    value = math.exp(log_value) if log_value > -700 else 0.0
    return PsiMinusValue(delta=delta, K=K, s=s, log_value=log_value, value=value)


# ---------------------------------------------------------------------------
# Two-sided verification helpers

@dataclass
class LowerBoundPoint:
    delta: float
    K: int
    tail: float          # empirical P(Xi / E X >= delta)
    slack: float         # tail minus (delta/3 + 1/(delta K)), clamped at 0
    log_rhs: float       # log of the variance-ratio lower bound
    lhs: float           # var X / (E X)^2
    holds: bool


def theorem1_lower_check(xi_samples, mean_x: float, var_x: float,
                         deltas) -> list[LowerBoundPoint]:
    """Per grid delta, check
    var X/(E X)^2 >= (1/4)(3/d - d)^2 F_K(d^2/(3-d^2)) (P(Xi/EX >= d) - d/3 - 1/(dK))^+
    with K = ceil(3/d^2).  Log-space on the right; a clamped-to-zero slack
    makes the bound hold trivially."""
    xi = np.asarray(xi_samples, dtype=float)
    lhs = var_x / mean_x**2
    log_lhs = math.log(lhs) if lhs > 0 else LOG_NEG_INF
    out = []
    for delta in deltas:
        K = math.ceil(3.0 / delta**2)
        tail = float(np.mean(xi / mean_x >= delta))
        slack = tail - (delta / 3.0 + 1.0 / (delta * K))
        if slack <= 0.0:
            out.append(LowerBoundPoint(delta, K, tail, 0.0, LOG_NEG_INF, lhs, True))
            continue
        fk = F_K_eval(K, delta**2 / (3.0 - delta**2))
        log_rhs = (math.log(0.25) + 2.0 * math.log(3.0 / delta - delta)
                   + fk.log_value + math.log(slack))
        out.append(LowerBoundPoint(delta, K, tail, slack, log_rhs, lhs,
                                   holds=log_lhs >= log_rhs))
    return out


@dataclass
class TrendMember:
    name: str
    param: float
    sd_over_mean: float
    ratio_se: float
    l0_xi: float
    n_runs: int


@dataclass
class TrendReport:
    members: list[TrendMember]
    spearman: float


def _spearman(a, b) -> float:
    from scipy.stats import spearmanr

    rho = spearmanr(a, b).statistic
    return float(rho)


def theorem1_trend_experiment(members, runs: int, seed, threads: int = 1) -> TrendReport:
    """Per family member, estimate sd(X)/E X and the smallness measure of
    Xi/E X, then report both sequences and their Spearman rank
    correlation.  ``members`` holds (name, param, graph, source, target)."""
    from .fpp import sample_fpp_batch

    if len(members) < 5:
        raise ValueError("trend experiment needs at least 5 family members")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    member_seeds = ss.spawn(len(members))
    rows = []
    for idx, (name, param, g, source, target) in enumerate(members):
        batch = sample_fpp_batch(g, source, target, runs,
                                 member_seeds[idx], threads=threads)
        stats = SampleStats.from_samples(batch.X)
        l0 = l0_norm_estimate(batch.Xi / stats.mean)
        rows.append(TrendMember(name=name, param=float(param),
                                sd_over_mean=stats.ratio, ratio_se=stats.ratio_se,
                                l0_xi=l0.value, n_runs=runs))
    rho = _spearman([r.sd_over_mean for r in rows], [r.l0_xi for r in rows])
    return TrendReport(members=rows, spearman=rho)
