"""Batch experiment front end.

Scenarios are JSON configs naming a process, a graph source, and a list of
checks; the runner executes every check, writes ``report.json`` plus
per-run CSVs, and prints a summary table.  Everything downstream of
(config, seed) is deterministic, independent of the thread count.

Exit codes: 0 all hard assertions pass, 1 assertion failure,
2 usage/config error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    DiscreteChainSpec,
    continuization_check,
    lemma1_bound,
    lemma2_bound,
    solve_hitting,
)
from .fpp import (
    coupled_resample,
    fpp_chain_spec,
    prop4_check,
    sample_fpp_batch,
    sample_traversal,
    submultiplicativity_probe,
)
from .graphs import (
    CapacityError,
    FAMILIES,
    GraphParseError,
    GraphValidationError,
    WeightedGraph,
    bridge_graph,
    complete_graph,
    grid_graph,
    min_cut_weight,
    parse_edge_list,
)
from .growth import CoverageConfig, GrowthConfig, prop1_check, prop3_check
from .multigraph import a_k_eval, prop2_check, sample_stopping_times
from .stats import SampleStats, psi_minus_eval, theorem1_lower_check, theorem1_trend_experiment

SCHEMA_VERSION = 1

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Check catalog

CHECKS: dict[str, dict] = {}


def _register(name, processes, anchor, statement):
    def wrap(fn):
        CHECKS[name] = {"fn": fn, "processes": processes, "anchor": anchor,
                        "statement": statement}
        return fn
    return wrap


class _Context:
    def __init__(self, cfg, seed, out_dir, threads):
        self.cfg = cfg
        self.seed = seed
        self.out_dir = out_dir
        self.threads = threads
        self._graph = None
        self._solution = None

    @property
    def runs(self):
        return int(self.cfg.get("runs", 10_000))

    def graph(self) -> WeightedGraph:
        if self._graph is None:
            self._graph = _load_graph(self.cfg, self.seed)
        return self._graph

    def endpoints(self):
        g = self.graph()
        src = self.cfg.get("source")
        dst = self.cfg.get("target")
        for name in (src, dst):
            if name is not None and name not in g.vertices:
                raise ConfigError(f"vertex {name!r} not in the graph")
        s = g.vertices.index(src) if src is not None else 0
        t = g.vertices.index(dst) if dst is not None else g.n - 1
        if s == t:
            raise ConfigError("source and target coincide")
        return s, t

    def solution(self):
        if self._solution is None:
            s, t = self.endpoints()
            self._solution = solve_hitting(fpp_chain_spec(self.graph(), s, t))
        return self._solution

    def check_seed(self, name):
        return np.random.SeedSequence([self.seed, _stable_hash(name)])


def _stable_hash(name: str) -> int:
    h = 0
    for ch in name:
        h = (h * 131 + ord(ch)) & 0x7FFFFFFF
    return h


@_register("lemma1", ("fpp",), "Lemma 1", "var T / E T <= kappa (max h-decrement)")
def _check_lemma1(ctx, params):
    rep = lemma1_bound(ctx.solution())
    return _clean(rep), rep.holds


@_register("lemma2", ("fpp",), "Lemma 2",
           "var T/(E T)^2 <= 2d + e + occupation of {q_d >= e}/E T")
def _check_lemma2(ctx, params):
    deltas = params.get("deltas", [0.05, 0.1, 0.2, 0.5])
    epsilons = params.get("epsilons", [0.05, 0.1, 0.2, 0.5])
    for v in list(deltas) + list(epsilons):
        if not v > 0:
            raise ConfigError(f"lemma2 grid values must be positive, got {v}")
    sol = ctx.solution()
    grid = []
    ok = True
    for d in deltas:
        for e in epsilons:
            rep = lemma2_bound(sol, d, e)
            ok = ok and rep.holds
            grid.append({"delta": d, "epsilon": e, "lhs": rep.lhs, "rhs": rep.rhs,
                         "occupation_bad": rep.occupation_bad, "holds": rep.holds})
    return {"grid": grid}, ok


@_register("prop4", ("fpp",), "Proposition 4", "var X <= E X / w_min")
def _check_prop4(ctx, params):
    rep = prop4_check(ctx.solution(), ctx.graph())
    return _clean(rep), rep.holds


@_register("continuization", ("fpp", "bounds"), "continuization identity",
           "E T_cont = E T_disc and var T_cont = var T_disc + E T_disc")
def _check_continuization(ctx, params):
    count = int(params.get("count", 50))
    rng = np.random.default_rng(ctx.check_seed("continuization"))
    worst_mean = worst_var = 0.0
    for _ in range(count):
        spec = _random_discrete_chain(rng, bits=int(params.get("bits", 8)))
        rep = continuization_check(spec)
        worst_mean = max(worst_mean, rep.mean_error)
        worst_var = max(worst_var, rep.var_error)
    ok = worst_mean <= 1e-10 and worst_var <= 1e-10
    return {"chains": count, "worst_mean_error": worst_mean,
            "worst_var_error": worst_var}, ok


@_register("dual_agreement", ("fpp",), "subset-chain formulation",
           "MC mean/var of X agree with the exact chain solution within 4 sigma")
def _check_dual_agreement(ctx, params):
    s, t = ctx.endpoints()
    batch = sample_fpp_batch(ctx.graph(), s, t, ctx.runs,
                             ctx.check_seed("dual_agreement"), threads=ctx.threads)
    _write_fpp_csv(ctx, "dual_agreement_runs.csv", batch)
    stats = SampleStats.from_samples(batch.X)
    sol = ctx.solution()
    var_se = 2.0 * stats.sd * stats.sd_se
    z_mean = abs(stats.mean - sol.E_T) / stats.mean_se
    z_var = abs(stats.variance - sol.var_T) / var_se
    ok = z_mean <= 4.0 and z_var <= 4.0
    return {"mc_mean": stats.mean, "exact_mean": sol.E_T, "z_mean": z_mean,
            "mc_var": stats.variance, "exact_var": sol.var_T, "z_var": z_var}, ok


@_register("coupling_lower", ("fpp",), "resampling coupling",
           "var X >= (1/4) E (X' - X)^2 for the conditioned-interval coupling")
def _check_coupling_lower(ctx, params):
    g = ctx.graph()
    s, t = ctx.endpoints()
    sol = ctx.solution()
    a = float(params.get("a", 0.25 * sol.E_T))
    b = float(params.get("b", 2.0 * sol.E_T))
    if not 0 < a < b:
        raise ConfigError("coupling interval needs 0 < a < b")
    runs = ctx.runs
    children = ctx.check_seed("coupling_lower").spawn(runs)
    sq = np.empty(runs)
    bound_ok = True
    for i in range(runs):
        rng = np.random.default_rng(children[i])
        xi = sample_traversal(g, rng)
        cs = coupled_resample(g, xi, a, b, rng, source=s, target=t)
        sq[i] = (cs.X_prime - cs.X) ** 2
        bound_ok = bound_ok and cs.X_prime - cs.X <= cs.increment_bound() + 1e-9
    stats = SampleStats.from_samples(sq)
    rhs = 0.25 * stats.mean
    ok = bound_ok and sol.var_T >= rhs - 3.0 * 0.25 * stats.mean_se
    return {"var_X": sol.var_T, "quarter_mean_sq_increment": rhs,
            "pathwise_increment_bound_held": bound_ok, "runs": runs}, ok


@_register("submultiplicativity", ("fpp",), "submultiplicative tails",
           "P(X > y1+y2) <= P(X > y1) P(X > y2), advisory with binomial band")
def _check_submult(ctx, params):
    s, t = ctx.endpoints()
    batch = sample_fpp_batch(ctx.graph(), s, t, ctx.runs,
                             ctx.check_seed("submultiplicativity"), threads=ctx.threads)
    sol = ctx.solution()
    y1 = float(params.get("y1", sol.E_T))
    y2 = float(params.get("y2", sol.E_T))
    rep = submultiplicativity_probe(batch.X, y1, y2)
    return rep, None  # advisory: never a hard failure


@_register("theorem1_lower", ("fpp",), "two-sided bound, lower half",
           "var X/(E X)^2 >= explicit shortfall-moment expression on a delta grid")
def _check_theorem1_lower(ctx, params):
    deltas = params.get("deltas", [0.25, 0.5, 1.0])
    s, t = ctx.endpoints()
    batch = sample_fpp_batch(ctx.graph(), s, t, ctx.runs,
                             ctx.check_seed("theorem1_lower"), threads=ctx.threads)
    sol = ctx.solution()
    points = theorem1_lower_check(batch.Xi, sol.E_T, sol.var_T, deltas)
    ok = all(p.holds for p in points)
    return {"points": [_clean(p) for p in points]}, ok


def default_trend_family():
    members = []
    for r in (1.0, 0.3, 0.1, 0.03, 0.01):
        g = bridge_graph(3, 3, r)
        members.append((f"bridge-{r}", r, g, 0, g.n - 1))
    for n in (16, 64, 256):
        members.append((f"complete-{n}", float(n), complete_graph(n), 0, 1))
    for r in (4, 8):
        g = grid_graph(r, r)
        members.append((f"grid-{r}x{r}", float(r), g, 0, g.n - 1))
    return members


@_register("theorem1_trend", ("fpp",), "two-sided bound, qualitative",
           "sd(X)/E X and the L0-size of Xi/E X move together across a family")
def _check_theorem1_trend(ctx, params):
    members = default_trend_family()
    runs = int(params.get("runs", ctx.runs))
    rep = theorem1_trend_experiment(
        members, runs, ctx.check_seed("theorem1_trend"), threads=ctx.threads)
    min_rho = float(params.get("min_spearman", 0.9))
    ok = rep.spearman > min_rho
    if ctx.out_dir is not None:
        lines = ["member,param,sd_over_mean,ci,l0_xi,n_runs"]
        for mrow in rep.members:
            lines.append(f"{mrow.name},{mrow.param!r},{mrow.sd_over_mean!r},"
                         f"{mrow.ratio_se!r},{mrow.l0_xi!r},{mrow.n_runs}")
        (ctx.out_dir / "trend_members.csv").write_text("\n".join(lines) + "\n")
    return _clean(rep), ok


@_register("prop2", ("multigraph",), "Proposition 2",
           "sd/mean of the k-tree / k-triangle arrival times obeys graph-free bounds")
def _check_prop2(ctx, params):
    g = ctx.graph()
    ks = [int(k) for k in params.get("ks", [1])]
    kinds = tuple(params.get("kinds", ["span", "tria"]))
    for kind in kinds:
        if kind not in ("span", "tria"):
            raise ConfigError(f"unknown stopping-time kind {kind!r}")
    gamma, _ = min_cut_weight(g)
    samples = sample_stopping_times(g, ks, ctx.runs, ctx.check_seed("prop2"),
                                    kinds=kinds, threads=ctx.threads)
    if ctx.out_dir is not None:
        lines = ["run_index,k,T_span,T_tria"]
        for k in ks:
            for i in range(ctx.runs):
                tspan = samples["span"][k][i] if "span" in kinds else ""
                ttria = samples["tria"][k][i] if "tria" in kinds else ""
                lines.append(f"{i},{k},{tspan!r},{ttria!r}")
        (ctx.out_dir / "prop2_runs.csv").write_text("\n".join(lines) + "\n")
    reports = []
    ok = True
    for kind in kinds:
        for k in ks:
            rep = prop2_check(g, k, ctx.runs, None, kind=kind, gamma=gamma,
                              samples=samples[kind][k])
            ok = ok and rep.holds and (rep.mean_bound_holds in (None, True))
            reports.append(_clean(rep))
    return {"gamma": gamma, "reports": reports}, ok


@_register("prop1", ("growth",), "Proposition 1",
           "lattice growth hitting time: var T <= E T / c_lo")
def _check_prop1(ctx, params):
    cfg = _growth_config(ctx.cfg)
    rep = prop1_check(cfg, ctx.runs, ctx.check_seed("prop1"), threads=ctx.threads)
    return _clean(rep), rep.holds


@_register("prop3", ("coverage",), "Proposition 3",
           "coverage draw count: var T <= n E T")
def _check_prop3(ctx, params):
    cov = CoverageConfig.from_graph(ctx.graph())
    rep = prop3_check(cov, ctx.runs, ctx.check_seed("prop3"), threads=ctx.threads)
    return _clean(rep), rep.holds


@_register("a_k", ("multigraph", "bounds"), "Lemma 5 corollary",
           "a(k) = inf q/(1-(1-q^3)^k) obeys a(1)=1 and a(k) <= (e/(e-1)) k^(-1/3)")
def _check_a_k(ctx, params):
    kmax = int(params.get("kmax", 100))
    envelope = math.e / (math.e - 1.0)
    values = []
    ok = abs(a_k_eval(1) - 1.0) <= 1e-6
    for k in range(1, kmax + 1):
        a = a_k_eval(k)
        values.append(a)
        ok = ok and a <= envelope * k ** (-1.0 / 3.0) + 1e-12
    return {"kmax": kmax, "a_1": values[0], "a_kmax": values[-1], "holds_envelope": ok}, ok


@_register("psi_minus", ("fpp", "bounds"), "explicit lower modulus",
           "psi_-(d) > 0 on (0,1], log-space evaluation")
def _check_psi_minus(ctx, params):
    grid = params.get("deltas", [round(0.05 * i, 2) for i in range(1, 21)])
    rows = []
    ok = True
    for d in grid:
        p = psi_minus_eval(float(d))
        rows.append({"delta": p.delta, "K": p.K, "log_value": p.log_value,
                     "value": p.value})
        ok = ok and math.isfinite(p.log_value)
    ref = psi_minus_eval(1.0)
    ok = ok and abs(ref.value - 0.013176156917368244) <= 1e-5 * 0.0132
    return {"grid": rows, "value_at_1": ref.value}, ok


# ---------------------------------------------------------------------------
# Config plumbing

def _load_graph(cfg, seed) -> WeightedGraph:
    spec = cfg.get("graph")
    if spec is None:
        raise ConfigError("scenario needs a 'graph' entry")
    if "edge_list" in spec:
        return parse_edge_list(spec["edge_list"])
    if "path" in spec:
        p = Path(spec["path"])
        if not p.exists():
            raise ConfigError(f"graph file not found: {p}")
        return parse_edge_list(p.read_text())
    if "family" in spec:
        name = spec["family"]
        if name not in FAMILIES:
            raise ConfigError(f"unknown family {name!r}; have {sorted(FAMILIES)}")
        args = dict(spec.get("args", {}))
        if name == "random_gnp":
            args.setdefault("weight_range", (0.5, 2.0))
            args["weight_range"] = tuple(args["weight_range"])
            args["rng"] = np.random.default_rng(np.random.SeedSequence([seed, 0xF00D]))
        if name == "bridge":
            args = {"c1": args["c1"], "c2": args["c2"], "bridge_rate": args["bridge_rate"]}
        try:
            return FAMILIES[name](**args)
        except TypeError as exc:
            raise ConfigError(f"bad arguments for family {name!r}: {exc}") from None
    raise ConfigError("graph entry needs one of: edge_list, path, family")


def _growth_config(cfg) -> GrowthConfig:
    params = cfg.get("growth", {})
    try:
        return GrowthConfig.builtin(
            radius=int(params.get("radius", 6)),
            target=params.get("target", [[3, 0], [-3, 0], [0, 3], [0, -3]]),
            kind=params.get("rate", {}).get("kind", "constant"),
            **params.get("rate", {}).get("params", {"c": 1.0}),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad growth config: {exc}") from None


def _random_discrete_chain(rng, bits=8) -> DiscreteChainSpec:
    """Random increasing discrete chain on bitmasks: from each non-full
    state, 1-3 strictly larger successors with probabilities summing to 1."""
    full = (1 << bits) - 1
    table = {}

    def build(mask):
        if mask in table or mask == full:
            return
        free = bits - bin(mask).count("1")
        n_succ = min(int(rng.integers(1, 4)), (1 << free) - 1)
        succs = set()
        while len(succs) < n_succ:
            add = 0
            for b in range(bits):
                if not (mask >> b) & 1 and rng.random() < 0.3:
                    add |= 1 << b
            if add:
                succs.add(mask | add)
        probs = rng.dirichlet(np.ones(len(succs)))
        table[mask] = [(s, float(p)) for s, p in zip(sorted(succs), probs)]
        for s in succs:
            build(s)

    build(0)
    return DiscreteChainSpec(
        initial=0,
        transitions=lambda m: table.get(m, []),
        is_target=lambda m: m == full or m not in table,
    )


def _clean(obj):
    """JSON-ready deep conversion: dataclasses, numpy scalars/arrays, int keys."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.size > 64:
            return {"n": int(obj.size), "mean": float(obj.mean()), "min": float(obj.min()),
                    "max": float(obj.max())}
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def _write_fpp_csv(ctx, name, batch):
    if ctx.out_dir is None:
        return
    lines = ["run_index,X,Xi,path_len"]
    for i, x, xi, plen in batch.rows():
        lines.append(f"{i},{x!r},{xi!r},{plen}")
    (ctx.out_dir / name).write_text("\n".join(lines) + "\n")


def _validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    process = cfg.get("process")
    if process not in ("fpp", "multigraph", "coverage", "growth", "bounds"):
        raise ConfigError(f"unknown process kind {process!r}")
    checks = cfg.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("config needs a non-empty 'checks' list")
    norm = []
    for item in checks:
        if isinstance(item, str):
            name, params = item, {}
        elif isinstance(item, dict) and "name" in item:
            name = item["name"]
            params = {k: v for k, v in item.items() if k != "name"}
        else:
            raise ConfigError(f"bad check entry: {item!r}")
        if name not in CHECKS:
            known = ", ".join(sorted(CHECKS))
            raise ConfigError(f"unknown check {name!r}; catalog: {known}")
        if process not in CHECKS[name]["processes"]:
            raise ConfigError(
                f"check {name!r} does not apply to process {process!r} "
                f"(valid: {CHECKS[name]['processes']})"
            )
        norm.append((name, params))
    return norm


def run_scenario(config_path, seed=None, out_dir=None, threads=1) -> int:
    try:
        cfg = json.loads(Path(config_path).read_text())
    except FileNotFoundError:
        print(f"error: config not found: {config_path}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        checks = _validate_config(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    out = Path(out_dir) if out_dir else (Path(cfg["out"]) if "out" in cfg else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg, seed, out, threads)

    report = {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
              "process": cfg["process"], "seed": seed, "checks": {}}
    any_fail = False
    rows = []
    try:
        for name, params in checks:
            result, passed = CHECKS[name]["fn"](ctx, params)
            inconclusive = isinstance(result, dict) and bool(result.get("inconclusive"))
            if passed is None:
                status = "report"
            elif not passed:
                status = "FAIL"
                any_fail = True
            elif inconclusive:
                status = "inconclusive"
            else:
                status = "pass"
            report["checks"][name] = {"status": status, "result": _clean(result)}
            rows.append((name, CHECKS[name]["anchor"], status))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error (capacity): {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (GraphParseError, GraphValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    text = json.dumps(report, sort_keys=True, indent=2)
    if out is not None:
        (out / "report.json").write_text(text + "\n")
    width = max(len(r[0]) for r in rows)
    print(f"scenario: {config_path}  (seed {seed})")
    for name, anchor, status in rows:
        print(f"  {name:<{width}}  {anchor:<28}  {status}")
    if out is not None:
        print(f"report written to {out / 'report.json'}")
    return EXIT_FAIL if any_fail else EXIT_PASS


def list_checks() -> None:
    print(f"{len(CHECKS)} checks:")
    for name in sorted(CHECKS):
        meta = CHECKS[name]
        procs = "/".join(meta["processes"])
        print(f"  {name:<20} [{meta['anchor']}] ({procs}): {meta['statement']}")


def list_families() -> None:
    sigs = {
        "path": "path(n)",
        "complete": "complete(n)",
        "grid": "grid(rows, cols)",
        "bridge": "bridge(c1, c2, bridge_rate)",
        "random_gnp": "random_gnp(n, p, weight_range)",
    }
    print("graph families:")
    for name in sorted(FAMILIES):
        print(f"  {sigs[name]}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fpplab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a scenario config")
    runp.add_argument("config")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--out", default=None)
    runp.add_argument("--threads", type=int, default=1)
    sub.add_parser("list-checks", help="print the check catalog")
    sub.add_parser("families", help="print the built-in graph families")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_scenario(args.config, seed=args.seed, out_dir=args.out,
                            threads=args.threads)
    if args.command == "list-checks":
        list_checks()
        return EXIT_PASS
    list_families()
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
