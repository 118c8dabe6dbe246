"""Command-line driver: ``birkspec {spectrum,hull,moran,check} --config run.json --out dir``.

Exit codes: 0 success, 1 usage or configuration error, 2 a spectrum grid with
no feasible point.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .convex_geom import parabolic_hull, rotation_set
from .map_model import build_system, discretize_analytic
from .measures import MarkovMeasure
from .moran_builder import (ScheduleError, build_schedule_thm1, build_schedule_thm2,
                            local_dimension_certificate, sample_moran_blocks, verify_level)
from .spectrum_solver import (TransferModel, _jsonable, dual_dimension, primal_dimension,
                              spectrum_grid)
from .symbolic import PotentialTable, all_words, variation_bound

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
FLOAT_FMT = "%.10g"


class ConfigError(ValueError):
    pass


# --- configuration ------------------------------------------------------------

@dataclass
class PotentialSpec:
    """Either ``analytic`` (one dict or a list of dicts) or a ``table`` literal, at ``depth``."""
    depth: int = 1
    analytic: object = None
    table: list | None = None


@dataclass
class SolverParams:
    k: int = 1
    tol: float = 1e-6
    q_cap: float = 1e3
    runs: list | None = None


@dataclass
class SpectrumParams:
    alphas: list | None = None  # explicit points
    grid: dict | None = None    # {"lo": [...], "hi": [...], "num": [...]}


@dataclass
class HullParams:
    orders: list = field(default_factory=lambda: [1, 2])


@dataclass
class MoranParams:
    theorem: int = 1
    alpha: list = field(default_factory=lambda: [0.25])
    delta: float = 0.1
    stages: int = 3
    seeds: int = 100
    n_max: int = 4096
    slack: float = 0.1
    base: dict = field(default_factory=lambda: {"kind": "uniform"})
    n_target: int | None = None
    n_paths: int = 10000


@dataclass
class CheckParams:
    probes: int = 100
    linear_max_n: int = 12
    gap_lengths: list = field(default_factory=lambda: [5, 10, 20])
    variation_max_n: int = 8
    alphas: list | None = None


@dataclass
class RunConfig:
    map: dict = field(default_factory=lambda: {"family": "doubling"})
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    solver: SolverParams = field(default_factory=SolverParams)
    spectrum: SpectrumParams = field(default_factory=SpectrumParams)
    hull: HullParams = field(default_factory=HullParams)
    moran: MoranParams = field(default_factory=MoranParams)
    check: CheckParams = field(default_factory=CheckParams)
    seed: int = 0

    SECTIONS = {"potential": PotentialSpec, "solver": SolverParams, "spectrum": SpectrumParams,
                "hull": HullParams, "moran": MoranParams, "check": CheckParams}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known - {"schema_version"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw = {}
        for name, value in raw.items():
            if name == "schema_version":
                continue
            sub = cls.SECTIONS.get(name)
            if sub is not None:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {name!r} must be an object")
                allowed = {f.name for f in fields(sub)}
                bad = set(value) - allowed
                if bad:
                    raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
                kw[name] = sub(**value)
            else:
                kw[name] = value
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(asdict(self))
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        if not isinstance(self.map, dict) or "family" not in self.map:
            raise ConfigError("map needs a 'family'")
        p = self.potential
        if not isinstance(p.depth, int) or p.depth < 1:
            raise ConfigError("potential depth must be a positive integer")
        if (p.analytic is None) == (p.table is None):
            raise ConfigError("potential needs exactly one of 'analytic' or 'table'")
        s = self.solver
        if not isinstance(s.k, int) or not 1 <= s.k <= 16:
            raise ConfigError("solver k must be an integer in [1, 16]")
        if not 0 < s.tol < 1:
            raise ConfigError("solver tol must lie in (0, 1)")
        if s.q_cap <= 0:
            raise ConfigError("q_cap must be positive")
        mo = self.moran
        if mo.theorem not in (1, 2):
            raise ConfigError("moran theorem must be 1 or 2")
        if not 0 < mo.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not isinstance(mo.seeds, int) or mo.seeds < 1:
            raise ConfigError("seeds must be a positive integer")
        if mo.stages < 1 or mo.n_max < 1 or mo.n_paths < 1:
            raise ConfigError("stages, n_max and n_paths must be positive")
        if self.check.probes < 1:
            raise ConfigError("check probes must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return RunConfig.loads(text)


# --- construction helpers -----------------------------------------------------------

def make_system(cfg: RunConfig):
    try:
        return build_system(cfg.map)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad map spec: {exc}") from None


def make_potential(cfg: RunConfig, system) -> PotentialTable:
    p = cfg.potential
    try:
        if p.table is not None:
            return PotentialTable(system.m, p.depth, np.asarray(p.table, dtype=float), source="table")
        return discretize_analytic(system, p.analytic, p.depth)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad potential spec: {exc}") from None


def grid_points(spec: SpectrumParams, d: int) -> list[np.ndarray]:
    if spec.alphas is not None:
        pts = [np.atleast_1d(np.asarray(a, dtype=float)) for a in spec.alphas]
    elif spec.grid is not None:
        lo = np.atleast_1d(np.asarray(spec.grid["lo"], dtype=float))
        hi = np.atleast_1d(np.asarray(spec.grid["hi"], dtype=float))
        num = np.atleast_1d(np.asarray(spec.grid["num"], dtype=int))
        if not (len(lo) == len(hi) == len(num)):
            raise ConfigError("grid lo, hi and num must have equal lengths")
        axes = [np.linspace(a, b, int(n)) for a, b, n in zip(lo, hi, num)]
        pts = [np.array(c) for c in itertools.product(*axes)]
    else:
        pts = []
    if not pts:
        raise ConfigError("empty grid")
    if any(p.shape != (d,) for p in pts):
        raise ConfigError(f"grid points must have dimension {d}")
    return pts


def make_base_measure(cfg: RunConfig, system, f):
    base = cfg.moran.base
    kind = base.get("kind")
    if kind == "uniform":
        return MarkovMeasure.uniform(system.m)
    if kind == "bernoulli":
        return MarkovMeasure.bernoulli(base["p"])
    if kind == "gibbs":
        pt = dual_dimension(system, f, base["alpha"], int(base.get("k", cfg.solver.k)), cfg.solver.tol)
        if pt.measure is None:
            raise ConfigError(f"no Gibbs measure at alpha={base['alpha']} (status {pt.status})")
        return pt.measure
    raise ConfigError(f"unknown base measure kind {kind!r}")


# --- output helpers -----------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    return FLOAT_FMT % float(x)


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def write_json(path: str, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_jsonable(payload))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def gnuplot_script(csv_name: str, d: int) -> str:
    head = ["set datafile separator ','", "set key off"]
    if d == 1:
        body = ["set xlabel 'alpha'", "set ylabel 'D(alpha)'",
                f"plot '{csv_name}' using 1:2 every ::1 with linespoints pt 7 ps 0.5"]
    else:
        body = ["set view map", "set xlabel 'alpha_1'", "set ylabel 'alpha_2'", "set cblabel 'D'",
                f"splot '{csv_name}' using 1:2:3 every ::1 with image"]
    return "\n".join(head + body) + "\n"


def _prepare_out(out: str) -> None:
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory not writable: {out}")


# --- commands -------------------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, out: str, threads: int = 1) -> int:
    system = make_system(cfg)
    f = make_potential(cfg, system)
    pts = grid_points(cfg.spectrum, f.dim)
    _prepare_out(out)
    s = cfg.solver
    res = spectrum_grid(system, f, pts, s.k, s.tol, threads=threads, runs=s.runs, q_cap=s.q_cap)
    d = f.dim
    header = [f"alpha_{j + 1}" for j in range(d)] + ["D", "status", "s_star"] \
        + [f"q_{j + 1}" for j in range(d)] + ["h", "lambda"]
    rows = []
    for p in res:
        q = [None] * d if p.q_star is None else list(np.atleast_1d(p.q_star))
        rows.append(list(p.alpha) + [p.D, p.status, p.s_star] + q + [p.h, p.lam])
    write_csv(os.path.join(out, "spectrum.csv"), header, rows)
    write_json(os.path.join(out, "spectrum.json"),
               {"config": cfg.to_dict(), "points": [p.to_dict() for p in res]})
    with open(os.path.join(out, "spectrum.plt"), "w") as fh:
        fh.write(gnuplot_script("spectrum.csv", d))
    if all(p.status == "infeasible" for p in res):
        print("every grid point is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_hull(cfg: RunConfig, out: str, threads: int = 1) -> int:
    system = make_system(cfg)
    f = make_potential(cfg, system)
    orders = sorted(int(k) for k in cfg.hull.orders)
    if not orders or orders[0] < 1:
        raise ConfigError("hull orders must be positive integers")
    _prepare_out(out)
    rots = [rotation_set(system, f, k, seed=cfg.seed) for k in orders]
    A = parabolic_hull(system, f)
    incl = [{"k_low": a, "k_high": b, "included": rb.includes(ra, 1e-7)}
            for (a, ra), (b, rb) in zip(zip(orders, rots), zip(orders[1:], rots[1:]))]
    write_json(os.path.join(out, "hull.json"), {
        "rotation_sets": [{"k": k, **r.to_dict()} for k, r in zip(orders, rots)],
        "inclusions": incl,
        "parabolic_hull": {"empty": A.is_empty, **A.to_dict()},
    })
    return EXIT_OK


def _word_text(symbols) -> str:
    sep = "" if max(symbols, default=0) < 10 else ","
    return sep.join(str(int(a)) for a in symbols)


def cmd_moran(cfg: RunConfig, out: str, threads: int = 1) -> int:
    system = make_system(cfg)
    f = make_potential(cfg, system)
    mo = cfg.moran
    _prepare_out(out)
    mu = make_base_measure(cfg, system, f)
    try:
        if mo.theorem == 1:
            sch = build_schedule_thm1(system, f, mu, mo.alpha, mo.delta, stages=mo.stages,
                                      n_paths=mo.n_paths, seed=cfg.seed)
        else:
            sch = build_schedule_thm2(system, f, mu, mo.alpha, mo.delta, stages=mo.stages,
                                      n_paths=mo.n_paths, seed=cfg.seed, n_target=mo.n_target)
    except ScheduleError as exc:
        raise ConfigError(str(exc)) from None
    seeds = [cfg.seed + j for j in range(mo.seeds)]
    samples = [sample_moran_blocks(sch, mo.n_max, s) for s in seeds]
    rep = verify_level(sch, f, seeds, mo.n_max, samples)
    cert = local_dimension_certificate(sch, system, f, seeds, mo.n_max, samples)
    write_json(os.path.join(out, "schedule.json"), sch.to_dict())
    with open(os.path.join(out, "prefixes.txt"), "w") as fh:
        for smp in samples:
            fh.write(_word_text(smp.symbols[: mo.n_max]) + "\n")
    rows = [[s, c, rep.deviations[i, j]] for i, s in enumerate(seeds) for j, c in enumerate(rep.checkpoints)]
    write_csv(os.path.join(out, "convergence.csv"), ["seed", "checkpoint", "deviation"], rows)
    write_json(os.path.join(out, "certificate.json"), {
        "estimate": cert.estimate, "target": cert.target, "slack": mo.slack,
        "pass": cert.passes(mo.slack), "n_max": mo.n_max, "seeds": len(seeds),
        "ratios": cert.ratios, "monotone_fraction": float(rep.monotone.mean()),
    })
    return EXIT_OK


# --- invariant suite ----------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{self.name:<28} {FLOAT_FMT % self.value:>16} {FLOAT_FMT % self.threshold:>12}  {tag}"


def pressure_probes(model: TransferModel, probes: int, rng, step: float = 1e-5):
    """Largest relative gradient error and count of midpoint-convexity violations."""
    d = model.d
    worst, violations = 0.0, 0
    for _ in range(probes):
        q = rng.uniform(-2, 2, d)
        s = rng.uniform(0, 1.5)
        ev = model.evaluate(q, s)
        grad = np.append(ev.grad_q, ev.d_s)
        fd = np.zeros(d + 1)
        for j in range(d + 1):
            e = np.zeros(d + 1)
            e[j] = step
            hi = model.evaluate(q + e[:d], s + e[d]).value
            lo = model.evaluate(q - e[:d], s - e[d]).value
            fd[j] = (hi - lo) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - grad) / np.maximum(1.0, np.abs(grad)))))
        q2, s2 = rng.uniform(-2, 2, d), rng.uniform(0, 1.5)
        mid = model.evaluate((q + q2) / 2, (s + s2) / 2).value
        ends = 0.5 * (ev.value + model.evaluate(q2, s2).value)
        violations += int(mid > ends + 1e-10 * max(1.0, abs(ends)))
    return worst, violations


def brute_variation(f: PotentialTable, n: int) -> float:
    """max over pairs in one n-cylinder of |A_n f(x) - A_n f(y)|, by enumerating continuations."""
    r = f.depth
    words = all_words(n + r - 1, f.m)
    vals = f.window_values(words, wrap=False).mean(axis=1)
    key = words[:, :n] @ (f.m ** np.arange(n - 1, -1, -1))
    best = 0.0
    for kk in np.unique(key):
        v = vals[key == kk]
        best = max(best, float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2))))
    return best


def _default_check_alphas(rot, count: int = 3):
    c = rot.vertices.mean(axis=0)
    return [c + 0.5 * (rot.vertices[j % len(rot.vertices)] - c) for j in range(count)]


def run_checks(cfg: RunConfig) -> list[CheckResult]:
    system = make_system(cfg)
    f = make_potential(cfg, system)
    ck, k = cfg.check, cfg.solver.k
    rng = np.random.default_rng(cfg.seed)
    out = []
    model = TransferModel(system, f, k)
    worst, viol = pressure_probes(model, ck.probes, rng)
    out.append(CheckResult("pressure_gradient_rel_err", worst, 1e-4, worst <= 1e-4))
    out.append(CheckResult("pressure_convexity_viol", viol, 0, viol == 0))
    slack = 0.0
    for n in range(1, ck.variation_max_n + 1):
        slack = max(slack, brute_variation(f, n) - variation_bound(f, n))
    out.append(CheckResult("variation_bound_excess", slack, 1e-12, slack <= 1e-12))
    if system.is_affine:
        gap = max(system.lemma2_gap(n) for n in range(1, ck.linear_max_n + 1))
        out.append(CheckResult("lemma2_gap_linear", gap, 1e-10, gap <= 1e-10))
    else:
        gaps = [system.lemma2_gap(n) for n in ck.gap_lengths]
        rise = max([b - a for a, b in zip(gaps, gaps[1:])], default=0.0)
        out.append(CheckResult("lemma2_gap_trend_rise", rise, 0, rise <= 0))
    rot = rotation_set(system, f, k, seed=cfg.seed)
    alphas = ck.alphas if ck.alphas is not None else _default_check_alphas(rot)
    diff, gap = 0.0, 0.0
    for a in alphas:
        du = dual_dimension(system, f, a, k, cfg.solver.tol, model=model, rot=rot)
        pr = primal_dimension(system, f, a, k, cfg.solver.tol, model=model)
        diff = max(diff, abs(du.D - pr.D))
        gap = max(gap, float(np.nan_to_num(pr.gap, nan=np.inf)))
    out.append(CheckResult("primal_dual_difference", diff, 1e-3, diff <= 1e-3))
    out.append(CheckResult("duality_gap", gap, 1e-3, gap <= 1e-3))
    return out


def cmd_check(cfg: RunConfig, out: str | None = None, threads: int = 1) -> int:
    results = run_checks(cfg)
    print(f"{'check':<28} {'value':>16} {'threshold':>12}  result")
    for r in results:
        print(r.line())
    if out:
        _prepare_out(out)
        write_json(os.path.join(out, "check.json"), {"checks": [asdict(r) for r in results]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CONFIG


COMMANDS = {"spectrum": cmd_spectrum, "hull": cmd_hull, "moran": cmd_moran, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="birkspec", description="Birkhoff spectrum solver for interval maps")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError("threads must be positive")
        return COMMANDS[args.command](cfg, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
