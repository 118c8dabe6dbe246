"""Concatenation constructions behind the lower bounds, run as samplers.

Two schedules are built:

* ``theorem1`` blocks: stage i draws words of length l_i from an ergodic
  measure nu_i, conditioned on the three estimation inequalities at
  tolerance eps_i and on not being constant, and repeats that N_i = l_{i+2}
  times.
* ``theorem2`` blocks: stage i draws one mu-word of length i (conditioned the
  same way) and then appends a deterministic filler of parabolic runs whose
  lengths follow the convex weights of alpha in the parabolic hull.

The admissible sets are never enumerated; they are predicates evaluated by
rejection sampling.  Egorov-type uniformity is replaced by empirical
thresholds over sampled paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .convex_geom import parabolic_hull, strict_convex_decomposition
from .measures import MarkovMeasure, MixtureMeasure, ergodic_approximants, measure_stats
from .symbolic import PotentialTable, all_words, birkhoff_averages, variation_bound

DEFAULT_PATHS = 10_000
ENUM_MAX = 12
CHUNK = 2000


class ScheduleError(ValueError):
    pass


# --- ingredients --------------------------------------------------------------

def g_table(system, depth: int | None = None) -> PotentialTable:
    """g as the cylinder mean log(diam I_{sigma w} / diam I_w) on depth-q words.

    Cylinder means telescope along orbits, so h / lambda under this table
    matches the log-mass over log-diameter ratio the certificate measures.
    """
    if depth is None:
        depth = 1 if system.is_affine else 8
    words = all_words(depth, system.m)
    return PotentialTable(system.m, depth, system.edge_log_ratios(words), source="g")


@dataclass(frozen=True)
class Targets:
    h: float
    lam: float
    beta: np.ndarray


def _targets(nu, f: PotentialTable, g: PotentialTable, h: float | None = None) -> Targets:
    from .measures import entropy_rate

    depth = max(f.depth, g.depth)
    mass = nu.marginal(depth)
    beta = mass @ f.lift(depth).values
    lam = float(mass @ g.lift(depth).values[:, 0])
    return Targets(entropy_rate(nu) if h is None else h, lam, beta)


def analytic_thresholds(system, f: PotentialTable, top: int, enum_max: int = ENUM_MAX,
                        samples: int = 512, seed: int = 0, cache: dict | None = None) -> np.ndarray:
    """t[i-1] = sup over i <= n <= top of the variation and distortion-gap bounds at length n.

    Lengths up to ``enum_max`` enumerate every word; longer lengths use
    ``samples`` uniform random words, so those entries are estimates.  The
    per-length values are memoised in ``cache`` and depend only on (seed, n).
    """
    cache = {} if cache is None else cache
    per_n = np.zeros(top + 1)
    for n in range(1, top + 1):
        if n not in cache:
            cache[n] = _threshold_at(system, f, n, enum_max, samples, seed)
        per_n[n] = cache[n]
    # sup over n >= i
    tail = np.maximum.accumulate(per_n[::-1])[::-1]
    return tail[1:]


def _threshold_at(system, f, n, enum_max, samples, seed) -> float:
    vf = variation_bound(f, n)
    if system.is_affine:
        return vf
    if n <= enum_max:
        words = all_words(n, system.m)
    else:
        words = np.random.default_rng([seed, n]).integers(1, system.m + 1, size=(samples, n))
    vg = float(system.g_variation(words).max())
    gap = float(np.abs(system.lyapunov_proxies(words) - system.birkhoff_g(words)).max())
    return max(vf, vg, gap)


def _strictly_decreasing(values: np.ndarray) -> np.ndarray:
    v = np.maximum.accumulate(np.asarray(values, dtype=float)[::-1])[::-1]
    i = np.arange(1, len(v) + 1)
    out = v * (1.0 + 2.0 ** (-i))
    # past i ~ 53 the bump vanishes in rounding; break ties by one ulp
    for j in range(len(out) - 2, -1, -1):
        out[j] = max(out[j], np.nextafter(out[j + 1], np.inf))
    return out


# --- running statistics along sampled paths -------------------------------------

def _running_deviations(paths, nu, f, g, tg: Targets, system=None):
    """max of the three estimation deviations at every prefix length; shape (count, n).

    Prefix averages use complete windows only. Prefixes shorter than g's depth
    use the wrap rule with a table at their own length when ``system`` is given,
    and are inf otherwise.
    """
    count, n = paths.shape
    out = np.full((count, n), np.inf)
    lm = nu.running_log_masses(paths)
    lengths = np.arange(1, n + 1)
    dev_h = np.abs(-lm / lengths - tg.h)
    fv = f.window_values(paths, wrap=False)
    af = np.cumsum(fv, axis=1) / np.arange(1, fv.shape[1] + 1)[None, :, None]
    dev_f = np.linalg.norm(af - tg.beta, axis=2)
    gv = g.window_values(paths, wrap=False)[:, :, 0]
    ag = np.cumsum(gv, axis=1) / np.arange(1, gv.shape[1] + 1)
    dev_g = np.abs(ag - tg.lam)
    # window j covers symbols j..j+r-1, so average over windows < n-r+1 uses prefix n
    rf, rg = f.depth, g.depth
    L = np.arange(max(rf, rg), n + 1)
    out[:, L - 1] = np.maximum(np.maximum(dev_f[:, L - rf], dev_g[:, L - rg]), dev_h[:, L - 1])
    if system is not None:
        for ln in range(rf, min(rg, n + 1)):
            pre = paths[:, :ln]
            df = np.linalg.norm(birkhoff_averages(pre, f) - tg.beta, axis=1)
            dg = np.abs(birkhoff_averages(pre, _g_for_length(g, system, ln))[:, 0] - tg.lam)
            out[:, ln - 1] = np.maximum(np.maximum(df, dg), dev_h[:, ln - 1])
    return out


_SHORT_G: dict = {}


def _g_for_length(g: PotentialTable, system, n: int) -> PotentialTable:
    """g itself, or a table at depth n when words are shorter than g's depth."""
    if n >= g.depth:
        return g
    key = (id(system), n)
    if key not in _SHORT_G:
        _SHORT_G[key] = g_table(system, n)
    return _SHORT_G[key]


def _word_predicate(words, nu, f, g, tg: Targets, eps: float, exclude_constant: bool, system=None):
    """Estimation inequalities at the full word length (wrap rule for the averages)."""
    words = np.atleast_2d(words)
    n = words.shape[1]
    if n < f.depth:
        return np.zeros(len(words), dtype=bool)
    ok = np.linalg.norm(birkhoff_averages(words, f) - tg.beta, axis=1) < eps
    gn = _g_for_length(g, system, n) if system is not None else g
    ok &= np.abs(birkhoff_averages(words, gn)[:, 0] - tg.lam) < eps
    ok &= np.abs(-nu.log_cylinder_masses(words) / n - tg.h) < eps
    if exclude_constant:
        ok &= ~np.all(words == words[:, :1], axis=1)
    return ok


# --- schedules ---------------------------------------------------------------------

@dataclass
class Stage:
    index: int
    eps: float
    length: int
    reps: int
    measure: MarkovMeasure = field(repr=False)
    targets: Targets = field(repr=False)
    omega_mass: float
    ell: int = 0
    k: int = 0
    filler: tuple = ()

    def filler_word(self) -> np.ndarray:
        return np.concatenate([np.full(n, s, dtype=np.int64) for s, n in self.filler]) \
            if self.filler else np.zeros(0, dtype=np.int64)


@dataclass
class MoranSchedule:
    mode: str
    alpha: np.ndarray
    delta: float
    base: object = field(repr=False)  # MarkovMeasure or MixtureMeasure
    base_stats: Targets = field(repr=False)
    f: PotentialTable = field(repr=False)
    g: PotentialTable = field(repr=False)
    stages: list
    weights: np.ndarray | None = None
    vertex_symbols: tuple = ()
    info: dict = field(default_factory=dict)
    system: object = field(default=None, repr=False)

    @property
    def target_dimension(self) -> float:
        return max(self.base_stats.h, 0.0) / self.base_stats.lam if self.base_stats.lam > 0 else 0.0

    def stage_lengths(self) -> list[int]:
        return [st.length for st in self.stages]

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "alpha": [float(a) for a in self.alpha],
            "delta": self.delta,
            "base": {"h": self.base_stats.h, "lambda": self.base_stats.lam,
                     "beta": [float(b) for b in self.base_stats.beta], "order": int(self.base.k)},
            "target_dimension": self.target_dimension,
            "stages": [],
        }
        for st in self.stages:
            d = {"i": st.index, "eps": st.eps, "length": st.length, "reps": st.reps,
                 "omega_mass": st.omega_mass}
            if self.mode == "theorem1":
                d.update({"ell": st.ell, "nu_order": st.measure.k})
            else:
                d.update({"k": st.k, "filler": [[int(s), int(n)] for s, n in st.filler]})
            out["stages"].append(d)
        if self.weights is not None:
            out["weights"] = [float(r) for r in self.weights]
            out["vertex_symbols"] = [int(s) for s in self.vertex_symbols]
        return out


def _check_delta(delta):
    if not 0 < delta < 0.5:
        raise ScheduleError("delta must lie in (0, 1/2)")


def _pick_nu(mu, f, g, tg_mu: Targets, eps: float, max_order: int, cache: dict):
    """An ergodic measure meeting the control inequalities at eps."""
    if isinstance(mu, MarkovMeasure) and mu.is_ergodic():
        return mu
    lengths = []
    n = 4
    while n <= max_order:
        lengths.append(n)
        n *= 2
    for n in lengths:
        if n not in cache:
            cache[n] = ergodic_approximants(mu, lengths=[n])[0]
        nu = cache[n]
        t = _targets(nu, f, g)
        if (np.linalg.norm(t.beta - tg_mu.beta) < eps and abs(t.h - tg_mu.h) < eps
                and abs(t.lam - tg_mu.lam) < eps):
            return nu
    raise ScheduleError(f"no ergodic approximant of order <= {max_order} meets eps = {eps:.3g}")


def _smallest_block_length(nu, f, g, tg, eps, lower, delta, n_paths, rng, max_length):
    """Smallest n >= lower whose sampled violator mass is below delta/2."""
    cap = max(2 * lower, lower + 16)
    while True:
        dev = np.concatenate([_running_deviations(nu.sample_paths(cap, min(CHUNK, n_paths - j), rng),
                                                  nu, f, g, tg)
                              for j in range(0, n_paths, CHUNK)])
        frac = (dev >= eps).mean(axis=0)
        cand = np.flatnonzero(frac[lower - 1:] < delta / 2)
        if cand.size:
            return lower + int(cand[0])
        if cap >= max_length:
            raise ScheduleError(f"no block length <= {max_length} meets eps = {eps:.3g}")
        cap = min(2 * cap, max_length)


def _estimate_omega(nu, f, g, tg, eps, length, n_paths, rng, exclude_constant, system):
    words = nu.sample_paths(length, n_paths, rng)
    return float(_word_predicate(words, nu, f, g, tg, eps, exclude_constant, system).mean())


def build_schedule_thm1(system, f: PotentialTable, mu, alpha, delta: float = 0.1, stages: int = 3,
                        n_paths: int = DEFAULT_PATHS, seed: int = 0, c: float = 1.0,
                        alpha_tol: float = 1e-3, g_depth: int | None = None,
                        max_length: int = 2**14, max_order: int = 16) -> MoranSchedule:
    _check_delta(delta)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    rng = np.random.default_rng(seed)
    g = g_table(system, g_depth)
    st_mu = measure_stats(mu, system, f, 0) if isinstance(mu, MixtureMeasure) else None
    tg_mu = _targets(mu, f, g, h=None if st_mu is None else st_mu.entropy)
    if tg_mu.lam <= 0:
        raise ScheduleError("the base measure has non-positive Lyapunov exponent")
    if np.linalg.norm(tg_mu.beta - alpha) > alpha_tol:
        raise ScheduleError("the base measure does not integrate f to alpha")
    total = stages + 2
    var = analytic_thresholds(system, f, total, seed=seed)
    i = np.arange(1, total + 1)
    eps = np.maximum(_strictly_decreasing(var), c * 2.0 ** (-i))
    cache: dict = {}
    out, prev = [], 0
    for idx in range(total):
        e = float(eps[idx])
        nu = _pick_nu(mu, f, g, tg_mu, e, max_order, cache)
        tg = _targets(nu, f, g)
        ell = idx + 1
        const = np.arange(1, system.m + 1)[:, None]
        while True:
            words = np.repeat(const, ell, axis=1)
            if np.exp(nu.log_cylinder_masses(words)).sum() <= delta / 2:
                break
            ell += 1
            if ell > max_length:
                raise ScheduleError("constant cylinders keep too much mass")
        lower = max(ell, prev, idx + 1)
        length = _smallest_block_length(nu, f, g, tg, e, lower, delta, n_paths, rng, max_length)
        # the running scan uses complete windows; confirm with the word predicate
        while _estimate_omega(nu, f, g, tg, e, length, n_paths, rng, True, system) < 1 - delta:
            length += 1
        omega = _estimate_omega(nu, f, g, tg, e, length, n_paths, rng, True, system)
        out.append(Stage(idx + 1, e, length, 0, nu, tg, omega, ell=ell))
        prev = length
    for idx in range(stages):
        out[idx].reps = out[idx + 2].length
    return MoranSchedule("theorem1", alpha, delta, mu, tg_mu, f, g, out[:stages],
                         info={"lookahead": [s.length for s in out[stages:]]}, system=system)


def _vertex_symbols(system, f, vertices):
    syms = []
    for v in vertices:
        for i, _ in system.parabolic_points():
            if np.allclose(f.at((i,) * f.depth), v, atol=1e-12):
                syms.append(i)
                break
    return tuple(syms)


def _egorov_thresholds(mu, f, g, tg, stages, delta, n_paths, rng, horizon, system=None):
    """eps~_i: (1 - delta)-quantile over paths of sup_{i <= n <= horizon} deviation."""
    sups = []
    for j in range(0, n_paths, CHUNK):
        paths = mu.sample_paths(horizon, min(CHUNK, n_paths - j), rng)
        dev = _running_deviations(paths, mu, f, g, tg, system)
        tail = np.maximum.accumulate(dev[:, ::-1], axis=1)[:, ::-1]
        sups.append(tail[:, :stages])
    sups = np.concatenate(sups)
    return np.quantile(sups, 1 - delta, axis=0, method="higher")


def build_schedule_thm2(system, f: PotentialTable, mu: MarkovMeasure, alpha, delta: float = 0.1,
                        stages: int = 12, n_paths: int = DEFAULT_PATHS, seed: int = 0,
                        n_target: int | None = None, g_depth: int | None = None,
                        horizon: int | None = None) -> MoranSchedule:
    """Stage i: one admissible mu-word of length i, then parabolic runs of total length i k_i.

    With ``n_target`` the stage count grows until the stages cover that many symbols.
    """
    _check_delta(delta)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not system.parabolic_points():
        raise ScheduleError("no parabolic branches")
    A = parabolic_hull(system, f)
    if not A.contains(alpha, 1e-9):
        raise ScheduleError("alpha outside the parabolic hull")
    V, r = strict_convex_decomposition(A, alpha)
    syms = _vertex_symbols(system, f, V)
    if not (isinstance(mu, MarkovMeasure) and mu.is_ergodic()):
        raise ScheduleError("the base measure must be ergodic")
    rng = np.random.default_rng(seed)
    g = g_table(system, g_depth)
    tg = _targets(mu, f, g)
    if tg.lam <= 0:
        raise ScheduleError("the base measure has non-positive Lyapunov exponent")

    thr_cache: dict = {}

    def plan(S):
        H = horizon or max(4 * S, 64)
        var = analytic_thresholds(system, f, S, seed=seed + 1, cache=thr_cache)
        eg = _egorov_thresholds(mu, f, g, tg, S, delta, n_paths, np.random.default_rng(seed + 2), H,
                                system)
        eps = _strictly_decreasing(np.maximum(var, eg))
        ks, prev = [], 1
        for e in eps:
            kk = max(math.ceil(1.0 / r.min() - 1e-12), math.ceil(1.0 / math.sqrt(e) - 1e-12), prev)
            ks.append(kk)
            prev = kk
        return eps, ks

    eps, ks = plan(stages)
    if n_target is not None:
        while sum(i * (1 + k) for i, k in zip(range(1, stages + 1), ks)) < n_target:
            stages = int(stages * 1.5) + 1
            eps, ks = plan(stages)
    out = []
    for idx in range(stages):
        i = idx + 1
        kk = ks[idx]
        seg = [math.floor(rj * i * kk) for rj in r[:-1]]
        seg.append(i * kk - sum(seg))
        filler = tuple((int(s_), int(n_)) for s_, n_ in zip(syms, seg))
        omega = _estimate_omega(mu, f, g, tg, float(eps[idx]), i, min(n_paths, 4000), rng, False, system)
        out.append(Stage(i, float(eps[idx]), i, 1, mu, tg, omega, k=kk, filler=filler))
    return MoranSchedule("theorem2", alpha, delta, mu, tg, f, g, out, weights=r, vertex_symbols=syms,
                         system=system)


# --- invariant checks -----------------------------------------------------------------

def check_schedule(schedule: MoranSchedule, upto: int | None = None) -> dict:
    st = schedule.stages[: upto or len(schedule.stages)]
    eps = np.array([s.eps for s in st])
    checks = {"eps_strictly_decreasing": bool(np.all(np.diff(eps) < 0)),
              "omega_mass": bool(all(s.omega_mass >= 1 - schedule.delta for s in st))}
    if schedule.mode == "theorem1":
        L = [s.length for s in st]
        checks["lengths_nondecreasing"] = bool(all(b >= a for a, b in zip(L, L[1:])))
        checks["length_bounds"] = bool(all(s.length >= s.ell >= s.index for s in st))
        look = L + schedule.info.get("lookahead", [])
        checks["reps_lookahead"] = bool(all(s.reps == look[j + 2] for j, s in enumerate(st)))
        return checks
    r = schedule.weights
    k = np.array([s.k for s in st])
    checks["weights_strict"] = bool(np.all(r > 0) and abs(r.sum() - 1) < 1e-12)
    checks["k_min_r"] = bool(np.all(k * r.min() >= 1 - 1e-12))
    checks["k_sqrt_eps"] = bool(np.all(k >= 1 / np.sqrt(eps) - 1e-12))
    checks["k_nondecreasing"] = bool(np.all(np.diff(k) >= 0))
    # k is the larger of ceil(1/min r) and ceil(1/sqrt(eps))
    floor_k = math.ceil(1.0 / r.min() - 1e-12)
    checks["k_eps_bounded"] = bool(np.all(k * eps <= np.maximum(np.sqrt(eps) + eps, floor_k * eps) + 1e-12))
    checks["k_ratio_bounded"] = bool(np.all(k[1:] <= 2 * k[:-1]))
    checks["filler_lengths"] = bool(all(sum(n for _, n in s.filler) == s.index * s.k for s in st))
    frac = np.array([1.0 / (1 + s.k) for s in st])
    checks["mu_fraction_nonincreasing"] = bool(np.all(np.diff(frac) <= 1e-15))
    return checks


# --- sampling -------------------------------------------------------------------------------

@dataclass
class MoranSample:
    symbols: np.ndarray
    blocks: list  # (stage index, start, length, log nu_i[w])

    @property
    def word(self) -> tuple:
        return tuple(int(a) for a in self.symbols)


def _draw_admissible(stage: Stage, schedule: MoranSchedule, count: int, rng) -> np.ndarray:
    nu, out, have = stage.measure, [], 0
    excl = schedule.mode == "theorem1"
    batch = max(8, int(count / max(stage.omega_mass, 0.05) * 1.2) + 4)
    for _ in range(10_000):
        words = nu.sample_paths(stage.length, batch, rng)
        ok = _word_predicate(words, nu, schedule.f, schedule.g, stage.targets, stage.eps, excl,
                             schedule.system)
        out.append(words[ok])
        have += int(ok.sum())
        if have >= count:
            return np.concatenate(out)[:count]
    raise ScheduleError(f"rejection sampling failed at stage {stage.index}")


def sample_moran_blocks(schedule: MoranSchedule, n_prefix: int, rng_seed=0) -> MoranSample:
    rng = np.random.default_rng(rng_seed)
    parts, blocks, pos = [], [], 0
    j = 0
    while pos < n_prefix:
        stage = schedule.stages[min(j, len(schedule.stages) - 1)]
        j += 1
        if schedule.mode == "theorem1":
            need = min(stage.reps, math.ceil((n_prefix - pos) / stage.length))
            words = _draw_admissible(stage, schedule, need, rng)
            logs = stage.measure.log_cylinder_masses(words)
            for w, lm in zip(words, logs):
                blocks.append((stage.index, pos, stage.length, float(lm)))
                parts.append(w)
                pos += stage.length
        else:
            w = _draw_admissible(stage, schedule, 1, rng)
            lm = float(stage.measure.log_cylinder_masses(w)[0])
            blocks.append((stage.index, pos, stage.length, lm))
            parts.append(w[0])
            pos += stage.length
            fill = stage.filler_word()
            parts.append(fill)
            pos += len(fill)
    sym = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return MoranSample(sym, blocks)


def sample_moran(schedule: MoranSchedule, n_prefix: int, rng_seed=0) -> tuple:
    """A word of length >= n_prefix drawn from the concatenated measure."""
    if n_prefix <= 0:
        return ()
    return sample_moran_blocks(schedule, n_prefix, rng_seed).word


# --- verification -------------------------------------------------------------------------

def checkpoints(n_max: int) -> list[int]:
    return [max(1, n_max // 8), max(1, n_max // 4), max(1, n_max // 2), n_max]


@dataclass
class LevelReport:
    checkpoints: list
    deviations: np.ndarray  # (seeds, checkpoints): sup_{n' >= n} |A_n' f - alpha|
    monotone: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.deviations[:, -1]

    def fraction_below(self, thr: float) -> float:
        return float((self.final < thr).mean())


def _seed_list(seeds) -> list[int]:
    if isinstance(seeds, int):
        if seeds < 1:
            raise ValueError("need at least one seed")
        return list(range(seeds))
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    return seeds


def verify_level(schedule: MoranSchedule, f: PotentialTable | None, seeds, n_max: int,
                 samples: Sequence[MoranSample] | None = None) -> LevelReport:
    f = schedule.f if f is None else f
    seeds = _seed_list(seeds)
    if samples is None:
        samples = [sample_moran_blocks(schedule, n_max, s) for s in seeds]
    cps = checkpoints(n_max)
    devs = np.zeros((len(samples), len(cps)))
    for row, smp in enumerate(samples):
        path = smp.symbols[:n_max]
        vals = f.window_values(path[None, :])[0]
        run = np.cumsum(vals, axis=0) / np.arange(1, n_max + 1)[:, None]
        dev = np.linalg.norm(run - schedule.alpha, axis=1)
        tail = np.maximum.accumulate(dev[::-1])[::-1]
        devs[row] = [tail[c - 1] for c in cps]
    mono = np.all(np.diff(devs, axis=1) <= 1e-15, axis=1)
    return LevelReport(cps, devs, mono)


@dataclass
class Certificate:
    estimate: float
    target: float
    ratios: np.ndarray
    points: np.ndarray

    def passes(self, slack: float) -> bool:
        return self.estimate >= self.target - slack


def _log_mass_bound(schedule: MoranSchedule, smp: MoranSample, n: int) -> float:
    """Upper bound on log of the concatenated measure of the n-cylinder of the sample."""
    total, count = 0.0, 0
    for stage_idx, start, length, lm in smp.blocks:
        if start >= n:
            break
        count += 1
        if start + length <= n:
            total += lm
        else:
            stage = schedule.stages[stage_idx - 1]
            part = smp.symbols[start:n]
            total += float(stage.measure.log_cylinder_masses(part[None, :])[0])
    return total - count * math.log(1 - schedule.delta)


def local_dimension_certificate(schedule: MoranSchedule, system, f, seeds, n_max: int,
                                samples: Sequence[MoranSample] | None = None) -> Certificate:
    """Median over seeds of log(mass of the n_max-cylinder) / log(its diameter)."""
    seeds = _seed_list(seeds)
    if samples is None:
        samples = [sample_moran_blocks(schedule, n_max, s) for s in seeds]
    words = np.array([smp.symbols[:n_max] for smp in samples])
    logd = system.log_diameters(words)
    lo, hi = system.cylinders(words)
    pts = 0.5 * (lo + hi)
    ratios = np.array([_log_mass_bound(schedule, smp, n_max) / ld for smp, ld in zip(samples, logd)])
    return Certificate(float(np.median(ratios)), schedule.target_dimension, ratios, pts)
