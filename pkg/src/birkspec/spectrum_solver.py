"""Birkhoff spectrum D(alpha) = sup{h/lambda : integral f = alpha} at finite order.

The order-k model works on (k+1)-words (edges of the de Bruijn graph on
k-words).  An edge carries f from its first r symbols and the locally
constant geometric weight g_e = log(diam I_{sigma e} / diam I_e); along a
path the g_e telescope to -log D_n, and for maps whose branches tile [0, 1]
the Bowen root of the model is exactly 1.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .convex_geom import (
    Polytope,
    edge_values,
    forbidden_run_mask,
    parabolic_hull,
    relative_interior_contains,
    rotation_set,
    support_graph,
    surrounding_simplex,
)
from .measures import MarkovMeasure
from .symbolic import DEFAULT_CYLINDER_CAP, BudgetExceeded, PotentialTable, all_words, birkhoff_averages

log = logging.getLogger(__name__)

DENSE_LIMIT = 64
POWER_TOL = 1e-12
DIMENSION_CAP = 1.0
BOUNDARY_EPS = 1e-12


class PressureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    k: int = 1
    tol: float = 1e-6
    q_cap: float = 1e3
    feasibility_tol: float = 1e-7
    max_outer: int = 60
    edge_cap: int = 2**22
    hypothesis_tol: float = 0.05
    runs: tuple | None = None  # forbidden-run lengths for the parabolic sweep


# --- the finite-order transfer model -----------------------------------------

class TransferModel:
    """Edge data of the order-k graph, restricted to its main strongly connected piece."""

    def __init__(self, system, f: PotentialTable, k: int, mask=None, edge_cap: int = 2**22):
        if k < f.depth:
            raise ValueError(f"order k={k} is below the potential depth {f.depth}")
        m = f.m
        if m != system.m:
            raise ValueError("potential alphabet does not match the map")
        if m ** (k + 1) > edge_cap:
            raise BudgetExceeded(f"order {k} needs {m}**{k + 1} edges (cap {edge_cap})")
        self.system, self.f, self.k, self.m = system, f, k, m
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        edges, states = support_graph(m, k, self.mask)
        if len(edges) == 0:
            raise PressureError("the order-k graph has no cycle under this mask")
        self.edges = edges
        self.states = states
        remap = -np.ones(m**k, dtype=np.int64)
        remap[states] = np.arange(len(states))
        self.src = remap[edges // m]
        self.tgt = remap[edges % m**k]
        self.ns = len(states)
        self.fe = edge_values(f, k)[edges]
        words = all_words(k + 1, m)[edges]
        self.ge = system.edge_log_ratios(words)
        self._warm = None

    @property
    def d(self) -> int:
        return self.fe.shape[1]

    def log_weights(self, q, s) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return self.fe @ q - s * self.ge

    def _perron(self, lw):
        shift = lw.max()
        w = np.exp(lw - shift)
        ns = self.ns
        if ns <= DENSE_LIMIT:
            M = np.zeros((ns, ns))
            np.add.at(M, (self.src, self.tgt), w)
            vals, vl, vr = _eig_lr(M)
            i = int(np.argmax(vals.real))
            rho = float(vals[i].real)
            left = np.abs(vl[:, i].real)
            right = np.abs(vr[:, i].real)
        else:
            rho, left, right = self._sparse_perron(w)
        if not np.isfinite(rho) or rho <= 0:
            raise PressureError("Perron value did not converge; the support may be reducible")
        return rho, left, right, w, shift

    def _sparse_perron(self, w):
        """ARPACK for the eigenvalue of largest real part (the Perron root), warm-started."""
        from scipy.sparse import csr_matrix
        from scipy.sparse.linalg import ArpackNoConvergence, eigs

        ns = self.ns
        M = csr_matrix((w, (self.src, self.tgt)), shape=(ns, ns))
        left0, right0 = (None, None) if self._warm is None else self._warm
        try:
            vr_val, vr = eigs(M, k=1, which="LR", v0=right0, tol=1e-14, maxiter=5000)
            vl_val, vl = eigs(M.T.tocsr(), k=1, which="LR", v0=left0, tol=1e-14, maxiter=5000)
        except ArpackNoConvergence:
            return self._power(w)
        right = np.abs(vr[:, 0].real)
        left = np.abs(vl[:, 0].real)
        rho = float(vr_val[0].real)
        if right.min() <= 0 or left.min() <= 0 or abs(vl_val[0].real - rho) > 1e-9 * rho:
            return self._power(w)
        right /= right.sum()
        left /= left.sum()
        self._warm = (left, right)
        return rho, left, right

    def _power(self, w):
        ns = self.ns
        left, right = (np.ones(ns), np.ones(ns)) if self._warm is None else self._warm
        rho = 0.0
        for it in range(20000):
            r2 = np.bincount(self.src, weights=w * right[self.tgt], minlength=ns)
            l2 = np.bincount(self.tgt, weights=w * left[self.src], minlength=ns)
            if it % 2 == 1:  # damp possible periodicity
                r2 = 0.5 * (r2 + right * rho)
                l2 = 0.5 * (l2 + left * rho)
            new_rho = float(r2.sum() / right.sum())
            r2 /= r2.sum()
            l2 /= l2.sum()
            done = abs(new_rho - rho) <= POWER_TOL * new_rho and np.abs(r2 - right).max() < 1e-13
            right, left, rho = r2, l2, new_rho
            if done and it > 2:
                break
        else:
            raise PressureError("power iteration did not converge; repair the support")
        right_eig = np.bincount(self.src, weights=w * right[self.tgt], minlength=ns)
        rho = float(right_eig.sum() / right.sum())
        self._warm = (left, right)
        return rho, left, right

    def evaluate(self, q, s) -> "PressureEvaluation":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        lw = self.log_weights(q, s)
        rho, left, right, w, shift = self._perron(lw)
        flow = left[self.src] * w * right[self.tgt]
        flow /= flow.sum()
        value = float(np.log(rho) + shift)
        avg = flow @ self.fe
        lam = float(flow @ self.ge)
        logp = lw - value + np.log(right[self.tgt]) - np.log(right[self.src])
        h = float(-(flow * logp).sum())
        return PressureEvaluation(q, float(s), self.k, value, avg, -lam, flow, h, lam, self)

    def edge_flow_full(self, flow) -> np.ndarray:
        x = np.zeros(self.m ** (self.k + 1))
        x[self.edges] = flow
        return x

    def measure(self, flow, label="") -> MarkovMeasure:
        return MarkovMeasure.from_edge_flow(self.edge_flow_full(flow), self.m, self.k, label=label)

    def flow_stats(self, flow):
        flow = np.clip(flow, 0.0, None)
        flow = flow / flow.sum()
        out = np.bincount(self.src, weights=flow, minlength=self.ns)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(flow > 0, flow * np.log(flow / out[self.src]), 0.0)
        return float(-terms.sum()), float(flow @ self.ge), flow @ self.fe


def _eig_lr(M):
    from scipy.linalg import eig

    vals, vl, vr = eig(M, left=True, right=True)
    return vals, vl, vr


@dataclass
class PressureEvaluation:
    q: np.ndarray
    s: float
    k: int
    value: float
    grad_q: np.ndarray
    d_s: float
    flow: np.ndarray = field(repr=False)
    entropy: float = 0.0
    lyapunov: float = 0.0
    model: TransferModel | None = field(default=None, repr=False)

    @property
    def gibbs(self) -> MarkovMeasure:
        return self.model.measure(self.flow, label="gibbs")


def pressure(system, f, k, q, s, mask=None) -> PressureEvaluation:
    return TransferModel(system, f, k, mask).evaluate(q, s)


# --- results -------------------------------------------------------------------

STATUSES = ("interior_solved", "boundary_fallback", "in_A", "infeasible")


@dataclass
class SpectrumPoint:
    alpha: np.ndarray
    D: float
    status: str
    s_star: float = float("nan")
    q_star: np.ndarray | None = None
    measure: MarkovMeasure | None = field(default=None, repr=False)
    h: float = float("nan")
    lam: float = float("nan")
    average: np.ndarray | None = None
    gap: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in np.atleast_1d(x)]

        return {
            "alpha": arr(self.alpha),
            "D": float(self.D),
            "status": self.status,
            "s_star": _num(self.s_star),
            "q_star": arr(self.q_star),
            "h": _num(self.h),
            "lambda": _num(self.lam),
            "average": arr(self.average),
            "gap": _num(self.gap),
            "extras": _jsonable(self.extras),
        }


def _num(x):
    x = float(x)
    return None if not np.isfinite(x) else x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# --- Bowen root -----------------------------------------------------------------

def _bowen_root(model: TransferModel, s_max: float = 5.0, tol: float = 1e-10) -> float:
    zero = np.zeros(model.d)
    p0 = model.evaluate(zero, 0.0).value
    if p0 <= 0:
        return 0.0
    if model.evaluate(zero, s_max).value >= 0:
        raise PressureError(f"no sign change of the pressure in [0, {s_max}]")
    lo, hi = 0.0, s_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if model.evaluate(zero, mid).value > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bowen_dimension(system, k: int, mask=None, s_max: float = 5.0, capped: bool = True,
                    f: PotentialTable | None = None) -> float:
    """Root of s -> P(-s g) at order k, capped at 1."""
    if f is None:
        f = PotentialTable.constant(system.m, 0.0)
    root = _bowen_root(TransferModel(system, f, k, mask), s_max)
    return min(root, DIMENSION_CAP) if capped else root


# --- dual solver ------------------------------------------------------------------

class _Escape(Exception):
    pass


def _inner(model: TransferModel, B: np.ndarray, alpha: np.ndarray, s: float, z0, tol, q_cap):
    """min_z P(B^T z, s) - <B^T z, alpha>; returns (z, value, evaluation)."""
    cache = {}

    def fun(z):
        q = B.T @ z
        if np.linalg.norm(q) > q_cap:
            raise _Escape()
        ev = model.evaluate(q, s)
        cache["ev"] = ev
        return ev.value - q @ alpha, B @ (ev.grad_q - alpha)

    if B.shape[0] == 0:
        ev = model.evaluate(np.zeros(model.d), s)
        return np.zeros(0), ev.value, ev
    res = minimize(fun, z0, jac=True, method="BFGS", options={"gtol": tol / 10, "maxiter": 500})
    val, grad = fun(res.x)
    if np.abs(grad).max() > tol:
        # BFGS stalls on flat directions; polish with a few Newton-free restarts
        res = minimize(fun, res.x, jac=True, method="L-BFGS-B",
                       options={"gtol": tol / 10, "ftol": 1e-15, "maxiter": 2000})
        val, grad = fun(res.x)
    return res.x, val, cache["ev"]


def dual_dimension(system, f: PotentialTable, alpha, k: int, tol: float = 1e-6, q_cap: float = 1e3,
                   mask=None, model: TransferModel | None = None, rot: Polytope | None = None,
                   fallback: bool = True, feasibility_tol: float = 1e-7) -> SpectrumPoint:
    """sup{s : inf_q P(q, s) - <q, alpha> >= 0} by safeguarded Dinkelbach steps on s."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    model = model or TransferModel(system, f, k, mask)
    rot = rot if rot is not None else rotation_set(system, f, k, mask=model.mask)
    if rot.is_empty or not rot.contains(alpha, feasibility_tol):
        return SpectrumPoint(alpha, 0.0, "infeasible")
    interior = relative_interior_contains(rot, alpha, feasibility_tol) if rot.dim > 0 else True
    if not interior:
        return _fallback(system, f, alpha, k, tol, model, "alpha on the relative boundary") if fallback \
            else SpectrumPoint(alpha, 0.0, "boundary_fallback")
    B = rot.basis
    s_top = min(_bowen_root(model), DIMENSION_CAP)
    z = np.zeros(B.shape[0])
    lo, hi = 0.0, s_top
    s = 0.0
    try:
        best = None
        for _ in range(60):
            z, val, ev = _inner(model, B, alpha, s, z, tol, q_cap)
            h, lam = ev.entropy, ev.lyapunov
            if val >= -tol * max(lam, 1e-12):
                lo = max(lo, s)
                best = (s, z, val, ev)
            else:
                hi = min(hi, s)
            if lam <= 0:
                break
            s_new = h / lam
            if s_new >= s_top:
                z_t, val_t, ev_t = _inner(model, B, alpha, s_top, z, tol, q_cap)
                if val_t >= -tol * max(ev_t.lyapunov, 1e-12):
                    best = (s_top, z_t, val_t, ev_t)
                    break
                s_new = 0.5 * (max(lo, s) + s_top)
            if not lo - 1e-15 <= s_new <= hi + 1e-15:
                s_new = 0.5 * (lo + hi)
            if abs(s_new - s) <= tol / 10 or hi - lo <= tol / 10:
                s = s_new
                z, val, ev = _inner(model, B, alpha, s, z, tol, q_cap)
                best = (s, z, val, ev)
                break
            s = s_new
    except _Escape:
        if fallback:
            return _fallback(system, f, alpha, k, tol, model, "multiplier escape")
        return SpectrumPoint(alpha, 0.0, "boundary_fallback")
    s, z, val, ev = best
    q = B.T @ z
    D = min(max(ev.entropy / ev.lyapunov, 0.0), s_top) if ev.lyapunov > 0 else 0.0
    if s >= s_top:
        D = s_top
    return SpectrumPoint(alpha, D, "interior_solved", s_star=s, q_star=q, measure=ev.gibbs,
                         h=ev.entropy, lam=ev.lyapunov, average=ev.grad_q, gap=abs(val),
                         extras={"inner_value": val, "bowen": s_top})


def _fallback(system, f, alpha, k, tol, model, reason):
    log.info("dual solver falls back to the primal (%s)", reason)
    pt = primal_dimension(system, f, alpha, k, tol, model=model)
    pt.status = "infeasible" if pt.status == "infeasible" else "boundary_fallback"
    pt.extras["reason"] = reason
    return pt


# --- primal solver -----------------------------------------------------------------

class _PrimalProblem:
    def __init__(self, model: TransferModel, alpha):
        import cvxpy as cp
        from scipy.sparse import coo_matrix

        ne, ns = len(model.edges), model.ns
        cols = np.arange(ne)
        self.S = coo_matrix((np.ones(ne), (cols, model.src)), shape=(ne, ns)).tocsr() @ \
            coo_matrix((np.ones(ne), (model.src, cols)), shape=(ns, ne)).tocsr()
        balance = coo_matrix((np.ones(ne), (model.src, cols)), shape=(ns, ne)) - coo_matrix(
            (np.ones(ne), (model.tgt, cols)), shape=(ns, ne))
        self.x = cp.Variable(ne, nonneg=True)
        self.s = cp.Parameter(nonneg=True)
        out = self.S @ self.x
        ent = -cp.sum(cp.rel_entr(self.x, out))
        cons = [balance.tocsr() @ self.x == 0, cp.sum(self.x) == 1,
                model.fe.T @ self.x == np.asarray(alpha, dtype=float)]
        self.prob = cp.Problem(cp.Maximize(ent - self.s * (model.ge @ self.x)), cons)
        self.model = model

    def solve(self, s):
        import cvxpy as cp

        self.s.value = float(s)
        try:
            self.prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            self.prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
        if self.prob.status not in ("optimal", "optimal_inaccurate"):
            return None, float("-inf")
        return np.clip(self.x.value, 0.0, None), float(self.prob.value)


def primal_dimension(system, f: PotentialTable, alpha, k: int, tol: float = 1e-6, mask=None,
                     model: TransferModel | None = None, max_iter: int = 2000) -> SpectrumPoint:
    """Dinkelbach on s of F(s) = max{h - s lambda : occupation flow x, x . f = alpha}.

    Each F(s) is a concave program over edge occupation variables; the flow
    entropy is sum of -rel_entr(x_e, outflow of its source).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    model = model or TransferModel(system, f, k, mask)
    prob = _PrimalProblem(model, alpha)
    s_top = min(_bowen_root(model), DIMENSION_CAP)
    s = 0.0
    x, F = prob.solve(s)
    if x is None:
        return SpectrumPoint(alpha, 0.0, "infeasible")
    for _ in range(min(max_iter, 100)):
        h, lam, _ = model.flow_stats(x)
        if lam <= 0:
            break
        s_new = min(h / lam, s_top)
        if s_new <= s + tol / 10:
            break
        s = s_new
        x_new, F = prob.solve(s)
        if x_new is None:
            break
        x = x_new
    h, lam, avg = model.flow_stats(x)
    D = min(h / lam, s_top) if lam > 0 else 0.0
    _, F_at = prob.solve(D)
    g_min = float(model.ge.min())
    gap = max(F_at, 0.0) / (g_min if g_min > 0 else max(lam, 1e-12))
    return SpectrumPoint(alpha, D, "interior_solved", s_star=D, measure=model.measure(x, "primal"),
                         h=h, lam=lam, average=avg, gap=gap, extras={"F_at_root": F_at, "bowen": s_top})


# --- parabolic dichotomy ---------------------------------------------------------------

def default_runs(k: int) -> list[int]:
    runs, L = [], 1
    while L <= k + 1:
        runs.append(L)
        L *= 2
    return runs


def theorem2_dimension(system, f: PotentialTable, alpha, k: int, tol: float = 1e-6,
                       runs: Sequence[int] | None = None, q_cap: float = 1e3,
                       hypothesis_tol: float = 0.05) -> SpectrumPoint:
    """Flat value on the parabolic hull, otherwise the best subsystem value.

    Subsystems forbid runs i^L of every parabolic symbol i; the sweep over L
    is reported in ``extras['sweep']`` together with the unrestricted order-k
    value.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    A = parabolic_hull(system, f)
    full = TransferModel(system, f, k)
    bowen = min(_bowen_root(full), DIMENSION_CAP)
    if not A.is_empty and A.contains(alpha, max(tol, 1e-9)):
        return SpectrumPoint(alpha, bowen, "in_A", s_star=bowen, extras={"bowen": bowen})
    par = [i for i, _ in system.parabolic_points()]
    if not par:
        return dual_dimension(system, f, alpha, k, tol, q_cap, model=full)
    runs = default_runs(k) if runs is None else list(runs)
    sweep = []
    best = None
    for L in runs:
        mask = forbidden_run_mask(system.m, k, [(i, L) for i in par])
        try:
            model = TransferModel(system, f, k, mask)
        except PressureError:
            sweep.append({"L": L, "D": 0.0, "status": "infeasible"})
            continue
        pt = dual_dimension(system, f, alpha, k, tol, q_cap, model=model)
        sweep.append({"L": L, "D": pt.D, "status": pt.status})
        if pt.status != "infeasible" and (best is None or pt.D > best.D):
            best = pt
    pt = dual_dimension(system, f, alpha, k, tol, q_cap, model=full)
    sweep.append({"L": None, "D": pt.D, "status": pt.status})
    if pt.status != "infeasible" and (best is None or pt.D > best.D):
        best = pt
    values = [e["D"] for e in sweep[:-1]]
    monotone = all(b >= a - 1e-6 for a, b in zip(values, values[1:]))
    # advisory: the best uniformly hyperbolic piece should nearly reach dim of the attractor
    try:
        widest = TransferModel(system, f, k, forbidden_run_mask(system.m, k, [(i, runs[-1]) for i in par]))
        sub_bowen = _bowen_root(widest)
    except PressureError:
        sub_bowen = 0.0
    if best is None:
        best = SpectrumPoint(alpha, 0.0, "infeasible")
    best.extras.update({"sweep": sweep, "monotone_in_L": monotone, "bowen": bowen,
                        "subsystem_bowen": sub_bowen,
                        "hypothesis_ok": bool(sub_bowen >= bowen - hypothesis_tol)})
    return best


# --- cylinder covers ----------------------------------------------------------------------

@dataclass
class LevelCover:
    words: np.ndarray
    root: float
    empty: bool

    @property
    def count(self) -> int:
        return len(self.words)


def level_cover(system, f: PotentialTable, alpha, n: int, radius: float,
                cap: int = DEFAULT_CYLINDER_CAP, tol: float = 1e-10) -> LevelCover:
    """Length-n words with |A_n f - alpha| < radius and the root of sum D_n(w)^s = 1."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    words = all_words(n, system.m, cap)
    avg = birkhoff_averages(words, f)
    # words exactly on the sphere stay out despite rounding in the average
    keep = np.linalg.norm(avg - alpha, axis=1) < radius - BOUNDARY_EPS
    words = words[keep]
    if len(words) == 0:
        return LevelCover(words, 0.0, True)
    logd = system.log_diameters(words)
    if len(words) == 1:
        return LevelCover(words, 0.0, False)

    def phi(sv):
        return logsumexp(sv * logd)

    hi = 1.0
    while phi(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise RuntimeError("cover root bracket failed")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    return LevelCover(words, 0.5 * (lo + hi), False)


# --- grids and continuity -------------------------------------------------------------------

def spectrum_grid(system, f: PotentialTable, alphas, k: int, tol: float = 1e-6, threads: int = 1,
                  runs=None, q_cap: float = 1e3) -> list[SpectrumPoint]:
    alphas = [np.atleast_1d(np.asarray(a, dtype=float)) for a in alphas]
    rot = rotation_set(system, f, k)

    def one(a):
        if not rot.contains(a, 1e-7):
            return SpectrumPoint(a, 0.0, "infeasible")
        return theorem2_dimension(system, f, a, k, tol, runs=runs, q_cap=q_cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, alphas))
    return [one(a) for a in alphas]


def continuity_scan(system, f: PotentialTable, alpha, k: int, radii: Sequence[float],
                    tol: float = 1e-6) -> list[dict]:
    """max |D(vertex) - D(alpha)| over regular simplices of shrinking radius around alpha."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    rot = rotation_set(system, f, k)
    if rot.dim < 1:
        raise ValueError("no relative interior of positive dimension")
    A = parabolic_hull(system, f)
    if not A.is_empty and A.contains(alpha, 1e-9):
        raise ValueError("alpha lies in the parabolic hull")
    model = TransferModel(system, f, k)
    centre = dual_dimension(system, f, alpha, k, tol, model=model, rot=rot).D
    out = []
    for r in radii:
        simplex = surrounding_simplex(rot, alpha, r)
        vals = [dual_dimension(system, f, v, k, tol, model=model, rot=rot).D for v in simplex.vertices]
        out.append({"radius": float(r), "D_alpha": centre, "vertex_D": vals,
                    "oscillation": float(max(abs(v - centre) for v in vals))})
    return out
