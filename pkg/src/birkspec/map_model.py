"""Piecewise expanding interval maps through their inverse branches.

A :class:`BranchSystem` stores, for every branch ``i``, the forward map
``T`` on ``I_i`` and its derivative.  Inverse branches are closed form for
affine pieces and otherwise solved by bracketed Newton/bisection, so every
evaluation stays inside ``I_i``.

All geometric quantities are computed from the inside out: the cylinder
``I_w = T_{w_1} o ... o T_{w_n} [0, 1]`` is built by applying ``T_{w_n}``
first and ``T_{w_1}`` last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .symbolic import PotentialTable, all_words, is_constant_word, make_word

INVERSE_TOL = 1e-14
INVERSE_MAX_ITER = 200
# below this width cylinders are tracked by centre and log-width
NARROW_WIDTH = 1e-9


class BranchEvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Branch:
    left: float
    right: float
    forward: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    fixed_point: float
    increasing: bool = True
    affine: bool = False
    closed_inverse: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def parabolic(self) -> bool:
        return bool(abs(abs(float(self.derivative(np.array([self.fixed_point]))[0])) - 1.0) < 1e-12)

    def inverse(self, y, label: str = "") -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.closed_inverse is not None:
            return self.closed_inverse(y)
        return _bracketed_inverse(self, y, label)

    def log_inverse_slope(self, y) -> np.ndarray:
        """log |(T_i)'(y)| = -log |T'(T_i y)|."""
        return -np.log(np.abs(self.derivative(self.inverse(y))))


def _bracketed_inverse(br: Branch, y: np.ndarray, label: str) -> np.ndarray:
    a, b = br.left, br.right
    shape = y.shape
    y = y.ravel()
    t = y if br.increasing else 1.0 - y
    x = a + (b - a) * t
    lo = np.full_like(y, a)
    hi = np.full_like(y, b)
    sign = 1.0 if br.increasing else -1.0
    for _ in range(INVERSE_MAX_ITER):
        fx = br.forward(x) - y
        below = sign * fx < 0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        dfx = br.derivative(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / dfx
        inside = (xn >= lo) & (xn <= hi)
        xn = np.where(inside, xn, 0.5 * (lo + hi))
        step = np.abs(xn - x)
        x = xn
        if np.all((step <= 1e-16 + 1e-15 * np.abs(x)) | (hi - lo <= 1e-16)):
            return x.reshape(shape)
    if np.all(hi - lo <= INVERSE_TOL):
        return x.reshape(shape)
    raise BranchEvaluationError(f"inverse branch {label} did not converge in {INVERSE_MAX_ITER} iterations")


def _affine_branch(a: float, b: float) -> Branch:
    slope = b - a
    if not 0 < slope < 1:
        raise ValueError(f"affine branch [{a}, {b}] must have length in (0, 1)")
    return Branch(
        left=a,
        right=b,
        forward=lambda x: (np.asarray(x) - a) / slope,
        derivative=lambda x: np.full(np.shape(x), 1.0 / slope),
        fixed_point=a / (1.0 - slope),
        affine=True,
        closed_inverse=lambda y: a + slope * np.asarray(y),
    )


def _mp_left_branch(gamma: float) -> Branch:
    c = 2.0**gamma
    return Branch(
        left=0.0,
        right=0.5,
        forward=lambda x: x * (1.0 + c * np.power(np.abs(x), gamma)),
        derivative=lambda x: 1.0 + (1.0 + gamma) * c * np.power(np.abs(x), gamma),
        fixed_point=0.0,
    )


def _mirrored_branch(br: Branch) -> Branch:
    """x -> 1 - T(1 - x): moves a parabolic point at 0 to 1."""
    return Branch(
        left=1.0 - br.right,
        right=1.0 - br.left,
        forward=lambda x: 1.0 - br.forward(1.0 - np.asarray(x)),
        derivative=lambda x: br.derivative(1.0 - np.asarray(x)),
        fixed_point=1.0 - br.fixed_point,
        closed_inverse=lambda y: 1.0 - br.inverse(1.0 - np.asarray(y)),
    )


def _polynomial_branch(a: float, b: float, coeffs: Sequence[float]) -> Branch:
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dpoly = poly.deriv()
    ends = poly(np.array([a, b]))
    increasing = bool(ends[1] > ends[0])
    if not np.allclose(np.sort(ends), [0.0, 1.0], atol=1e-9):
        raise ValueError(f"branch on [{a}, {b}] does not map onto [0, 1]")
    grid = np.linspace(a, b, 513)
    slopes = np.abs(dpoly(grid))
    if np.any(slopes < 1.0 - 1e-12):
        raise ValueError(f"branch on [{a}, {b}] has |T'| < 1")
    # T(x) - x changes sign exactly once on [a, b]
    h = lambda x: poly(x) - x
    lo, hi = a, b
    if h(lo) > 0:
        lo, hi = hi, lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return Branch(
        left=a,
        right=b,
        forward=lambda x: poly(np.asarray(x, dtype=float)),
        derivative=lambda x: dpoly(np.asarray(x, dtype=float)),
        fixed_point=0.5 * (lo + hi),
        increasing=increasing,
    )


@dataclass(frozen=True)
class CylinderInterval:
    word: tuple[int, ...]
    left: float
    right: float

    @property
    def diameter(self) -> float:
        return self.right - self.left

    def contains(self, other: "CylinderInterval", slack: float = 0.0) -> bool:
        return self.left - slack <= other.left and other.right <= self.right + slack


@dataclass(frozen=True)
class BranchSystem:
    branches: tuple[Branch, ...]
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.branches) < 2:
            raise ValueError("need at least two branches")
        for prev, nxt in zip(self.branches, self.branches[1:]):
            if nxt.left < prev.right - 1e-12:
                raise ValueError("branch intervals must be ordered and non-overlapping")

    # --- constructors -------------------------------------------------
    @classmethod
    def linear(cls, intervals: Sequence[Sequence[float]]) -> "BranchSystem":
        brs = tuple(_affine_branch(float(a), float(b)) for a, b in intervals)
        return cls(brs, "linear", {"intervals": [[float(a), float(b)] for a, b in intervals]})

    @classmethod
    def linear_lengths(cls, lengths: Sequence[float]) -> "BranchSystem":
        """Affine branches of the given lengths, first flush left, last flush right."""
        lengths = [float(x) for x in lengths]
        m = len(lengths)
        gap = (1.0 - sum(lengths)) / (m - 1)
        if gap < -1e-12:
            raise ValueError("branch lengths sum to more than 1")
        pos, ivs = 0.0, []
        for ln in lengths:
            ivs.append((pos, pos + ln))
            pos += ln + gap
        ivs[-1] = (1.0 - lengths[-1], 1.0)
        return cls.linear(ivs)

    @classmethod
    def doubling(cls) -> "BranchSystem":
        return cls.linear([(0.0, 0.5), (0.5, 1.0)])

    @classmethod
    def manneville_pomeau(cls, gamma: float) -> "BranchSystem":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        brs = (_mp_left_branch(gamma), _affine_branch(0.5, 1.0))
        return cls(brs, "manneville_pomeau", {"gamma": float(gamma)})

    @classmethod
    def double_parabolic(cls, gamma: float) -> "BranchSystem":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        left = _mp_left_branch(gamma)
        return cls((left, _mirrored_branch(left)), "double_parabolic", {"gamma": float(gamma)})

    @classmethod
    def custom(cls, branches: Sequence[dict]) -> "BranchSystem":
        """Branches given as ``{"interval": [a, b], "coeffs": [c0, c1, ...]}``."""
        brs = tuple(_polynomial_branch(*map(float, b["interval"]), b["coeffs"]) for b in branches)
        return cls(brs, "custom", {"branches": [dict(b) for b in branches]})

    # --- basic facts --------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.branches)

    @property
    def is_affine(self) -> bool:
        return all(b.affine for b in self.branches)

    @property
    def full_interval(self) -> bool:
        """Branch intervals tile [0, 1] without gaps."""
        if abs(self.branches[0].left) > 1e-12 or abs(self.branches[-1].right - 1) > 1e-12:
            return False
        return all(abs(p.right - n.left) < 1e-12 for p, n in zip(self.branches, self.branches[1:]))

    def parabolic_points(self) -> list[tuple[int, float]]:
        return [(i + 1, b.fixed_point) for i, b in enumerate(self.branches) if b.parabolic]

    def fixed_points(self) -> list[float]:
        return [b.fixed_point for b in self.branches]

    def is_boundary_coding(self, w: Sequence[int]) -> bool:
        """True for a constant block of 1 or m: repeating it gives u1^inf or um^inf."""
        return is_constant_word(w) and w[0] in (1, self.m)

    # --- vectorised geometry -------------------------------------------
    def _apply(self, sym: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.empty_like(y)
        for i, br in enumerate(self.branches):
            mask = sym == i + 1
            if mask.any():
                out[mask] = br.inverse(y[mask], label=str(i + 1))
        return out

    def _apply_with_log_slope(self, sym, y):
        out = np.empty_like(y)
        ls = np.empty_like(y)
        for i, br in enumerate(self.branches):
            mask = sym == i + 1
            if mask.any():
                x = br.inverse(y[mask], label=str(i + 1))
                out[mask] = x
                ls[mask] = -np.log(np.abs(br.derivative(x)))
        return out, ls

    def cylinders(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Left and right endpoints of I_w for each row of ``words``."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        lo = np.zeros(words.shape[0])
        hi = np.ones(words.shape[0])
        for j in range(words.shape[1] - 1, -1, -1):
            a = self._apply(words[:, j], lo)
            b = self._apply(words[:, j], hi)
            lo, hi = np.minimum(a, b), np.maximum(a, b)
        return lo, hi

    def log_diameters(self, words: np.ndarray) -> np.ndarray:
        """log diam I_w, stable for cylinders far below floating-point resolution."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        if self.is_affine:
            logs = np.log([b.right - b.left for b in self.branches])
            return logs[words - 1].sum(axis=1)
        count, n = words.shape
        lo = np.zeros(count)
        hi = np.ones(count)
        centre = np.full(count, 0.5)
        logw = np.zeros(count)
        narrow = np.zeros(count, dtype=bool)
        for j in range(n - 1, -1, -1):
            sym = words[:, j]
            old = narrow.copy()
            if old.any():
                c, ls = self._apply_with_log_slope(sym[old], centre[old])
                centre[old] = c
                logw[old] += ls
            wide = ~old
            if wide.any():
                a = self._apply(sym[wide], lo[wide])
                b = self._apply(sym[wide], hi[wide])
                lo[wide], hi[wide] = np.minimum(a, b), np.maximum(a, b)
                width = hi[wide] - lo[wide]
                logw[wide] = np.log(width)
                centre[wide] = 0.5 * (lo[wide] + hi[wide])
                narrow[wide] = width < NARROW_WIDTH
        return logw

    def periodic_points(self, words: np.ndarray) -> np.ndarray:
        """Pi(w^inf) for each row: the fixed point of T_{w_1} o ... o T_{w_n}."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        count, n = words.shape
        out = np.empty(count)
        const = np.all(words == words[:, :1], axis=1)
        fps = np.array(self.fixed_points())
        out[const] = fps[words[const, 0] - 1]
        rest = ~const
        if rest.any():
            out[rest] = self._composed_fixed_points(words[rest])
        return out

    def _composed_fixed_points(self, words):
        lo, hi = self.cylinders(words)
        x = 0.5 * (lo + hi)
        for _ in range(100):
            y = x.copy()
            dlog = np.zeros_like(x)
            for j in range(words.shape[1] - 1, -1, -1):
                y, ls = self._apply_with_log_slope(words[:, j], y)
                dlog += ls
            h = x - y
            lo = np.where(h < 0, x, lo)
            hi = np.where(h < 0, hi, x)
            dphi = np.exp(dlog)
            # orientation of T_w: sign of the composed derivative
            xn = x - h / (1.0 - _composed_sign(self, words) * dphi)
            inside = (xn >= lo) & (xn <= hi)
            xn = np.where(inside, xn, 0.5 * (lo + hi))
            step = np.abs(xn - x)
            x = xn
            if np.all(step <= 1e-16 + 1e-15 * np.abs(x)):
                break
        return x

    def orbit_log_derivatives(self, words: np.ndarray) -> np.ndarray:
        """log|T'| along the periodic orbit of w^inf; shape (count, n).

        Column j is log|T'(T^j x)| with x = Pi(w^inf).
        """
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        count, n = words.shape
        z = self.periodic_points(words)
        out = np.empty((count, n))
        for j in range(n - 1, -1, -1):
            z, ls = self._apply_with_log_slope(words[:, j], z)
            out[:, j] = -ls
        return out

    def g_values(self, words: np.ndarray) -> np.ndarray:
        """g at the periodic point of each word: log|T'(Pi(w^inf))|."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        x = self.periodic_points(words)
        out = np.empty(len(x))
        for i, br in enumerate(self.branches):
            mask = words[:, 0] == i + 1
            if mask.any():
                out[mask] = np.log(np.abs(br.derivative(x[mask])))
        return np.maximum(out, 0.0)

    def edge_log_ratios(self, words: np.ndarray) -> np.ndarray:
        """log(diam I_{sigma w} / diam I_w): a locally constant version of g."""
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return self.log_diameters(words[:, 1:]) - self.log_diameters(words)

    # --- scalar API ------------------------------------------------------
    def cylinder(self, w: Sequence[int], precision: float = 1e-12) -> CylinderInterval:
        if precision <= 0:
            raise ValueError("precision must be positive")
        w = make_word(w, self.m)
        if not w:
            return CylinderInterval(w, 0.0, 1.0)
        lo, hi = self.cylinders(np.array([w]))
        return CylinderInterval(w, float(lo[0]), float(hi[0]))

    def project(self, w: Sequence[int], precision: float = 1e-12, periodic: bool = True) -> float:
        """Pi of w^inf, or with ``periodic=False`` a point of I_w (needs diam I_w < precision)."""
        w = make_word(w, self.m)
        if not w:
            raise ValueError("cannot project the empty word")
        if periodic:
            return float(self.periodic_points(np.array([w]))[0])
        logd = float(self.log_diameters(np.array([w]))[0])
        if logd > np.log(precision):
            raise ValueError(f"cylinder of length {len(w)} has diameter {np.exp(logd):.3g} > precision")
        lo, hi = self.cylinders(np.array([w]))
        return float(0.5 * (lo[0] + hi[0]))

    def g_value(self, w: Sequence[int], precision: float = 1e-12) -> float:
        w = make_word(w, self.m)
        if not w:
            raise ValueError("g needs a word of length >= 1")
        return float(self.g_values(np.array([w]))[0])

    def lyapunov_proxy(self, w: Sequence[int]) -> float:
        """-log diam(I_w) / n."""
        w = make_word(w, self.m)
        if not w:
            raise ValueError("n must be >= 1")
        return float(-self.log_diameters(np.array([w]))[0] / len(w))

    def lyapunov_proxies(self, words: np.ndarray) -> np.ndarray:
        words = np.atleast_2d(words)
        return -self.log_diameters(words) / words.shape[1]

    def birkhoff_g(self, words: np.ndarray) -> np.ndarray:
        """A_n g along the periodic orbit of each word."""
        return self.orbit_log_derivatives(words).mean(axis=1)

    def g_variation(self, words: np.ndarray) -> np.ndarray:
        """Bound on the spread of A_n g over each cylinder [w].

        Points of [w] put sigma^j into I_{w_{j+1}...w_n}; the spread of
        log|T'| over that interval is read off at its endpoints.
        """
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        count, n = words.shape
        if self.is_affine:
            return np.zeros(count)
        lo = np.zeros(count)
        hi = np.ones(count)
        total = np.zeros(count)
        for j in range(n - 1, -1, -1):
            a = self._apply(words[:, j], lo)
            b = self._apply(words[:, j], hi)
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            for i, br in enumerate(self.branches):
                mask = words[:, j] == i + 1
                if mask.any() and not br.affine:
                    total[mask] += np.abs(np.log(np.abs(br.derivative(hi[mask])))
                                          - np.log(np.abs(br.derivative(lo[mask]))))
        return total / n

    def lemma2_gap(self, n: int, sample=None) -> float:
        """max over the sample of |lambda_tilde_n(w) - A_n g(w)|; full enumeration by default."""
        words = all_words(n, self.m) if sample is None else np.atleast_2d(np.asarray(sample))
        if words.shape[1] != n:
            raise ValueError("sample words must have length n")
        gaps = np.abs(self.lyapunov_proxies(words) - self.birkhoff_g(words))
        return float(gaps.max())


def _composed_sign(system: BranchSystem, words: np.ndarray) -> np.ndarray:
    dec = np.array([not b.increasing for b in system.branches])
    flips = dec[words - 1].sum(axis=1) % 2
    return np.where(flips == 1, -1.0, 1.0)


# --- analytic potentials ------------------------------------------------

ANALYTIC_IDS = ("coordinate", "digit_indicator", "affine")


def _source_components(system: BranchSystem, spec: dict, words: np.ndarray, points: np.ndarray,
                       lo: np.ndarray, hi: np.ndarray):
    kind = spec.get("id")
    if kind == "coordinate":
        return points[:, None], (hi - lo)[:, None]
    if kind == "digit_indicator":
        j = int(spec["j"])
        if not 1 <= j <= system.m:
            raise ValueError(f"digit_indicator symbol {j} outside 1..{system.m}")
        return (words[:, 0] == j).astype(float)[:, None], np.zeros((len(points), 1))
    if kind == "affine":
        a = np.atleast_1d(np.asarray(spec["a"], dtype=float))
        b = np.atleast_1d(np.asarray(spec.get("b", np.zeros_like(a)), dtype=float))
        if a.shape != b.shape:
            raise ValueError("affine potential needs a and b of equal length")
        return points[:, None] * a + b, (hi - lo)[:, None] * np.abs(a)
    raise ValueError(f"unknown analytic potential id {kind!r}")


def discretize_analytic(system: BranchSystem, source, depth: int, d: int | None = None) -> PotentialTable:
    """Tabulate F o Pi at depth r using the periodic representative Pi(w^inf).

    ``source`` is one spec dict or a list of them; their components are
    stacked.  The table records the largest oscillation of F over a depth-r
    cylinder as ``discretization_bound``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    specs = [source] if isinstance(source, dict) else list(source)
    words = all_words(depth, system.m)
    points = system.periodic_points(words)
    lo, hi = system.cylinders(words)
    cols, oscs = [], []
    for spec in specs:
        v, o = _source_components(system, spec, words, points, lo, hi)
        cols.append(v)
        oscs.append(o)
    values = np.concatenate(cols, axis=1)
    if d is not None and values.shape[1] != d:
        raise ValueError(f"potential has dimension {values.shape[1]}, expected {d}")
    osc = np.linalg.norm(np.concatenate(oscs, axis=1), axis=1).max()
    tag = "+".join(s["id"] for s in specs)
    return PotentialTable(system.m, depth, values, source=tag, discretization_bound=float(osc))


def build_system(spec: dict) -> BranchSystem:
    """Construct a system from a config dict ``{"family": ..., ...params}``."""
    fam = spec.get("family")
    if fam == "doubling":
        return BranchSystem.doubling()
    if fam == "linear":
        if "intervals" in spec:
            return BranchSystem.linear(spec["intervals"])
        return BranchSystem.linear_lengths(spec["lengths"])
    if fam == "manneville_pomeau":
        return BranchSystem.manneville_pomeau(float(spec["gamma"]))
    if fam == "double_parabolic":
        return BranchSystem.double_parabolic(float(spec["gamma"]))
    if fam == "custom":
        return BranchSystem.custom(spec["branches"])
    raise ValueError(f"unknown map family {fam!r}")
