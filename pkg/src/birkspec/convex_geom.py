"""Polytopes in intrinsic coordinates: rotation sets, the parabolic hull,
relative interiors, strict convex decompositions and surrounding simplices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .symbolic import BudgetExceeded, PotentialTable

RANK_TOL = 1e-9
MAX_DIM = 6


class OutsideHull(ValueError):
    pass


@dataclass(frozen=True)
class Polytope:
    """Convex hull of finitely many points of R^d.

    ``basis`` has orthonormal rows spanning aff(C) - origin; ``equations``
    holds facets ``a . y + b <= 0`` in intrinsic coordinates y with unit
    normals.
    """

    vertices: np.ndarray
    origin: np.ndarray
    basis: np.ndarray
    equations: np.ndarray = field(repr=False)
    ambient_dim: int = 1

    @classmethod
    def empty(cls, d: int) -> "Polytope":
        return cls(np.zeros((0, d)), np.zeros(d), np.zeros((0, d)), np.zeros((0, 1)), d)

    @classmethod
    def from_points(cls, points, tol: float = RANK_TOL) -> "Polytope":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            d = pts.shape[1] if pts.ndim == 2 and pts.shape[1] else 1
            return cls.empty(d)
        d = pts.shape[1]
        if d > MAX_DIM:
            raise BudgetExceeded(f"potential dimension {d} exceeds the supported {MAX_DIM}")
        origin = pts.mean(axis=0)
        centred = pts - origin
        _, sv, vt = np.linalg.svd(centred, full_matrices=False)
        scale = max(1.0, float(np.abs(pts).max()))
        rank = int((sv > tol * scale).sum())
        basis = vt[:rank]
        y = centred @ basis.T
        if rank == 0:
            verts = origin[None, :]
            eqs = np.zeros((0, 1))
        elif rank == 1:
            lo, hi = int(np.argmin(y[:, 0])), int(np.argmax(y[:, 0]))
            verts = pts[[lo, hi]]
            eqs = np.array([[1.0, -y[hi, 0]], [-1.0, y[lo, 0]]])
        else:
            hull = ConvexHull(y)
            verts = pts[np.sort(hull.vertices)]
            eqs = _dedupe_facets(hull.equations)
        return cls(verts, origin, basis, eqs, d)

    # --- basic facts ------------------------------------------------------
    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def dim(self) -> int:
        """Intrinsic dimension l (-1 for the empty set)."""
        return -1 if self.is_empty else self.basis.shape[0]

    def intrinsic(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.origin) @ self.basis.T

    def ambient(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.origin + y @ self.basis

    def affine_distance(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        back = self.ambient(self.intrinsic(x))[0]
        return float(np.linalg.norm(x - back))

    def facet_slack(self, x) -> np.ndarray:
        """Signed facet values a.y + b at x (all <= 0 inside)."""
        if len(self.equations) == 0:
            return np.zeros(0)
        y = self.intrinsic(x)[0]
        return self.equations[:, :-1] @ y + self.equations[:, -1]

    def contains(self, x, tol: float = 1e-9) -> bool:
        if self.is_empty:
            return False
        if self.affine_distance(x) > tol:
            return False
        slack = self.facet_slack(x)
        return bool(slack.size == 0 or slack.max() <= tol)

    def includes(self, other: "Polytope", tol: float = 1e-9) -> bool:
        return all(self.contains(v, tol) for v in other.vertices)

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "origin": self.origin.tolist(),
            "basis": self.basis.tolist(),
            "intrinsic_dim": self.dim,
        }


def _dedupe_facets(eqs: np.ndarray) -> np.ndarray:
    # qhull triangulates facets; merge coplanar pieces
    out = []
    for e in eqs:
        if not any(np.allclose(e, o, atol=1e-10) for o in out):
            out.append(e)
    return np.array(out)


# --- the sets ------------------------------------------------------------

def parabolic_hull(system, f: PotentialTable) -> Polytope:
    """Convex hull of f at the parabolic fixed points (as constant words i^r)."""
    pts = [f.at((i,) * f.depth) for i, _ in system.parabolic_points()]
    if not pts:
        return Polytope.empty(f.dim)
    return Polytope.from_points(np.array(pts))


def edge_values(f: PotentialTable, k: int) -> np.ndarray:
    """f on each (k+1)-word (edge of the order-k graph), from its first r symbols."""
    if f.depth > k + 1:
        raise ValueError(f"order {k} is too small for a depth-{f.depth} potential")
    e = f.m ** (k + 1)
    return f.values[np.arange(e) // f.m ** (k + 1 - f.depth)]


def forbidden_run_mask(m: int, k: int, runs) -> np.ndarray:
    """Boolean mask over (k+1)-words; False where the word contains i^L for a (i, L) in runs."""
    from .symbolic import all_words

    words = all_words(k + 1, m)
    ok = np.ones(len(words), dtype=bool)
    for i, L in runs:
        if L > k + 1:
            raise ValueError(f"run length {L} needs order >= {L - 1}")
        hit = words == i
        run = np.zeros(len(words), dtype=np.int64)
        best = np.zeros(len(words), dtype=np.int64)
        for j in range(k + 1):
            run = np.where(hit[:, j], run + 1, 0)
            best = np.maximum(best, run)
        ok &= best < L
    return ok


def support_graph(m: int, k: int, mask=None):
    """Edges of the order-k graph restricted to its largest strongly connected piece.

    Returns (edge ids, state ids).
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n = m**k
    e = np.arange(m ** (k + 1))
    if mask is not None:
        e = e[np.asarray(mask, dtype=bool)]
    if len(e) == 0:
        return e, np.zeros(0, dtype=np.int64)
    src, tgt = e // m, e % n
    g = csr_matrix((np.ones(len(e)), (src, tgt)), shape=(n, n))
    _, labels = connected_components(g, directed=True, connection="strong")
    # a class qualifies only if it carries a cycle
    inner = labels[src] == labels[tgt]
    if not inner.any():
        return e[:0], np.zeros(0, dtype=np.int64)
    sizes = np.bincount(labels[src[inner]], minlength=labels.max() + 1)
    best = int(np.argmax(sizes))
    keep = inner & (labels[src] == best)
    return e[keep], np.flatnonzero(labels == best)


def _cycle_points(fe, edges, m, k, length_cap, max_cycles):
    n = m**k
    G = nx.DiGraph()
    G.add_edges_from((int(x // m), int(x % n), {"e": int(x)}) for x in edges)
    pts = []
    for cyc in nx.simple_cycles(G, length_bound=length_cap):
        ids = [G[u][v]["e"] for u, v in zip(cyc, cyc[1:] + cyc[:1])]
        pts.append(fe[ids].mean(axis=0))
        if len(pts) >= max_cycles:
            break
    return pts


def _flow_lp(c, fe, edges, m, k):
    """Vertex of the occupation polytope maximising c . integral(f)."""
    from scipy.sparse import coo_matrix, vstack

    n = m**k
    ne = len(edges)
    src, tgt = edges // m, edges % n
    cols = np.arange(ne)
    balance = coo_matrix((np.ones(ne), (src, cols)), shape=(n, ne)) - coo_matrix(
        (np.ones(ne), (tgt, cols)), shape=(n, ne))
    A = vstack([balance, coo_matrix(np.ones((1, ne)))]).tocsr()
    b = np.zeros(n + 1)
    b[-1] = 1.0
    res = linprog(-(fe @ c), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return res.x @ fe


def rotation_set(system, f: PotentialTable, k: int, mask=None, cycle_length_cap: int | None = None,
                 max_cycles: int = 20000, directions: int = 64, seed: int = 0,
                 cap: int = 2**22) -> Polytope:
    """Inner approximation of L_f by order-k invariant measures.

    Vertices come from occupation-polytope LP maximisers along the
    coordinate axes and seeded random directions, together with simple
    cycles of the order-k graph (length <= 2k) when d > 1.  For d = 1 the
    two axis maximisers are the exact endpoints.
    """
    m = f.m
    if m ** (k + 1) > cap:
        raise BudgetExceeded(f"order {k} needs {m}**{k + 1} edges (cap {cap})")
    fe = edge_values(f, k)
    edges, _ = support_graph(m, k, mask)
    if len(edges) == 0:
        return Polytope.empty(f.dim)
    d = f.dim
    lcap = 2 * k if cycle_length_cap is None else cycle_length_cap
    pts = _cycle_points(fe, edges, m, k, max(lcap, 1), max_cycles) if d > 1 else []
    rng = np.random.default_rng(seed)
    dirs = [v for j in range(d) for v in (np.eye(d)[j], -np.eye(d)[j])]
    if d > 1:
        dirs += list(rng.normal(size=(directions, d)))
    for c in dirs:
        p = _flow_lp(np.asarray(c), fe[edges], edges, m, k)
        if p is not None:
            pts.append(p)
    return Polytope.from_points(np.array(pts))


def relative_interior_contains(P: Polytope, alpha, tol: float = 1e-6) -> bool:
    """alpha in aff(P) within tol and B(alpha, tol) intersected with aff(P) inside P."""
    if P.is_empty:
        raise ValueError("relative interior of an empty polytope")
    if P.affine_distance(alpha) > tol:
        return False
    slack = P.facet_slack(alpha)
    return bool(slack.size == 0 or slack.max() <= -tol)


def minimal_face(P: Polytope, alpha, tol: float = 1e-9) -> np.ndarray:
    """Indices of the vertices on the smallest face of P containing alpha."""
    slack = P.facet_slack(alpha)
    tight = np.flatnonzero(slack >= -tol)
    if tight.size == 0:
        return np.arange(len(P.vertices))
    vy = P.intrinsic(P.vertices)
    vs = vy @ P.equations[tight, :-1].T + P.equations[tight, -1]
    return np.flatnonzero(np.all(vs >= -1e-7 * max(1.0, np.abs(vy).max()), axis=1))


def strict_convex_decomposition(P: Polytope, alpha, tol: float = 1e-9):
    """Vertices V' of the minimal face at alpha and analytic-centre weights r > 0.

    Returns (V', r) with sum r = 1 and r @ V' = alpha.
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if P.is_empty or not P.contains(alpha, tol):
        raise OutsideHull("alpha outside hull")
    idx = minimal_face(P, alpha, tol)
    V = P.vertices[idx]
    if len(V) == 1:
        return V, np.ones(1)
    A = np.vstack([P.intrinsic(V).T, np.ones(len(V))])
    b = np.concatenate([P.intrinsic(alpha)[0], [1.0]])
    r = _strictly_positive_point(A, b)
    r = _analytic_centre(A, r)
    return V, r


def _strictly_positive_point(A, b):
    # maximise t subject to A r = b, r >= t
    nv = A.shape[1]
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((A.shape[0], 1))])
    A_ub = np.hstack([-np.eye(nv), np.ones((nv, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(nv), A_eq=A_eq, b_eq=b,
                  bounds=[(0, None)] * nv + [(None, 1.0)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise OutsideHull("alpha outside hull")
    return res.x[:nv]


def _analytic_centre(A, r, iters: int = 100):
    """Maximise sum(log r) on {A r = A r0} by damped Newton in the null space."""
    N = null_space(A)
    if N.shape[1] == 0:
        return r
    for _ in range(iters):
        grad = N.T @ (1.0 / r)
        H = N.T @ (N / r[:, None] ** 2)
        dz = np.linalg.solve(H, grad)
        dr = N @ dz
        dec = float(grad @ dz)
        if dec < 1e-24:
            break
        t = 1.0
        while np.any(r + t * dr <= 0):
            t *= 0.5
        obj = np.log(r).sum()
        while np.log(r + t * dr).sum() < obj + 0.25 * t * dec and t > 1e-12:
            t *= 0.5
        r = r + t * dr
    return r


@dataclass(frozen=True)
class SimplexSplit:
    vertices: np.ndarray  # (l+1, d)
    pieces: tuple  # each (l+1, d): alpha together with all vertices but one
    centre: np.ndarray


def _regular_simplex(l: int) -> np.ndarray:
    """l+1 unit vectors in R^l forming a regular simplex centred at 0."""
    E = np.eye(l + 1) - 1.0 / (l + 1)
    _, _, vt = np.linalg.svd(E)
    X = E @ vt[:l].T
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def surrounding_simplex(P: Polytope, alpha, margin: float) -> SimplexSplit:
    """Regular simplex of circumradius ``margin`` around alpha inside ri(P)."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if P.is_empty or P.dim < 1:
        raise ValueError("no simplex of positive dimension fits in this polytope")
    if not relative_interior_contains(P, alpha, margin):
        raise ValueError("alpha is not in the relative interior at this margin")
    y0 = P.intrinsic(alpha)[0]
    verts = P.ambient(y0 + margin * _regular_simplex(P.dim))
    pieces = tuple(np.vstack([alpha[None, :], np.delete(verts, i, axis=0)]) for i in range(len(verts)))
    return SimplexSplit(verts, pieces, alpha)
