"""Order-k Markov measures on the full shift and their thermodynamic statistics.

A state is a word of length k, stored by its base-m index.  Appending symbol a
to state u moves to ``(u * m + a) % m**k``; ``P[u, a]`` is the probability of
that step.  All logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .symbolic import (
    DEFAULT_CYLINDER_CAP,
    BudgetExceeded,
    PotentialTable,
    all_words,
    make_word,
    word_index,
)

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10
DENSE_STATES = 2048


class NotErgodic(ValueError):
    pass


def _xlogx(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def _stationary(P: np.ndarray, m: int, k: int, guess=None) -> np.ndarray:
    n_states = m**k
    if n_states <= DENSE_STATES:
        Q = np.zeros((n_states, n_states))
        src = np.repeat(np.arange(n_states), m)
        tgt = (src * m + np.tile(np.arange(m), n_states)) % n_states
        np.add.at(Q, (src, tgt), P.ravel())
        # least-squares solve of pi (Q - I) = 0 with sum(pi) = 1
        A = np.vstack([Q.T - np.eye(n_states), np.ones(n_states)])
        b = np.zeros(n_states + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()
    # lazy power iteration; a nearly stationary guess makes this quick
    pi = np.full(n_states, 1.0 / n_states) if guess is None else np.asarray(guess, float).copy()
    pi /= pi.sum()
    for _ in range(20000):
        new = 0.5 * (pi + _push(pi, P, m, n_states))
        if np.abs(new - pi).sum() < 1e-14:
            return new / new.sum()
        pi = new
    return pi / pi.sum()


def _push(pi, P, m, n_states):
    """One step of the chain applied to a distribution over states."""
    mass = (pi[:, None] * P).ravel()  # edge e = u*m + a, target e % n_states
    return mass.reshape(m, n_states).sum(axis=0)


@dataclass(frozen=True)
class MarkovMeasure:
    """Stationary order-k Markov measure.

    ``P`` has shape (m**k, m); ``pi`` may be supplied (needed when the chain
    is reducible and the stationary law is not unique).
    """

    m: int
    k: int
    P: np.ndarray
    pi: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape != (self.m**self.k, self.m):
            raise ValueError(f"transition array must have shape {(self.m ** self.k, self.m)}")
        if np.any(P < -ROW_TOL):
            raise ValueError("negative transition probability")
        P = np.clip(P, 0.0, None)
        rows = P.sum(axis=1)
        if np.any(np.abs(rows - 1) > 1e-9):
            raise ValueError("transition rows must sum to 1")
        P = P / rows[:, None]
        pi = _stationary(P, self.m, self.k) if self.pi is None else np.array(self.pi, dtype=float)
        pi = np.clip(pi, 0.0, None)
        pi = pi / pi.sum()
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    # --- constructors ---------------------------------------------------
    @classmethod
    def bernoulli(cls, p: Sequence[float]) -> "MarkovMeasure":
        p = np.asarray(p, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("Bernoulli weights must be a probability vector")
        return cls(len(p), 1, p[None, :].repeat(len(p), axis=0), pi=p, label="bernoulli")

    @classmethod
    def uniform(cls, m: int, k: int = 1) -> "MarkovMeasure":
        return cls(m, k, np.full((m**k, m), 1.0 / m), pi=np.full(m**k, 1.0 / m**k), label="uniform")

    @classmethod
    def periodic(cls, word: Sequence[int], m: int) -> "MarkovMeasure":
        """Uniform measure on the orbit of ``word^inf``, as an order-len(word) chain."""
        word = make_word(word, m)
        n = len(word)
        # order n always determines the next symbol along the orbit
        k = n
        nxt = np.full((m**k, m), 1.0 / m)
        pi = np.zeros(m**k)
        for j in range(n):
            state = word[j:] + word[:j]
            idx = word_index(state, m)
            row = np.zeros(m)
            row[word[j] - 1] = 1.0
            nxt[idx] = row
            pi[idx] += 1.0 / n
        return cls(m, k, nxt, pi=pi, label="periodic")

    @classmethod
    def from_edge_flow(cls, x: np.ndarray, m: int, k: int, label: str = "") -> "MarkovMeasure":
        """Measure from an edge occupation vector over (k+1)-words."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, None).reshape(m**k, m)
        out = x.sum(axis=1)
        P = np.full_like(x, 1.0 / m)
        pos = out > 0
        P[pos] = x[pos] / out[pos, None]
        return cls(m, k, P, pi=out / out.sum(), label=label)

    # --- structure ------------------------------------------------------
    @property
    def n_states(self) -> int:
        return self.m**self.k

    def _successors(self) -> np.ndarray:
        u = np.arange(self.n_states)[:, None]
        return (u * self.m + np.arange(self.m)[None, :]) % self.n_states

    def is_ergodic(self) -> bool:
        """The support of pi lies in one closed strongly connected class of P."""
        live = self.pi > 1e-300
        succ = self._successors()
        rows, cols = np.nonzero(self.P > 0)
        tgt = succ[rows, cols]
        g = csr_matrix((np.ones(len(rows)), (rows, tgt)), shape=(self.n_states, self.n_states))
        _, labels = connected_components(g, directed=True, connection="strong")
        cls = np.unique(labels[live])
        if len(cls) != 1:
            return False
        inside = labels == cls[0]
        return not np.any(inside[rows] & ~inside[tgt])

    def lift(self, k: int) -> "MarkovMeasure":
        """The same measure written as an order-k chain (k >= self.k)."""
        if k < self.k:
            raise ValueError("cannot lower the order")
        if k == self.k:
            return self
        pi = self.marginal(k)
        low = np.arange(self.m**k) % self.n_states
        return MarkovMeasure(self.m, k, self.P[low], pi=pi, label=self.label)

    # --- masses ---------------------------------------------------------
    def marginal(self, n: int, cap: int = DEFAULT_CYLINDER_CAP) -> np.ndarray:
        """mu[w] for every word of length n, in index order."""
        if self.m**n > cap:
            raise BudgetExceeded(f"{self.m}**{n} cylinders exceed the enumeration cap of {cap}")
        if n <= self.k:
            return self.pi.reshape(self.m**n, -1).sum(axis=1)
        q = self.pi
        for length in range(self.k, n):
            state = np.arange(self.m**length) % self.n_states
            q = (q[:, None] * self.P[state]).ravel()
        return q

    def log_cylinder_masses(self, words: np.ndarray) -> np.ndarray:
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        count, n = words.shape
        if n < self.k:
            with np.errstate(divide="ignore"):
                return np.log(self.marginal(n)[_indices(words, self.m)])
        with np.errstate(divide="ignore"):
            logp = np.log(self.P)
            out = np.log(self.pi[_indices(words[:, : self.k], self.m)])
        state = _indices(words[:, : self.k], self.m)
        for j in range(self.k, n):
            a = words[:, j] - 1
            out = out + logp[state, a]
            state = (state * self.m + a) % self.n_states
        return out

    def running_log_masses(self, paths: np.ndarray) -> np.ndarray:
        """log mu[omega|_n] for n = 1..len along each row; shape (count, n)."""
        paths = np.atleast_2d(np.asarray(paths, dtype=np.int64))
        count, n = paths.shape
        out = np.empty((count, n))
        with np.errstate(divide="ignore"):
            for j in range(min(self.k, n)):
                out[:, j] = np.log(self.marginal(j + 1)[_indices(paths[:, : j + 1], self.m)])
            if n <= self.k:
                return out
            logp = np.log(self.P)
        state = _indices(paths[:, : self.k], self.m)
        acc = out[:, self.k - 1].copy()
        for j in range(self.k, n):
            a = paths[:, j] - 1
            acc = acc + logp[state, a]
            out[:, j] = acc
            state = (state * self.m + a) % self.n_states
        return out

    # --- sampling -------------------------------------------------------
    def sample_paths(self, n: int, count: int, rng, start: int | None = None) -> np.ndarray:
        """``count`` independent length-n paths as a (count, n) array."""
        rng = np.random.default_rng(rng)
        out = np.empty((count, n), dtype=np.int64)
        if n == 0:
            return out
        if start is None:
            state = rng.choice(self.n_states, size=count, p=self.pi)
        else:
            state = np.full(count, int(start))
        first = np.empty((count, self.k), dtype=np.int64)
        s = state.copy()
        for j in range(self.k - 1, -1, -1):
            s, first[:, j] = np.divmod(s, self.m)
        ncopy = min(n, self.k)
        out[:, :ncopy] = first[:, :ncopy] + 1
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        for j in range(self.k, n):
            u = rng.random(count)
            a = (u[:, None] >= cum[state]).sum(axis=1)
            a = np.minimum(a, self.m - 1)
            out[:, j] = a + 1
            state = (state * self.m + a) % self.n_states
        return out


def _indices(words: np.ndarray, m: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64)
    idx = np.zeros(words.shape[0], dtype=np.int64)
    for j in range(words.shape[1]):
        idx = idx * m + (words[:, j] - 1)
    return idx


@dataclass(frozen=True)
class MixtureMeasure:
    """Explicit convex combination of Markov measures; entropy stays affine."""

    components: tuple
    weights: tuple
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.components) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("mixture weights must be a probability vector matching the components")
        ms = {c.m for c in self.components}
        if len(ms) != 1:
            raise ValueError("components must share the alphabet")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "_w", w)

    @property
    def m(self) -> int:
        return self.components[0].m

    @property
    def k(self) -> int:
        return max(c.k for c in self.components)

    def is_ergodic(self) -> bool:
        return False

    def marginal(self, n: int, cap: int = DEFAULT_CYLINDER_CAP) -> np.ndarray:
        return sum(t * c.marginal(n, cap) for t, c in zip(self._w, self.components))

    def log_cylinder_masses(self, words):
        with np.errstate(divide="ignore"):
            parts = np.array([np.exp(c.log_cylinder_masses(words)) for c in self.components])
            return np.log(self._w @ parts)

    def sample_paths(self, n, count, rng, start=None):
        raise NotErgodic("cannot sample a path from a non-ergodic mixture")


def mixture(measures: Sequence, weights: Sequence[float]) -> MixtureMeasure:
    return MixtureMeasure(tuple(measures), tuple(weights))


# --- statistics ------------------------------------------------------------

@dataclass(frozen=True)
class MeasureStats:
    entropy: float
    lyapunov: float
    potential_average: np.ndarray
    quad_depth: int
    error_bound: float

    @property
    def dimension(self) -> float:
        return self.entropy / self.lyapunov if self.lyapunov > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "h": self.entropy,
            "lambda": self.lyapunov,
            "potential_average": [float(v) for v in np.atleast_1d(self.potential_average)],
            "quad_depth": self.quad_depth,
            "error_bound": self.error_bound,
        }


def entropy_rate(mu) -> float:
    if isinstance(mu, MixtureMeasure):
        return float(sum(t * entropy_rate(c) for t, c in zip(mu.weights, mu.components)))
    h = -float(mu.pi @ _xlogx(mu.P).sum(axis=1))
    return max(h, 0.0)


def cylinder_mass(mu, w: Sequence[int]) -> float:
    w = make_word(w, mu.m)
    if not w:
        return 1.0
    return float(np.exp(mu.log_cylinder_masses(np.array([w]))[0]))


def sample_path(mu, n: int, rng_seed=0, start: Sequence[int] | None = None) -> tuple[int, ...]:
    """One path of length n; ``start`` pins the initial k-block."""
    if isinstance(mu, MixtureMeasure) or not mu.is_ergodic():
        raise NotErgodic("sample_path needs an ergodic measure (strongly connected support)")
    st = None if start is None else word_index(make_word(start, mu.m), mu.m)
    return tuple(int(a) for a in mu.sample_paths(n, 1, rng_seed, start=st)[0])


def _g_oscillation(system, words: np.ndarray) -> float:
    """Largest spread of log|T'| over the cylinders I_w (endpoints and representative)."""
    lo, hi = system.cylinders(words)
    rep = system.periodic_points(words)
    spread = 0.0
    for i, br in enumerate(system.branches):
        mask = words[:, 0] == i + 1
        if not mask.any() or br.affine:
            continue
        vals = np.log(np.abs(np.stack([br.derivative(lo[mask]), br.derivative(hi[mask]),
                                       br.derivative(rep[mask])])))
        spread = max(spread, float((vals.max(axis=0) - vals.min(axis=0)).max()))
    return spread


def measure_stats(mu, system, f: PotentialTable, quad_depth: int = 0,
                  cap: int = DEFAULT_CYLINDER_CAP) -> MeasureStats:
    """Entropy, Lyapunov exponent and potential average of mu.

    The exponent is a quadrature of g over the (k + quad_depth)-cylinders at
    their periodic representatives.  The potential average is exact at depth
    >= r.  ``error_bound`` adds the spread of g over those cylinders to the
    table's discretization bound.
    """
    if isinstance(mu, MixtureMeasure):
        parts = [measure_stats(c, system, f, quad_depth, cap) for c in mu.components]
        w = mu.weights
        return MeasureStats(
            sum(t * p.entropy for t, p in zip(w, parts)),
            sum(t * p.lyapunov for t, p in zip(w, parts)),
            sum(t * p.potential_average for t, p in zip(w, parts)),
            quad_depth,
            max(p.error_bound for p in parts),
        )
    if quad_depth < 0:
        raise ValueError("quad_depth must be >= 0")
    depth = mu.k + quad_depth
    if mu.m**depth > cap:
        raise BudgetExceeded(f"{mu.m}**{depth} cylinders exceed the enumeration cap of {cap}")
    words = all_words(depth, mu.m, cap)
    mass = mu.marginal(depth)
    live = mass > 0
    lyap = float(mass[live] @ system.g_values(words[live]))
    fd = max(depth, f.depth)
    fmass = mu.marginal(fd) if fd != depth else mass
    fvals = f.lift(fd).values if fd > f.depth else f.values
    avg = fmass @ fvals
    err = 0.0 if system.is_affine else _g_oscillation(system, words[live])
    return MeasureStats(entropy_rate(mu), lyap, avg, quad_depth, err + f.discretization_bound)


def _backoff_transitions(mu, n: int, cap: int) -> np.ndarray:
    m = mu.m
    P = np.empty((m**n, m))
    done = np.zeros(m**n, dtype=bool)
    states = np.arange(m**n)
    for j in range(n, -1, -1):
        q = mu.marginal(j + 1, cap).reshape(m**j, m)
        qj = q.sum(axis=1)
        suffix = states % m**j
        ok = ~done & (qj[suffix] > 0)
        P[ok] = q[suffix[ok]] / qj[suffix[ok], None]
        done |= ok
        if done.all():
            break
    return P


def default_block_lengths(count: int) -> list[int]:
    return [2 ** (j + 1) for j in range(1, count + 1)]


def ergodic_approximants(mu, system=None, f=None, count: int = 3, lengths=None,
                         cap: int = 2**20) -> list[MarkovMeasure]:
    """Ergodic, fully supported order-n measures converging to mu.

    Each approximant is the order-n Markov chain with the (n+1)-cylinder
    marginals of mu, with every transition floored at 1/n**2 and rows
    renormalised.  States of zero mass use the conditional law of their
    longest suffix of positive mass, so the floor cannot strand the chain
    in a region mu never visits.  ``system`` and ``f`` are accepted for interface symmetry;
    the construction does not depend on them.
    """
    lengths = default_block_lengths(count) if lengths is None else list(lengths)
    out = []
    for n in lengths:
        if mu.m ** (n + 1) > cap:
            raise BudgetExceeded(f"block length {n} needs {mu.m}**{n + 1} cylinders (cap {cap})")
        P = _backoff_transitions(mu, n, cap)
        P = np.maximum(P, 1.0 / n**2)
        P /= P.sum(axis=1, keepdims=True)
        # mu's n-marginal is stationary before the floor, so it is a good start
        pi = _stationary(P, mu.m, n, guess=mu.marginal(n, cap))
        out.append(MarkovMeasure(mu.m, n, P, pi=pi, label=f"approximant_{n}"))
    return out
