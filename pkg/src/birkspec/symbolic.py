"""Words over the alphabet {1, ..., m}, locally constant potentials and Birkhoff averages.

Words are plain tuples of 1-based symbols.  Anything vectorised works on
integer arrays of shape ``(count, length)`` holding the same 1-based symbols.
A word of length ``n`` has a base-``m`` index (first symbol most significant),
so lexicographic order and index order agree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_CYLINDER_CAP = 2**24


class BudgetExceeded(ValueError):
    """Raised when an enumeration would exceed its configured cap."""


def make_word(symbols: Iterable[int], m: int) -> tuple[int, ...]:
    w = tuple(int(a) for a in symbols)
    for a in w:
        if not 1 <= a <= m:
            raise ValueError(f"symbol {a} outside alphabet 1..{m}")
    return w


def word_index(w: Sequence[int], m: int) -> int:
    idx = 0
    for a in w:
        idx = idx * m + (a - 1)
    return idx


def index_word(idx: int, n: int, m: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        idx, a = divmod(idx, m)
        out.append(a + 1)
    return tuple(reversed(out))


def words_to_indices(words: np.ndarray, m: int) -> np.ndarray:
    """Base-m indices of each row of a (count, n) symbol array."""
    words = np.asarray(words, dtype=np.int64)
    powers = m ** np.arange(words.shape[1] - 1, -1, -1, dtype=np.int64)
    return (words - 1) @ powers


def all_words(n: int, m: int, cap: int = DEFAULT_CYLINDER_CAP) -> np.ndarray:
    """Every word of length n as rows of a (m**n, n) array, lexicographic."""
    if m**n > cap:
        raise BudgetExceeded(f"{m}**{n} cylinders exceed the enumeration cap of {cap}")
    idx = np.arange(m**n, dtype=np.int64)
    out = np.empty((m**n, n), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        idx, out[:, j] = np.divmod(idx, m)
    return out + 1


def enumerate_cylinders(n: int, m: int, cap: int = DEFAULT_CYLINDER_CAP) -> Iterator[tuple[int, ...]]:
    """Yield every word of length n exactly once, in lexicographic order."""
    if n < 0:
        raise ValueError("word length must be non-negative")
    if m**n > cap:
        raise BudgetExceeded(f"{m}**{n} cylinders exceed the enumeration cap of {cap}")
    return itertools.product(range(1, m + 1), repeat=n)


@dataclass(frozen=True)
class PotentialTable:
    """A potential f: Sigma -> R^d depending on the first ``depth`` symbols.

    ``values[word_index(w)]`` is f on the cylinder [w] for words of length
    ``depth``.
    """

    m: int
    depth: int
    values: np.ndarray
    source: str | None = None
    discretization_bound: float = 0.0
    _norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if self.m < 1 or self.depth < 1:
            raise ValueError("need m >= 1 and depth >= 1")
        if vals.shape[0] != self.m**self.depth:
            raise ValueError(f"expected {self.m ** self.depth} entries, got {vals.shape[0]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_norm", float(np.max(np.linalg.norm(vals, axis=1))))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def norm(self) -> float:
        return self._norm

    @property
    def diameter(self) -> float:
        """Largest distance between two values of the table."""
        v = self.values
        if len(v) > 4096:
            # bounding-box diagonal is a valid over-estimate
            return float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
        diffs = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1)).max())

    @classmethod
    def from_function(cls, m: int, depth: int, fn, source: str | None = None) -> "PotentialTable":
        vals = [np.atleast_1d(fn(w)) for w in enumerate_cylinders(depth, m)]
        return cls(m, depth, np.array(vals, dtype=float), source=source)

    @classmethod
    def constant(cls, m: int, c, depth: int = 1) -> "PotentialTable":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(m, depth, np.tile(c, (m**depth, 1)), source="constant")

    def at(self, w: Sequence[int]) -> np.ndarray:
        return self.values[word_index(w[: self.depth], self.m)]

    def lift(self, depth: int) -> "PotentialTable":
        """Same potential tabulated on longer words."""
        if depth < self.depth:
            raise ValueError("cannot lift to a smaller depth")
        idx = np.arange(self.m**depth) // self.m ** (depth - self.depth)
        return PotentialTable(self.m, depth, self.values[idx], self.source, self.discretization_bound)

    def window_values(self, words: np.ndarray, wrap: bool = True) -> np.ndarray:
        """f on every depth-r window of each row; shape (count, n, d).

        With ``wrap`` the last r-1 windows are completed by repeating the final
        symbol, otherwise only the n-r+1 complete windows are returned.
        """
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        r = self.depth
        if wrap and r > 1:
            pad = np.repeat(words[:, -1:], r - 1, axis=1)
            words = np.concatenate([words, pad], axis=1)
        count = words.shape[1] - r + 1
        idx = np.zeros((words.shape[0], count), dtype=np.int64)
        for j in range(r):
            idx = idx * self.m + (words[:, j : j + count] - 1)
        return self.values[idx]


def birkhoff_average(w: Sequence[int], f: PotentialTable) -> np.ndarray:
    """A_n f of a finite word, using the repeat-last-symbol wrap rule."""
    n = len(w)
    if n < f.depth:
        raise ValueError(f"word shorter than potential depth ({n} < {f.depth})")
    return f.window_values(np.array([w]))[0].mean(axis=0)


def birkhoff_averages(words: np.ndarray, f: PotentialTable) -> np.ndarray:
    """Vectorised ``birkhoff_average`` over rows; shape (count, d)."""
    words = np.atleast_2d(words)
    if words.shape[1] < f.depth:
        raise ValueError(f"word shorter than potential depth ({words.shape[1]} < {f.depth})")
    return f.window_values(words).mean(axis=1)


def running_averages(path: np.ndarray, f: PotentialTable) -> np.ndarray:
    """A_n f along one sequence for n = 1..len(path)-r+1 (complete windows only)."""
    vals = f.window_values(np.asarray(path)[None, :], wrap=False)[0]
    return np.cumsum(vals, axis=0) / np.arange(1, len(vals) + 1)[:, None]


def variation_bound(f: PotentialTable, n: int) -> float:
    """Upper bound on var_n A_n f for a depth-r table.

    Two sequences agreeing on n symbols can only disagree on the last r-1
    windows of the first n, each by at most the diameter of the value set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    r = f.depth
    if r == 1:
        return 0.0
    return f.diameter * min(n, r - 1) / n


def is_constant_word(w: Sequence[int]) -> bool:
    return len(w) > 0 and all(a == w[0] for a in w)
