"""M-adic grid, retention probabilities and the random nested construction.

Codes are stored as integer coordinates ``(ix, iy)`` at their level: the
digits ``i_1..i_n`` of a code are the base-M digits of ``ix`` (most
significant first), so the lower-left corner of the square is
``(ix, iy) / M**n``.  ``p[i, j]`` is the retention probability of the child
with x-digit ``i`` and y-digit ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .errors import EmptySampleError, LevelRangeError, ValidationError, DomainError

MAX_EXTINCTION_ITERATIONS = 10**6


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Retention probabilities ``p[i, j]`` of the M x M sub-squares."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"probability matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValidationError("grid order M must be at least 2")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            bad = np.argwhere(~((arr >= 0) & (arr <= 1)))
            raise ValidationError(f"probability entries must lie in [0, 1]; bad entry at {tuple(bad[0])}")
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    @classmethod
    def uniform(cls, M: int, p: float) -> "ProbabilityMatrix":
        return cls(np.full((M, M), float(p)))

    @classmethod
    def sierpinski(cls, p: float, p_center: float = 0.0) -> "ProbabilityMatrix":
        """M = 3 with the central square retained with ``p_center``."""
        arr = np.full((3, 3), float(p))
        arr[1, 1] = p_center
        return cls(arr)

    @property
    def M(self) -> int:
        return self.p.shape[0]

    @property
    def sum_total(self) -> float:
        return float(self.p.sum())

    @property
    def supercritical(self) -> bool:
        """Survival with positive probability."""
        return self.sum_total > 1.0

    @property
    def dimension_above_one(self) -> bool:
        return self.sum_total > self.M

    @property
    def deterministic(self) -> bool:
        return bool(np.all((self.p == 0.0) | (self.p == 1.0)))

    def __eq__(self, other):
        return isinstance(other, ProbabilityMatrix) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())

    def to_rows(self) -> list[list[float]]:
        return self.p.tolist()


@dataclass(frozen=True)
class SquareCode:
    """Address ``(i_1..i_n; j_1..j_n)`` of an M-adic square of level n."""

    M: int
    digits_i: tuple[int, ...] = ()
    digits_j: tuple[int, ...] = ()

    def __post_init__(self):
        di, dj = tuple(int(d) for d in self.digits_i), tuple(int(d) for d in self.digits_j)
        if len(di) != len(dj):
            raise ValidationError("digit sequences must have equal length")
        if any(d < 0 or d >= self.M for d in di + dj):
            raise ValidationError(f"digits must lie in 0..{self.M - 1}")
        object.__setattr__(self, "digits_i", di)
        object.__setattr__(self, "digits_j", dj)

    @classmethod
    def root(cls, M: int) -> "SquareCode":
        return cls(M)

    @classmethod
    def from_coords(cls, M: int, level: int, ix: int, iy: int) -> "SquareCode":
        return cls(M, _digits(int(ix), M, level), _digits(int(iy), M, level))

    @property
    def level(self) -> int:
        return len(self.digits_i)

    @property
    def coords(self) -> tuple[int, int]:
        ix = iy = 0
        for a, b in zip(self.digits_i, self.digits_j):
            ix, iy = ix * self.M + a, iy * self.M + b
        return ix, iy

    @property
    def parent(self) -> "SquareCode":
        if self.level == 0:
            raise DomainError("the root has no parent")
        return SquareCode(self.M, self.digits_i[:-1], self.digits_j[:-1])

    def child(self, i: int, j: int) -> "SquareCode":
        return SquareCode(self.M, self.digits_i + (i,), self.digits_j + (j,))

    def is_prefix_of(self, other: "SquareCode") -> bool:
        """True iff ``other``'s square is contained in this one."""
        n = self.level
        return (self.M == other.M and other.level >= n
                and other.digits_i[:n] == self.digits_i and other.digits_j[:n] == self.digits_j)

    def weight(self, matrix: ProbabilityMatrix) -> float:
        """Product of retention probabilities along the code."""
        w = 1.0
        for a, b in zip(self.digits_i, self.digits_j):
            w *= matrix.p[a, b]
        return w


def _digits(value: int, M: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        value, d = divmod(value, M)
        out.append(d)
    if value:
        raise ValidationError("coordinate out of range for level")
    return tuple(reversed(out))


def square_geometry(code: SquareCode) -> tuple[tuple[float, float], float]:
    """Lower-left corner and side length of the square of ``code``."""
    M, n = code.M, code.level
    cx = sum(d * M ** -(l + 1) for l, d in enumerate(code.digits_i))
    cy = sum(d * M ** -(l + 1) for l, d in enumerate(code.digits_j))
    return (cx, cy), float(M) ** -n


def level_offset(M: int, n: int) -> int:
    """Breadth-first index of the first level-n square of the full tree."""
    return (M ** (2 * n) - 1) // (M * M - 1)


def max_depth(M: int) -> int:
    """Deepest level whose breadth-first indices fit the 64-bit counter."""
    n = 0
    while level_offset(M, n + 2) <= (1 << 64) - 1:
        n += 1
    return n


def _check_depth(M: int, depth: int):
    if depth < 0:
        raise ValidationError("depth must be nonnegative")
    if depth > max_depth(M):
        raise ValidationError(f"depth {depth} exceeds the 64-bit counter range for M={M} (max {max_depth(M)})")


class RealizationTree:
    """Sampled family of retained codes, level by level.

    Level ``n`` is held as integer coordinate arrays ``ix[n], iy[n]`` in
    canonical order (children grouped under their parent, parents in level
    order) with ``parent[n]`` indexing into level ``n - 1``.
    """

    def __init__(self, matrix: ProbabilityMatrix, depth: int, seed: int,
                 ix: Sequence[np.ndarray], iy: Sequence[np.ndarray], parent: Sequence[np.ndarray]):
        self.matrix = matrix
        self.depth = depth
        self.seed = seed
        for arrs in (ix, iy, parent):
            for a in arrs:
                a.flags.writeable = False
        self._ix, self._iy, self._parent = tuple(ix), tuple(iy), tuple(parent)

    @property
    def M(self) -> int:
        return self.matrix.M

    def _check(self, n: int):
        if not 0 <= n <= self.depth:
            raise LevelRangeError(f"level {n} outside 0..{self.depth}")

    def coords(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        self._check(n)
        return self._ix[n], self._iy[n]

    def parents(self, n: int) -> np.ndarray:
        self._check(n)
        return self._parent[n]

    def count(self, n: int) -> int:
        self._check(n)
        return len(self._ix[n])

    def counts(self) -> list[int]:
        return [len(a) for a in self._ix]

    def survived(self) -> bool:
        """True iff the deepest sampled level is nonempty."""
        return len(self._ix[self.depth]) > 0

    def __eq__(self, other):
        if not isinstance(other, RealizationTree):
            return NotImplemented
        return (self.matrix == other.matrix and self.depth == other.depth and self.seed == other.seed
                and all(np.array_equal(a, b) for a, b in zip(self._ix, other._ix))
                and all(np.array_equal(a, b) for a, b in zip(self._iy, other._iy)))


def _children(matrix, key, n, ix, iy, trial_keys=None):
    """Candidate children of level-n squares and their retention mask."""
    M = matrix.M
    di = np.repeat(np.arange(M, dtype=np.int64), M)
    dj = np.tile(np.arange(M, dtype=np.int64), M)
    cix = (ix[:, None] * M + di[None, :]).ravel()
    ciy = (iy[:, None] * M + dj[None, :]).ravel()
    side = M ** (n + 1)
    counter = (np.uint64(level_offset(M, n + 1))
               + cix.astype(np.uint64) * np.uint64(side) + ciy.astype(np.uint64))
    if trial_keys is not None:
        key = np.repeat(trial_keys, M * M)
    u = rng.uniforms(key, counter)
    probs = np.tile(matrix.p[di, dj], len(ix))
    return cix, ciy, u < probs


def sample_tree(matrix: ProbabilityMatrix, depth: int, seed: int) -> RealizationTree:
    """Sample the retained codes of levels ``0..depth``.

    The child with BFS index ``k`` is retained iff SplitMix64 output ``k`` of the
    stream seeded by ``seed`` is below its probability, so the result is a pure
    function of ``(matrix, depth, seed)``.
    """
    if not isinstance(matrix, ProbabilityMatrix):
        matrix = ProbabilityMatrix(matrix)
    _check_depth(matrix.M, depth)
    key = rng.stream_key(seed)
    ix = [np.zeros(1, dtype=np.int64)]
    iy = [np.zeros(1, dtype=np.int64)]
    parent = [np.full(1, -1, dtype=np.int64)]
    M2 = matrix.M ** 2
    for n in range(depth):
        cix, ciy, keep = _children(matrix, key, n, ix[n], iy[n])
        idx = np.flatnonzero(keep)
        ix.append(cix[idx])
        iy.append(ciy[idx])
        parent.append(idx // M2)
    return RealizationTree(matrix, depth, seed, ix, iy, parent)


def level_codes(tree: RealizationTree, n: int) -> set[SquareCode]:
    ix, iy = tree.coords(n)
    return {SquareCode.from_coords(tree.M, n, a, b) for a, b in zip(ix.tolist(), iy.tolist())}


def extinction_probability(matrix: ProbabilityMatrix, tol: float = 1e-14) -> float:
    """Smallest fixed point of the offspring generating function.

    Monotone iteration from 0 of ``h(s) = prod (1 - p + p s)``; exactly 1 in
    the (sub)critical regime ``sum p <= 1``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if matrix.sum_total <= 1.0:
        return 1.0
    ps = matrix.p.ravel()
    q = 0.0
    for _ in range(MAX_EXTINCTION_ITERATIONS):
        nxt = float(np.prod(1.0 - ps + ps * q))
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    return q


def extinction_by_depth(matrix: ProbabilityMatrix, depth: int) -> float:
    """Exact probability that level ``depth`` is empty (``h`` iterated ``depth`` times)."""
    ps = matrix.p.ravel()
    q = 0.0
    for _ in range(depth):
        q = float(np.prod(1.0 - ps + ps * q))
    return q


def theoretical_dimension(matrix: ProbabilityMatrix) -> float:
    """Almost sure Hausdorff dimension ``log(sum p) / log M`` of a nonempty limit set."""
    total = matrix.sum_total
    if total <= 1.0:
        raise DomainError(f"dimension formula needs sum p > 1 (got {total})")
    return math.log(total) / math.log(matrix.M)


@dataclass
class GrowthEstimate:
    estimate: float
    target: float
    surviving: int
    discarded: int


def growth_rate_estimate(trees: Iterable[RealizationTree], n: int) -> GrowthEstimate:
    """Mean of ``log(#E_n) / n`` over the trees surviving to level ``n``."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    rates, discarded, matrix = [], 0, None
    for tree in trees:
        matrix = tree.matrix
        c = tree.count(n)
        if c == 0:
            discarded += 1
        else:
            rates.append(math.log(c) / n)
    if not rates:
        raise EmptySampleError(f"all {discarded} trees are extinct at level {n}")
    return GrowthEstimate(float(np.mean(rates)), math.log(matrix.sum_total), len(rates), discarded)


def survival_flags(matrix: ProbabilityMatrix, depth: int, seeds: Sequence[int],
                   cap: int = 64, column=None, row=None) -> np.ndarray:
    """Whether level ``depth`` is nonempty, for each seed.

    Exact, but only tracks up to ``cap`` nodes per trial and level: any
    surviving subfamily proves survival.  A trial that dies while truncated is
    rerun without the cap.  ``column`` restricts to the squares above the
    x-coordinate ``column`` (the column process at a fixed abscissa); ``row``
    likewise restricts to the squares beside a fixed ordinate.
    """
    if column is not None and row is not None:
        raise ValidationError("give at most one of column and row")
    _check_depth(matrix.M, depth)
    seeds = list(seeds)
    if not seeds:
        return np.zeros(0, dtype=bool)
    keys = np.array([rng.stream_key(s) for s in seeds], dtype=np.uint64)
    alive, truncated = _batched_survival(matrix, depth, keys, cap, column, row)
    redo = np.flatnonzero(~alive & truncated)
    for t in redo:
        a, _ = _batched_survival(matrix, depth, keys[t:t + 1], None, column, row)
        alive[t] = a[0]
    return alive


def _column_digits(u: float, M: int, depth: int) -> list[int]:
    digits, x = [], u
    for _ in range(depth):
        x *= M
        d = int(math.floor(x))
        digits.append(d)
        x -= d
    return digits


def _batched_survival(matrix, depth, keys, cap, column, row=None):
    T = len(keys)
    M = matrix.M
    trial = np.arange(T, dtype=np.int64)
    ix = np.zeros(T, dtype=np.int64)
    iy = np.zeros(T, dtype=np.int64)
    truncated = np.zeros(T, dtype=bool)
    line = column if column is not None else row
    digits = _column_digits(line, M, depth) if line is not None else None
    for n in range(depth):
        if len(ix) == 0:
            break
        cix, ciy, keep = _children(matrix, None, n, ix, iy, trial_keys=keys[trial])
        ctrial = np.repeat(trial, M * M)
        if digits is not None:
            keep &= ((cix if row is None else ciy) % M) == digits[n]
        idx = np.flatnonzero(keep)
        trial, ix, iy = ctrial[idx], cix[idx], ciy[idx]
        if cap is not None and len(trial):
            starts = np.flatnonzero(np.r_[True, trial[1:] != trial[:-1]])
            group_start = np.repeat(starts, np.diff(np.r_[starts, len(trial)]))
            rank = np.arange(len(trial)) - group_start
            over = rank >= cap
            if over.any():
                truncated[np.unique(trial[over])] = True
                sel = ~over
                trial, ix, iy = trial[sel], ix[sel], iy[sel]
    alive = np.zeros(T, dtype=bool)
    alive[np.unique(trial)] = True
    return alive, truncated
