"""Oblique, radial and co-radial projections onto the diagonals of K = [0,1]^2.

Direction convention: the projection line through a point has direction
``(cos a, -sin a)``.  Angles in (0, pi/2) project onto the main diagonal
(0,0)-(1,1), angles in (pi/2, pi) onto the anti diagonal (0,1)-(1,0).  A
diagonal point is parametrized by its first coordinate ``u`` in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .core import RealizationTree, SquareCode, ProbabilityMatrix, square_geometry
from .errors import DomainError, OutOfRangeError, ValidationError

MAIN = "main"
ANTI = "anti"

_EXACT_TRIG = {
    Fraction(1, 4): (math.sqrt(0.5), math.sqrt(0.5)),
    Fraction(3, 4): (-math.sqrt(0.5), math.sqrt(0.5)),
}


@dataclass(frozen=True)
class Angle:
    """A direction angle in (0, pi); ``pi_fraction`` keeps rational multiples of pi exact."""

    alpha: float
    pi_fraction: Fraction | None = None

    def __post_init__(self):
        if self.pi_fraction is not None:
            frac = Fraction(self.pi_fraction)
            object.__setattr__(self, "pi_fraction", frac)
            object.__setattr__(self, "alpha", float(frac) * math.pi)
        if not 0.0 < self.alpha < math.pi:
            raise DomainError(f"angle {self.alpha} outside (0, pi)")

    @classmethod
    def of(cls, value) -> "Angle":
        if isinstance(value, Angle):
            return value
        if isinstance(value, Fraction):
            return cls(float(value) * math.pi, value)
        return cls(float(value))

    @classmethod
    def pi_times(cls, num: int, den: int = 1) -> "Angle":
        return cls(0.0, Fraction(num, den))

    @property
    def in_D(self) -> bool:
        if self.pi_fraction is not None:
            return self.pi_fraction != Fraction(1, 2)
        return self.alpha != math.pi / 2

    @property
    def cos_sin(self) -> tuple[float, float]:
        if self.pi_fraction in _EXACT_TRIG:
            return _EXACT_TRIG[self.pi_fraction]
        return math.cos(self.alpha), math.sin(self.alpha)

    def __float__(self):
        return self.alpha


@dataclass(frozen=True)
class ProjectionFrame:
    """Projection ``Pi_alpha`` onto the diagonal paired with the angle."""

    angle: Angle

    def __post_init__(self):
        object.__setattr__(self, "angle", Angle.of(self.angle))
        if not self.angle.in_D:
            raise DomainError("pi/2 is an axis direction; use axis_projection_cover instead")

    @classmethod
    def at(cls, alpha) -> "ProjectionFrame":
        return cls(Angle.of(alpha))

    @property
    def alpha(self) -> float:
        return self.angle.alpha

    @property
    def codomain(self) -> str:
        return MAIN if self.alpha < math.pi / 2 else ANTI

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """``(a, b, c)`` with ``u = a x + b y + c``."""
        c, s = self.angle.cos_sin
        if self.codomain == MAIN:
            return s / (s + c), c / (s + c), 0.0
        k = c / (c - s)
        return 1.0 - k, -k, k

    def diagonal_point(self, u):
        u = np.asarray(u, dtype=float)
        return (u, u) if self.codomain == MAIN else (u, 1.0 - u)

    def direction(self) -> tuple[float, float]:
        c, s = self.angle.cos_sin
        return c, -s


def project_point(frame: ProjectionFrame, z) -> float:
    """Parameter of the diagonal point hit by the projection line through ``z``."""
    x, y = z
    a, b, c = frame.coefficients
    return a * x + b * y + c


def _lower_ends(frame: ProjectionFrame, ix, iy, h):
    """Lower endpoint of the image of squares with corners ``(ix, iy) * h``."""
    a, b, c = frame.coefficients
    ix = np.asarray(ix, dtype=np.float64)
    iy = np.asarray(iy, dtype=np.float64)
    if frame.codomain == MAIN:
        return (a * ix + b * iy) * h
    # the minimum over a square sits at its upper-left corner
    return a * ix * h + b * (iy + 1.0) * h + c


def project_square(frame: ProjectionFrame, code: SquareCode) -> tuple[float, float]:
    """Closed image interval of the square of ``code``; width ``M**-n``."""
    ix, iy = code.coords
    h = float(code.M) ** -code.level
    lo = float(_lower_ends(frame, ix, iy, h))
    return lo, lo + h


class IntervalSet:
    """Sorted union of disjoint closed intervals; touching intervals are merged."""

    __slots__ = ("_lo", "_hi")

    def __init__(self, intervals: Iterable[tuple[float, float]] = (), tol: float = 0.0):
        arr = np.asarray(list(intervals), dtype=np.float64).reshape(-1, 2)
        self._lo, self._hi = _merge(arr[:, 0], arr[:, 1], tol)

    @classmethod
    def from_arrays(cls, lo, hi, tol: float = 0.0) -> "IntervalSet":
        out = cls.__new__(cls)
        out._lo, out._hi = _merge(np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64), tol)
        return out

    @classmethod
    def from_equal_width(cls, lo, width: float) -> "IntervalSet":
        """Union of ``[lo_k, lo_k + width]`` without a general merge sort on pairs."""
        lo = np.sort(np.asarray(lo, dtype=np.float64))
        out = cls.__new__(cls)
        if len(lo) == 0:
            out._lo = out._hi = np.zeros(0)
            return out
        gap = np.flatnonzero(lo[1:] > lo[:-1] + width)
        out._lo = np.r_[lo[0], lo[gap + 1]]
        out._hi = np.r_[lo[gap] + width, lo[-1] + width]
        return out

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self._lo.tolist(), self._hi.tolist()))

    @property
    def lows(self) -> np.ndarray:
        return self._lo

    @property
    def highs(self) -> np.ndarray:
        return self._hi

    def __len__(self):
        return len(self._lo)

    def __iter__(self):
        return iter(self.intervals)

    def __bool__(self):
        return len(self._lo) > 0

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self._lo, other._lo) and np.array_equal(self._hi, other._hi)

    def __repr__(self):
        return f"IntervalSet({self.intervals})"

    def measure(self) -> float:
        return float(np.sum(self._hi - self._lo))

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet.from_arrays(np.r_[self._lo, other._lo], np.r_[self._hi, other._hi])

    def contains_interval(self, a: float, b: float, tol: float = 0.0) -> bool:
        """True iff ``[a, b]`` lies inside a single component (up to ``tol``)."""
        k = np.searchsorted(self._lo, a + tol, side="right") - 1
        return bool(k >= 0 and self._lo[k] <= a + tol and self._hi[k] >= b - tol)

    def contains_point(self, x: float) -> bool:
        return self.contains_interval(x, x)

    def issubset(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        return all(other.contains_interval(a, b, tol) for a, b in self.intervals)

    def longest(self) -> tuple[float, float] | None:
        if not len(self._lo):
            return None
        k = int(np.argmax(self._hi - self._lo))
        return float(self._lo[k]), float(self._hi[k])


def _merge(lo, hi, tol):
    if len(lo) == 0:
        return np.zeros(0), np.zeros(0)
    if np.any(hi < lo):
        raise ValidationError("interval with hi < lo")
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run_hi = np.maximum.accumulate(hi)
    new = np.r_[True, lo[1:] > run_hi[:-1] + tol]
    starts = np.flatnonzero(new)
    ends = np.r_[starts[1:] - 1, len(lo) - 1]
    return lo[starts].copy(), run_hi[ends].copy()


@dataclass
class LongestInterval:
    interval: tuple[float, float] | None
    length: float
    passes: bool


def contains_interval(s: IntervalSet, min_length: float) -> LongestInterval:
    """Longest component of ``s`` and whether it reaches ``min_length``."""
    if min_length <= 0:
        raise ValidationError("min_length must be positive")
    best = s.longest()
    if best is None:
        return LongestInterval(None, 0.0, False)
    length = best[1] - best[0]
    return LongestInterval(best, length, length >= min_length)


def project_level(tree: RealizationTree, n: int, frame: ProjectionFrame) -> IntervalSet:
    """Shadow ``Pi_alpha(E_n)`` of the level-n retained squares."""
    ix, iy = tree.coords(n)
    h = float(tree.M) ** -n
    return IntervalSet.from_equal_width(_lower_ends(frame, ix, iy, h), h)


# axis directions

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


def axis_projection_cover(tree: RealizationTree, n: int, axis: str) -> IntervalSet:
    """Union of M-adic intervals under the retained squares.

    ``vertical`` collapses columns (projection onto the x-axis),
    ``horizontal`` collapses rows (projection onto the y-axis).
    """
    ix, iy = tree.coords(n)
    if axis == VERTICAL:
        idx = ix
    elif axis == HORIZONTAL:
        idx = iy
    else:
        raise ValidationError(f"unknown axis {axis!r}")
    h = float(tree.M) ** -n
    return IntervalSet.from_equal_width(np.unique(idx) * h, h)


def column_row_condition(matrix: ProbabilityMatrix) -> bool:
    """Every row sum and every column sum of ``p`` exceeds 1."""
    p = matrix.p
    return bool(np.all(p.sum(axis=1) > 1.0) and np.all(p.sum(axis=0) > 1.0))


# radial / co-radial centers

RADIAL = "radial"
CORADIAL = "coradial"


@dataclass(frozen=True)
class Center:
    """Center of a radial or co-radial projection, in diagonal position."""

    t: tuple[float, float]
    kind: str = RADIAL

    def __post_init__(self):
        tx, ty = (float(v) for v in self.t)
        object.__setattr__(self, "t", (tx, ty))
        if self.kind not in (RADIAL, CORADIAL):
            raise ValidationError(f"unknown center kind {self.kind!r}")
        if 0.0 <= tx <= 1.0 or 0.0 <= ty <= 1.0:
            raise DomainError(f"center {self.t} is not in diagonal position")

    @property
    def same_side(self) -> bool:
        """Lower-left or upper-right of K (both coordinates on the same side)."""
        tx, ty = self.t
        return (tx < 0) == (ty < 0)

    @property
    def codomain(self) -> str:
        radial_main = not self.same_side
        if self.kind == RADIAL:
            return MAIN if radial_main else ANTI
        return ANTI if radial_main else MAIN


def _radial_u(t, x, y, codomain):
    tx, ty = t
    vx, vy = x - tx, y - ty
    if codomain == ANTI:
        denom = vx + vy
        lam = (1.0 - tx - ty) / denom
    else:
        denom = vx - vy
        lam = (ty - tx) / denom
    return tx + lam * vx


def _coradial_u(t, x, y, codomain):
    tx, ty = t
    r2 = (x - tx) ** 2 + (y - ty) ** 2
    if codomain == MAIN:
        # |(u, u) - t|^2 = r^2
        b = tx + ty
        disc = b * b - 2.0 * (tx * tx + ty * ty - r2)
        root = np.sqrt(np.maximum(disc, 0.0))
        increasing = tx < 0  # distance grows with u when t is lower-left
        return (b + root) / 2.0 if increasing else (b - root) / 2.0
    # |(u, 1 - u) - t|^2 = r^2
    b = tx - ty + 1.0
    c = tx * tx + (1.0 - ty) ** 2 - r2
    disc = b * b - 2.0 * c
    root = np.sqrt(np.maximum(disc, 0.0))
    increasing = tx < 0  # t upper-left: distance grows with u
    return (b + root) / 2.0 if increasing else (b - root) / 2.0


def radial_point(t: Center, z) -> float:
    """Parameter where the line from ``t`` through ``z`` crosses the codomain diagonal.

    Not clamped: a value outside [0, 1] means the crossing misses the diagonal.
    """
    x, y = z
    if (x, y) == t.t:
        raise DomainError("z coincides with the center")
    return float(_radial_u(t.t, x, y, Center(t.t, RADIAL).codomain))


def coradial_point(t: Center, z) -> float:
    """Parameter of the diagonal point at the same distance from ``t`` as ``z``."""
    x, y = z
    return float(_coradial_u(t.t, x, y, Center(t.t, CORADIAL).codomain))


def center_map(t: Center):
    """Vectorized point map ``(x, y) -> u`` of the center's projection."""
    cod = t.codomain
    fn = _radial_u if t.kind == RADIAL else _coradial_u
    return lambda x, y: fn(t.t, np.asarray(x, dtype=float), np.asarray(y, dtype=float), cod)


def square_images(t: Center, ix, iy, h) -> tuple[np.ndarray, np.ndarray]:
    """Exact image intervals of squares under a radial or co-radial map (extremes at corners)."""
    fn = center_map(t)
    x0 = np.asarray(ix, dtype=float) * h
    y0 = np.asarray(iy, dtype=float) * h
    vals = np.stack([fn(x0, y0), fn(x0 + h, y0), fn(x0, y0 + h), fn(x0 + h, y0 + h)])
    return vals.min(axis=0), vals.max(axis=0)


RANGE_TOL = 1e-12


def radial_project_level(tree: RealizationTree, n: int, t: Center) -> IntervalSet:
    """Shadow of ``E_n`` under the radial (or co-radial) map of ``t``.

    Raises ``OutOfRangeError`` if any image leaves [0, 1]; images are never clamped.
    """
    ix, iy = tree.coords(n)
    h = float(tree.M) ** -n
    lo, hi = square_images(t, ix, iy, h)
    if len(lo) and (lo.min() < -RANGE_TOL or hi.max() > 1 + RANGE_TOL):
        bad = int(np.sum((lo < -RANGE_TOL) | (hi > 1 + RANGE_TOL)))
        raise OutOfRangeError(f"{bad} square images leave the codomain diagonal")
    return IntervalSet.from_arrays(lo, hi)


def normalize_center(t: Center, code: SquareCode) -> Center:
    """Center seen from inside ``code``'s square rescaled to K: ``M**n (t - corner)``."""
    (cx, cy), side = square_geometry(code)
    tx, ty = t.t
    if cx <= tx <= cx + side and cy <= ty <= cy + side:
        raise DomainError("center lies inside the square")
    scale = float(code.M) ** code.level
    return Center(((tx - cx) * scale, (ty - cy) * scale), t.kind)
