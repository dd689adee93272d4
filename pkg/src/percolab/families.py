"""Almost-linear families of projections and their verification.

A family writes a nonlinear projection as ``S_t(x) = Pi_{alpha_t(x)}(x)``.  The
radial and co-radial reductions give explicit direction fields; a constant
field is the plain oblique projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import ANTI, CORADIAL, MAIN, RADIAL, Angle, _coradial_u

CONSTANT = "constant"


@dataclass(frozen=True)
class AlmostLinearFamily:
    """Direction field ``alpha_t(x)`` over a box (or finite set) ``T`` of centers.

    ``T`` is either ``((x0, x1), (y0, y1))`` or a sequence of points (set
    ``points=True``).  For the constant kind ``T`` is ignored.
    """

    kind: str
    T: tuple = ((0.0, 0.0), (0.0, 0.0))
    points: bool = False
    alpha0: Angle | None = None

    def __post_init__(self):
        if self.kind not in (RADIAL, CORADIAL, CONSTANT):
            raise ValidationError(f"unknown family kind {self.kind!r}")
        if self.kind == CONSTANT:
            if self.alpha0 is None:
                raise ValidationError("constant family needs alpha0")
            object.__setattr__(self, "alpha0", Angle.of(self.alpha0))

    @classmethod
    def constant(cls, alpha) -> "AlmostLinearFamily":
        return cls(CONSTANT, alpha0=Angle.of(alpha))

    @classmethod
    def box(cls, kind: str, center, half_width: float) -> "AlmostLinearFamily":
        cx, cy = center
        return cls(kind, ((cx - half_width, cx + half_width), (cy - half_width, cy + half_width)))

    def sample_centers(self, k: int = 5) -> np.ndarray:
        if self.kind == CONSTANT:
            return np.zeros((1, 2))
        if self.points:
            return np.asarray(self.T, dtype=float).reshape(-1, 2)
        (x0, x1), (y0, y1) = self.T
        gx, gy = np.meshgrid(np.linspace(x0, x1, k), np.linspace(y0, y1, k), indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def alpha(self, t, x, y):
        """Direction angle at points ``(x, y)`` for center ``t`` (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == CONSTANT:
            return np.full(np.broadcast(x, y).shape, self.alpha0.alpha)
        tx, ty = t
        if self.kind == RADIAL:
            # the line through z and t has direction -(z - t)
            return np.arctan2(y - ty, -(x - tx))
        # secant from z to its co-radial image: perpendicular to the radius at the midpoint
        u = _coradial_u((tx, ty), x, y, MAIN if (tx < 0) == (ty < 0) else ANTI)
        uy = u if (tx < 0) == (ty < 0) else 1.0 - u
        mx, my = 0.5 * (x + u) - tx, 0.5 * (y + uy) - ty
        a = np.arctan2(mx, my)
        return np.where(a <= 0, a + math.pi, a)


@dataclass
class FamilyReport:
    """Checked flags with numeric witnesses for conditions i-iii."""

    alpha_range: tuple[float, float]
    J: tuple[float, float]
    cond_i: bool
    lipschitz_x: float
    lipschitz_t: float
    cond_ii: bool
    tile_sides: list[float] = field(default_factory=list)
    tile_counts: list[int] = field(default_factory=list)
    growth_ratios: list[float] = field(default_factory=list)
    cond_iii: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cond_i and self.cond_ii and self.cond_iii

    def to_record(self) -> dict:
        return {"alpha_range": list(self.alpha_range), "J": list(self.J), "cond_i": self.cond_i,
                "lipschitz_x": self.lipschitz_x, "lipschitz_t": self.lipschitz_t, "cond_ii": self.cond_ii,
                "tile_counts": self.tile_counts, "growth_ratios": self.growth_ratios,
                "cond_iii": self.cond_iii, "passed": self.passed, "notes": self.notes}


def _grad_bound(fn, pts, step: float) -> float:
    """Largest finite-difference gradient norm of ``fn`` over sample points."""
    x, y = pts[:, 0], pts[:, 1]
    gx = (fn(x + step, y) - fn(x - step, y)) / (2 * step)
    gy = (fn(x, y + step) - fn(x, y - step)) / (2 * step)
    return float(np.max(np.hypot(gx, gy)))


def _k_samples(k: int = 33) -> np.ndarray:
    g = np.linspace(0.0, 1.0, k)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def tile_side(report: FamilyReport, delta: float, M: int, n: int) -> float:
    """Side of square center tiles at level ``n`` keeping the oscillation below ``delta M^-n / 3``.

    Within a level-n square ``|dx| <= sqrt(2) M^-n``; within a tile
    ``|dt| <= sqrt(2) side``; the two contributions must fit the budget.
    """
    h = float(M) ** -n
    room = delta * h / 3.0 - math.sqrt(2.0) * report.lipschitz_x * h
    if room <= 0:
        return 0.0
    if report.lipschitz_t == 0:
        return math.inf
    return room / (math.sqrt(2.0) * report.lipschitz_t)


def tile_centers(family: AlmostLinearFamily, side: float) -> np.ndarray:
    """Representative centers of a regular tiling of ``T`` with the given side."""
    if family.kind == CONSTANT:
        return np.zeros((1, 2))
    if family.points:
        pts = np.asarray(family.T, dtype=float).reshape(-1, 2)
        if not math.isfinite(side):
            return pts[:1]
        cells = np.floor(pts / side).astype(np.int64)
        _, first = np.unique(cells, axis=0, return_index=True)
        return pts[np.sort(first)]
    (x0, x1), (y0, y1) = family.T
    out = []
    for lo, hi in ((x0, x1), (y0, y1)):
        k = 1 if not math.isfinite(side) or hi == lo else max(1, math.ceil((hi - lo) / side - 1e-9))
        edges = np.linspace(lo, hi, k + 1)
        out.append(0.5 * (edges[1:] + edges[:-1]))
    gx, gy = np.meshgrid(out[0], out[1], indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def verify_almost_linear(family: AlmostLinearFamily, J: tuple[float, float], delta: float,
                         n_max: int, M: int = 2, samples: int = 33) -> FamilyReport:
    """Check conditions i-iii numerically; failures are reported, never raised.

    Lipschitz constants are finite-difference maxima over a sample grid,
    inflated by 10%: witnesses rather than proofs.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    pts = _k_samples(samples)
    ts = family.sample_centers()
    alphas = np.concatenate([family.alpha(t, pts[:, 0], pts[:, 1]) for t in ts])
    lo, hi = float(np.min(alphas)), float(np.max(alphas))
    notes = []
    one_side = hi < math.pi / 2 or lo > math.pi / 2
    cond_i = bool(one_side and J[0] <= lo and hi <= J[1])
    if not one_side:
        notes.append("direction field reaches pi/2")
    step = 1e-6
    lip_x = max(_grad_bound(lambda x, y, t=t: family.alpha(t, x, y), pts, step) for t in ts) * 1.1
    if family.kind == CONSTANT:
        lip_t = 0.0
    else:
        grads = []
        for tx, ty in ts:
            gx = family.alpha((tx + step, ty), pts[:, 0], pts[:, 1]) - family.alpha((tx - step, ty), pts[:, 0], pts[:, 1])
            gy = family.alpha((tx, ty + step), pts[:, 0], pts[:, 1]) - family.alpha((tx, ty - step), pts[:, 0], pts[:, 1])
            grads.append(np.max(np.hypot(gx, gy)) / (2 * step))
        lip_t = 1.1 * float(max(grads))
    cond_ii = bool(lip_x <= delta / 3.0)
    report = FamilyReport((lo, hi), tuple(J), cond_i, lip_x, lip_t, cond_ii, notes=notes)
    counts, sides = [], []
    for n in range(n_max + 1):
        side = tile_side(report, delta, M, n)
        sides.append(side)
        counts.append(len(tile_centers(family, side)) if side > 0 else 0)
    report.tile_sides = sides
    report.tile_counts = counts
    report.growth_ratios = [counts[k + 1] / counts[k] for k in range(len(counts) - 1) if counts[k]]
    # exponential growth: ratios bounded by the square of the contraction
    report.cond_iii = bool(all(c > 0 for c in counts)
                           and all(g <= (M + 1) ** 2 for g in report.growth_ratios))
    if not report.cond_iii:
        notes.append("x-oscillation alone exceeds delta M^-n / 3" if 0 in counts else "tile growth too fast")
    return report
