"""Exact step and piecewise-linear functions on the diagonal parameter [0, 1]."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError


class StepFunction:
    """Piecewise-constant function with one value per open cell.

    Evaluating at a breakpoint (within ``atol``) returns the minimum of the
    adjacent cells, so ``>=`` checks made on the result are conservative.
    """

    def __init__(self, breakpoints: Sequence[float], cell_values: Sequence[float], atol: float = 1e-12):
        bp = np.asarray(breakpoints, dtype=np.float64)
        vals = np.asarray(cell_values, dtype=np.float64)
        if bp.ndim != 1 or len(bp) < 2:
            raise ValidationError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if len(vals) != len(bp) - 1:
            raise ValidationError("need one value per cell")
        self.breakpoints = bp
        self.cell_values = vals
        self.atol = atol

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        bp, vals = self.breakpoints, self.cell_values
        k = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, len(vals) - 1)
        out = vals[k].copy() if k.ndim else np.array(vals[k])
        near_lo = np.abs(x - bp[k]) <= self.atol
        near_hi = np.abs(x - bp[k + 1]) <= self.atol
        left = vals[np.maximum(k - 1, 0)]
        right = vals[np.minimum(k + 1, len(vals) - 1)]
        out = np.where(near_lo & (k > 0), np.minimum(out, left), out)
        out = np.where(near_hi & (k < len(vals) - 1), np.minimum(out, right), out)
        outside = (x < bp[0] - self.atol) | (x > bp[-1] + self.atol)
        out = np.where(outside, 0.0, out)
        return out if out.ndim else float(out)

    def min_on(self, a: float, b: float) -> tuple[float, float]:
        """Minimum over ``[a, b]`` (cells whose closure meets it) and a point attaining it."""
        bp, vals = self.breakpoints, self.cell_values
        sel = np.flatnonzero((bp[:-1] <= b + self.atol) & (bp[1:] >= a - self.atol))
        if len(sel) == 0:
            return 0.0, a
        k = sel[np.argmin(vals[sel])]
        where = min(max(0.5 * (bp[k] + bp[k + 1]), a), b)
        return float(vals[k]), float(where)

    def integral(self) -> float:
        return float(np.sum(self.cell_values * np.diff(self.breakpoints)))

    def __repr__(self):
        return f"StepFunction({len(self.cell_values)} cells)"


class PiecewiseLinearFunction:
    """Piecewise-linear function through ``(xs[k], ys[k])``.

    ``xs`` is nondecreasing; a repeated abscissa encodes a jump (left value
    first).  Outside ``[xs[0], xs[-1]]`` the function is 0, and the value at
    a jump is the smaller one-sided limit.
    """

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ValidationError("need matching 1-d node arrays with at least two nodes")
        if np.any(np.diff(xs) < 0):
            raise ValidationError("breakpoints must be nondecreasing")
        self.xs = xs
        self.ys = ys

    # aliases for the usual names
    @property
    def breakpoints(self) -> np.ndarray:
        return self.xs

    @property
    def node_values(self) -> np.ndarray:
        return self.ys

    @property
    def continuous(self) -> bool:
        return bool(np.all(np.diff(self.xs) > 0))

    def right(self, x):
        """Right limit at ``x`` (0 at or beyond the last node)."""
        x = np.asarray(x, dtype=np.float64)
        xs, ys = self.xs, self.ys
        k = np.searchsorted(xs, x, side="right") - 1
        inside = (k >= 0) & (k < len(xs) - 1)
        kk = np.clip(k, 0, len(xs) - 2)
        x0, x1 = xs[kk], xs[kk + 1]
        frac = (x - x0) / np.where(x1 > x0, x1 - x0, 1.0)
        val = ys[kk] + frac * (ys[kk + 1] - ys[kk])
        return np.where(inside, val, 0.0)

    def left(self, x):
        """Left limit at ``x`` (0 at or before the first node)."""
        x = np.asarray(x, dtype=np.float64)
        xs, ys = self.xs, self.ys
        k = np.searchsorted(xs, x, side="left")
        inside = (k >= 1) & (k <= len(xs) - 1)
        kk = np.clip(k, 1, len(xs) - 1)
        x0, x1 = xs[kk - 1], xs[kk]
        frac = (x - x0) / np.where(x1 > x0, x1 - x0, 1.0)
        val = ys[kk - 1] + frac * (ys[kk] - ys[kk - 1])
        return np.where(inside, val, 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.xs[0], self.xs[-1]
        l, r = self.left(x), self.right(x)
        val = np.where(x == lo, r, np.where(x == hi, l, np.minimum(l, r)))
        # a jump sitting on a domain end still takes the smaller side
        val = np.where((x == lo) & (self.xs[1] == lo), np.minimum(val, self.ys[0]), val)
        val = np.where((x == hi) & (self.xs[-2] == hi), np.minimum(val, self.ys[-1]), val)
        out = np.where((x < lo) | (x > hi), 0.0, val)
        return out if out.ndim else float(out)

    def node_limits(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct abscissae with left and right limits (domain ends one-sided)."""
        u = np.unique(self.xs)
        l, r = self.left(u), self.right(u)
        l[0] = r[0] if self.xs[1] != self.xs[0] else self.ys[0]
        r[-1] = l[-1] if self.xs[-2] != self.xs[-1] else self.ys[-1]
        return u, l, r

    def scale(self, c: float) -> "PiecewiseLinearFunction":
        return PiecewiseLinearFunction(self.xs, c * self.ys)

    def restrict(self, a: float, b: float) -> "PiecewiseLinearFunction":
        """This function times the indicator of ``[a, b]``, on the same domain."""
        lo, hi = self.xs[0], self.xs[-1]
        inner = np.r_[a, self.xs[(self.xs > a) & (self.xs < b)], b]
        vals = self(inner)
        vals[0], vals[-1] = self.right(a), self.left(b)
        xs = np.r_[lo, a, inner, b, hi]
        ys = np.r_[0.0, 0.0, vals, 0.0, 0.0]
        return PiecewiseLinearFunction(xs, ys)

    def inf_on(self, a: float, b: float) -> tuple[float, float]:
        """Infimum of the one-sided limits over the closed interval ``[a, b]``."""
        inner = self.xs[(self.xs > a) & (self.xs < b)]
        cand = [float(self.right(a)), float(self.left(b))]
        where = [a, b]
        if len(inner):
            l, r = self.left(inner), self.right(inner)
            m = np.minimum(l, r)
            k = int(np.argmin(m))
            cand.append(float(m[k]))
            where.append(float(inner[k]))
        k = int(np.argmin(cand))
        return cand[k], where[k]

    def sup_on(self, a: float, b: float) -> float:
        inner = self.xs[(self.xs > a) & (self.xs < b)]
        vals = [float(self.right(a)), float(self.left(b))]
        if len(inner):
            vals += [float(np.max(self.left(inner))), float(np.max(self.right(inner)))]
        return max(vals)

    def max(self) -> float:
        return float(np.max(self.ys))

    def __repr__(self):
        return f"PiecewiseLinearFunction({len(self.xs)} nodes)"


def pwl_sum(terms: Sequence[tuple[float, PiecewiseLinearFunction]], domain=(0.0, 1.0),
            jump_tol: float = 1e-14) -> PiecewiseLinearFunction:
    """Exact ``sum c_k f_k`` as a piecewise-linear function on ``domain``."""
    lo, hi = domain
    u = np.unique(np.concatenate([[lo, hi]] + [f.xs for _, f in terms]))
    u = u[(u >= lo) & (u <= hi)]
    L = np.zeros(len(u))
    R = np.zeros(len(u))
    for c, f in terms:
        L += c * f.left(u)
        R += c * f.right(u)
    xs, ys = [], []
    scale = max(1.0, float(np.max(np.abs(np.r_[L, R]))) if len(u) else 1.0)
    for k, x in enumerate(u):
        if k == 0:
            xs.append(x); ys.append(R[k])
        elif k == len(u) - 1:
            xs.append(x); ys.append(L[k])
        elif abs(L[k] - R[k]) > jump_tol * scale:
            xs += [x, x]; ys += [L[k], R[k]]
        else:
            xs.append(x); ys.append(0.5 * (L[k] + R[k]))
    return PiecewiseLinearFunction(xs, ys)


def pwl_combine(f: PiecewiseLinearFunction, g: PiecewiseLinearFunction, a: float = 1.0, b: float = -1.0):
    """``a f + b g`` on the union of both domains."""
    lo = min(f.xs[0], g.xs[0])
    hi = max(f.xs[-1], g.xs[-1])
    return pwl_sum([(a, f), (b, g)], domain=(lo, hi))
