"""The expected operator F_alpha and exact certification of Condition A.

The certificate is always the exact sweep minimum of ``F^r 1_{I1}`` over
``I2``: the Condition-B route (tent function, interval derivation, r from
the doubling inequality) only proposes candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import ProbabilityMatrix, SquareCode
from .errors import (DerivationError, DomainError, PreconditionError, ResourceError,
                     ValidationError)
from .functions import PiecewiseLinearFunction, StepFunction, pwl_combine, pwl_sum
from .geometry import Angle, ProjectionFrame, _lower_ends, project_point

DEFAULT_BUDGET = 2 ** 24
SAFETY = 1e-9
SNAP = 1e-12
ETA_FLOOR = 1e-6
CERT_FORMAT = "percolab-certificate/1"


# ---------------------------------------------------------------- intervals

@dataclass(frozen=True)
class IntervalPair:
    """Nested closed intervals ``I1 ⊂ int I2 ⊂ int [0, 1]``."""

    I1: tuple[float, float]
    I2: tuple[float, float]

    def __post_init__(self):
        a1, b1 = (float(v) for v in self.I1)
        a2, b2 = (float(v) for v in self.I2)
        object.__setattr__(self, "I1", (a1, b1))
        object.__setattr__(self, "I2", (a2, b2))
        if not (0.0 < a2 < a1 <= b1 < b2 < 1.0):
            raise ValidationError(f"need 0 < {a2} < {a1} <= {b1} < {b2} < 1")

    @property
    def delta(self) -> float:
        return min(self.I1[0] - self.I2[0], self.I2[1] - self.I1[1])

    def enlarged(self, by: float) -> "IntervalPair":
        """Same ``I2``, with ``I1`` grown by ``by`` on both sides."""
        return IntervalPair((self.I1[0] - by, self.I1[1] + by), self.I2)


# ---------------------------------------------------------------- level-r codes

def expansion_map(code: SquareCode, frame: ProjectionFrame) -> tuple[float, float]:
    """``(lo, h)`` such that ``psi(x) = (x - lo) / h`` inverts ``Pi_alpha o phi_code`` on the diagonal.

    ``Pi_alpha o phi_code`` is ``u -> lo + h u`` with ``h = M**-n``, so the
    expansion has ratio ``M**n`` and maps the square's image onto [0, 1].
    """
    ix, iy = code.coords
    h = float(code.M) ** -code.level
    return float(_lower_ends(frame, ix, iy, h)), h


def _check_budget(M: int, r: int, budget: int):
    if r < 0:
        raise ValidationError("r must be nonnegative")
    if M ** (2 * r) > budget:
        raise ResourceError(f"level {r} has {M ** (2 * r)} codes, over the budget of {budget}")


def level_weights(matrix: ProbabilityMatrix, r: int) -> np.ndarray:
    """``W[ix, iy] = prod_k p[i_k, j_k]`` for all level-r codes (Kronecker power)."""
    w = np.ones((1, 1))
    for _ in range(r):
        w = np.kron(w, matrix.p)
    return w


def level_lower_ends(frame: ProjectionFrame, M: int, r: int) -> np.ndarray:
    """Lower image ends of all level-r squares, indexed ``[ix, iy]``."""
    n = M ** r
    idx = np.arange(n, dtype=np.float64)
    return _lower_ends(frame, idx[:, None], idx[None, :], float(M) ** -r)


class RangeSums:
    """``w[i:j].sum()`` for a fixed weight array, without cancelling a large running total.

    A plain cumulative sum rounds at the size of the whole mass, and the
    difference of two such prefixes keeps that error however short the range.
    Here the running total restarts every ``block`` entries, and the block
    offsets are summed exactly and stored as a double-double pair.
    """

    def __init__(self, w: np.ndarray, block: int = 1024):
        n = len(w)
        nb = n // block + 1
        pad = np.zeros(nb * block)
        pad[:n] = w
        c = np.cumsum(pad.reshape(nb, block), axis=1)
        self.block = block
        self.inner = np.concatenate([np.zeros((nb, 1)), c[:, :-1]], axis=1).ravel()
        hi, lo = np.empty(nb), np.empty(nb)
        total = Fraction(0)
        for b, t in enumerate(c[:, -1].tolist()):
            hi[b] = float(total)
            lo[b] = float(total - Fraction(hi[b]))
            total += Fraction(t)
        self.hi, self.lo = hi, lo

    def range(self, i, j):
        """Sum of ``w[i:j]`` (elementwise over index arrays, ``i <= j``)."""
        i, j = np.asarray(i), np.asarray(j)
        bi, bj = i // self.block, j // self.block
        return (self.hi[bj] - self.hi[bi]) + (self.lo[bj] - self.lo[bi]) + (self.inner[j] - self.inner[i])


class LevelProfile:
    """Sorted image lower ends of every level-r code, with range sums of weights.

    ``F^r 1_[a,b](x)`` is the total weight of codes with
    ``lo in [x - h b, x - h a]``, which two binary searches answer exactly
    (closed membership).
    """

    def __init__(self, matrix: ProbabilityMatrix, frame: ProjectionFrame, r: int,
                 budget: int = DEFAULT_BUDGET):
        _check_budget(matrix.M, r, budget)
        self.matrix, self.frame, self.r = matrix, frame, r
        self.h = float(matrix.M) ** -r
        lo = level_lower_ends(frame, matrix.M, r).ravel()
        order = np.argsort(lo, kind="stable")
        self.lo = lo[order]
        del lo
        self.w = level_weights(matrix, r).ravel()[order]
        del order
        self.sums = RangeSums(self.w)

    def __len__(self):
        return len(self.lo)

    def count(self, x, a: float, b: float):
        x = np.asarray(x, dtype=np.float64)
        # codes [0, S) have started at x and codes [0, E) have ended before it
        S = np.searchsorted(self.lo, x - self.h * a, side="right")
        E = np.searchsorted(self.lo, x - self.h * b, side="left")
        return self.sums.range(E, S)

    def sweep(self, a: float, b: float) -> StepFunction:
        return _sweep(self.lo + self.h * a, self.lo + self.h * b, self.w, presorted=True, sums=self.sums)

    def min_on(self, I1: tuple[float, float], I2: tuple[float, float],
               chunk: int = 1 << 20) -> tuple[float, float]:
        """``sweep(*I1).min_on(*I2)`` computed in chunks of breakpoints.

        Only breakpoints near ``I2`` are visited, and the last snap group of a
        chunk is carried into the next one, so the result matches the full sweep.
        """
        a, b = I1
        x0, x1 = I2[0] - SNAP, I2[1] + SNAP
        h, lo, sums = self.h, self.lo, self.sums
        i0 = int(np.searchsorted(lo, x0 - h * a, side="left"))
        i1 = int(np.searchsorted(lo, x1 - h * a, side="right"))
        j0 = int(np.searchsorted(lo, x0 - h * b, side="left"))
        j1 = int(np.searchsorted(lo, x1 - h * b, side="right"))
        # cell just left of the window: started before it and not yet ended
        best, where = float(sums.range(j0, i0)), float(I2[0])
        done_s, done_e = i0, j0
        cpos, ctyp = np.empty(0), np.empty(0, dtype=bool)
        cuts = np.linspace(x0, x1, max(1, (i1 - i0 + j1 - j0) // chunk) + 1)
        for k in range(len(cuts) - 1):
            last = k == len(cuts) - 2
            ii = i1 if last else int(np.clip(np.searchsorted(lo, cuts[k + 1] - h * a), i0, i1))
            jj = j1 if last else int(np.clip(np.searchsorted(lo, cuts[k + 1] - h * b), j0, j1))
            s = lo[i0:ii] + h * a
            e = lo[j0:jj] + h * b
            pos = np.empty(len(s) + len(e))
            typ = np.zeros(len(pos), dtype=bool)
            at = np.arange(len(s)) + np.searchsorted(e, s, side="left")
            pos[at], typ[at] = s, True
            at = np.arange(len(e)) + np.searchsorted(s, e, side="right")
            pos[at] = e
            pos, typ = np.r_[cpos, pos], np.r_[ctyp, typ]
            i0, j0 = ii, jj
            if not len(pos):
                continue
            first = np.flatnonzero(np.r_[True, np.diff(pos) > SNAP])
            if not last:
                cpos, ctyp = pos[first[-1]:], typ[first[-1]:]
                pos, typ, first = pos[:first[-1]], typ[:first[-1]], first[:-1]
                if not len(first):
                    continue
            ends_at = np.r_[first[1:], len(pos)] - 1
            n_s = np.cumsum(typ)
            n_e = np.arange(1, len(pos) + 1) - n_s
            vals = sums.range(done_e + n_e[ends_at], done_s + n_s[ends_at])
            done_s, done_e = done_s + int(n_s[-1]), done_e + int(n_e[-1])
            m = int(np.argmin(vals))
            if vals[m] < best:
                nxt = pos[first[m + 1]] if m + 1 < len(first) else (cpos[0] if len(cpos) else pos[first[m]])
                best, where = float(vals[m]), float(0.5 * (pos[first[m]] + nxt))
        return best, min(max(where, I2[0]), I2[1])


def _sweep(starts, ends, w, presorted=False, sums: RangeSums | None = None) -> StepFunction:
    """Weighted coverage count of ``[starts_k, ends_k]`` as a step function on [0, 1].

    All intervals share one width, so sorted starts give sorted ends and the
    event list is a merge of two sorted runs rather than a full sort.  The
    value of a cell is the weight of the codes started but not yet ended,
    a contiguous range in start order.
    """
    if not presorted:
        order = np.argsort(starts, kind="stable")
        starts, ends, w = starts[order], ends[order], w[order]
        del order
    if sums is None:
        sums = RangeSums(w)
    n = len(starts)
    pos = np.empty(2 * n + 2)
    kind = np.zeros(2 * n + 2, dtype=np.int8)  # 1 start, -1 end, 0 the two sentinels
    pos[0], pos[-1] = 0.0, 1.0
    at = np.arange(1, n + 1) + np.searchsorted(ends, starts, side="left")
    pos[at] = np.clip(starts, 0.0, 1.0)
    kind[at] = 1
    at = np.arange(1, n + 1) + np.searchsorted(starts, ends, side="right")
    pos[at] = np.clip(ends, 0.0, 1.0)
    kind[at] = -1
    del at
    first = np.flatnonzero(np.r_[True, np.diff(pos) > SNAP])
    reps = pos[first]
    if pos[-1] == 1.0:
        reps[-1] = 1.0
    del pos
    ends_at = np.r_[first[1:], len(kind)][:-1] - 1
    n_s = np.cumsum(kind == 1)[ends_at]
    n_e = np.cumsum(kind == -1)[ends_at]
    del kind, first
    return StepFunction(reps, sums.range(n_e, n_s))


def pushforward_indicator(matrix: ProbabilityMatrix, frame: ProjectionFrame, I1: tuple[float, float],
                          r: int, budget: int = DEFAULT_BUDGET) -> StepFunction:
    """``F^r 1_{I1}`` exactly, by sweeping the images of ``I1`` under all level-r codes."""
    a, b = I1
    if not 0.0 <= a <= b <= 1.0:
        raise ValidationError("I1 must be a subinterval of [0, 1]")
    _check_budget(matrix.M, r, budget)
    h = float(matrix.M) ** -r
    lo = level_lower_ends(frame, matrix.M, r).ravel()
    w = level_weights(matrix, r).ravel()
    return _sweep(lo + h * a, lo + h * b, w)


# ---------------------------------------------------------------- F on functions

def apply_F(matrix: ProbabilityMatrix, frame: ProjectionFrame,
            f: PiecewiseLinearFunction) -> PiecewiseLinearFunction:
    """``F f(x) = sum_{i,j} p_ij f(psi_ij(x))`` over the squares whose image holds ``x``."""
    M = matrix.M
    terms = []
    for i in range(M):
        for j in range(M):
            if matrix.p[i, j] == 0.0:
                continue
            lo = float(_lower_ends(frame, i, j, 1.0 / M))
            xs = lo + f.xs / M
            # corner children end on the diagonal's ends; rounding must not open a sliver there
            xs = np.where(np.abs(xs) < SNAP, 0.0, np.where(np.abs(xs - 1.0) < SNAP, 1.0, xs))
            terms.append((matrix.p[i, j], PiecewiseLinearFunction(xs, f.ys)))
    if not terms:
        return PiecewiseLinearFunction([0.0, 1.0], [0.0, 0.0])
    return pwl_sum(terms)


def chord_length(frame: ProjectionFrame, u) -> np.ndarray:
    """Length of the intersection of K with the projection line through diagonal point ``u``."""
    px, py = frame.diagonal_point(u)
    dx, dy = frame.direction()
    lo = np.full(np.shape(px), -np.inf)
    hi = np.full(np.shape(px), np.inf)
    for p, d in ((px, dx), (py, dy)):
        s0, s1 = (0.0 - p) / d, (1.0 - p) / d
        lo = np.maximum(lo, np.minimum(s0, s1))
        hi = np.minimum(hi, np.maximum(s0, s1))
    return np.maximum(hi - lo, 0.0)


def build_tent(frame: ProjectionFrame) -> PiecewiseLinearFunction:
    """Chord-length function ``u -> |l(u) ∩ K|``; linear between the projected corners."""
    corners = [project_point(frame, c) for c in ((0, 0), (1, 0), (0, 1), (1, 1))]
    inner = [u for u in corners if 1e-12 < u < 1.0 - 1e-12]
    nodes = np.unique(np.r_[0.0, inner, 1.0])
    vals = chord_length(frame, nodes)
    vals[0] = vals[-1] = 0.0
    return PiecewiseLinearFunction(nodes, vals)


@dataclass
class ConditionBReport:
    margin: float
    passes: bool
    eps: float
    argmin: float
    ratio_min: float


def _ratio_min(g: PiecewiseLinearFunction, f: PiecewiseLinearFunction):
    """Exact ``min g/f`` on (0, 1): both are linear on each cell, so a cell's
    extremes sit at its ends; ``0/0`` ends are resolved by the slope ratio."""
    u = np.unique(np.r_[g.xs, f.xs])
    u = u[(u >= 0.0) & (u <= 1.0)]
    mids = 0.5 * (u[1:] + u[:-1])
    u = np.unique(np.r_[u, mids])
    fl, fr = f.left(u), f.right(u)
    gl, gr = g.left(u), g.right(u)
    interior = slice(1, len(u) - 1)
    if np.any(fl[interior] <= 0.0) or np.any(fr[interior] <= 0.0):
        k = 1 + int(np.argmin(np.minimum(fl[interior], fr[interior])))
        raise DomainError(f"f vanishes in the interior at u={u[k]}")
    best, where = np.inf, 0.5
    ratios_r = gr[1:-1] / fr[1:-1]
    ratios_l = gl[1:-1] / fl[1:-1]
    for ratios in (ratios_r, ratios_l):
        if len(ratios):
            k = int(np.argmin(ratios))
            if ratios[k] < best:
                best, where = float(ratios[k]), float(u[1 + k])
    # limits at the two ends of the diagonal
    for k0, k1 in ((0, 1), (len(u) - 1, len(u) - 2)):
        fv = fr[k0] if k0 == 0 else fl[k0]
        gv = gr[k0] if k0 == 0 else gl[k0]
        if fv > 0:
            lim = gv / fv
        else:
            f_near = fl[k1] if k0 == 0 else fr[k1]
            g_near = gl[k1] if k0 == 0 else gr[k1]
            if gv > 1e-15 * max(1.0, abs(g_near)):
                lim = np.inf
            else:
                lim = (g_near - gv) / (f_near - fv)
        if lim < best:
            best, where = float(lim), float(u[k0])
    return best, where


def check_condition_B(matrix: ProbabilityMatrix, frame: ProjectionFrame,
                      f: PiecewiseLinearFunction | None = None, eps: float = 0.0) -> ConditionBReport:
    """Achieved ``eps`` in ``F f >= (1 + eps) f``; ``f`` defaults to the tent."""
    f = build_tent(frame) if f is None else f
    g = apply_F(matrix, frame, f)
    m, where = _ratio_min(g, f)
    margin = m - 1.0
    return ConditionBReport(margin, margin >= eps, eps, where, m)


def condition_B_ratio(matrix: ProbabilityMatrix, frame: ProjectionFrame, u: float,
                      f: PiecewiseLinearFunction | None = None) -> float:
    """``F f(u) / f(u)`` at an interior point."""
    f = build_tent(frame) if f is None else f
    g = apply_F(matrix, frame, f)
    return float(g(u)) / float(f(u))


# ---------------------------------------------------------------- B => A

def grid_projections(frame: ProjectionFrame, M: int) -> np.ndarray:
    """Projections of the mesh-1/M grid points."""
    k = np.arange(M + 1) / M
    a, b, c = frame.coefficients
    return np.unique(a * k[:, None] + b * k[None, :] + c)


def derive_intervals(f: PiecewiseLinearFunction, eps: float, matrix: ProbabilityMatrix,
                     frame: ProjectionFrame) -> IntervalPair:
    """Nested intervals from a Condition-B witness, for the largest dyadic ``eta`` that works.

    ``eta`` must satisfy ``eps/2 * min f near W1 > (M+1)^2 * sup f near W0``
    (neighbourhoods of radius ``eta/M``), and the conclusion
    ``F(f 1_{I1}) >= (1 + eps/2) f`` on ``I2`` is re-checked exactly.
    """
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    report = check_condition_B(matrix, frame, f)
    if report.margin < eps:
        raise PreconditionError(f"Condition B margin {report.margin:.6g} is below eps={eps}")
    M = matrix.M
    W = grid_projections(frame, M)
    W1 = W[(W > 1e-12) & (W < 1 - 1e-12)]
    eta = 0.5
    while eta >= ETA_FLOOR:
        r_ = eta / M
        near_w1 = min(f.inf_on(max(0.0, w - r_), min(1.0, w + r_))[0] for w in W1) if len(W1) else np.inf
        near_w0 = max(f.sup_on(0.0, r_), f.sup_on(1.0 - r_, 1.0))
        if eta < 0.5 and 0.5 * eps * near_w1 > (M + 1) ** 2 * near_w0:
            pair = IntervalPair((eta, 1.0 - eta), (r_, 1.0 - r_))
            if _restricted_expands(matrix, frame, f, eps, pair):
                return pair
        eta /= 2.0
    raise DerivationError(f"no eta >= {ETA_FLOOR} satisfies the interval selection")


def _restricted_expands(matrix, frame, f, eps, pair) -> bool:
    """``F(f 1_{I1}) >= (1 + eps/2) f`` on ``I2``."""
    g1 = f.restrict(*pair.I1)
    Fg1 = apply_F(matrix, frame, g1)
    diff = pwl_combine(Fg1, f, 1.0, -(1.0 + 0.5 * eps))
    low, _ = diff.inf_on(*pair.I2)
    return low >= -1e-12


def derive_r(pair: IntervalPair, f: PiecewiseLinearFunction, eps: float) -> int:
    """Smallest r with ``(1 + eps/2)^r >= 2 max_{I1} f / min_{I2} f``."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    fmin, _ = f.inf_on(*pair.I2)
    if fmin <= 0:
        raise PreconditionError("f must be positive on I2")
    target = 2.0 * f.sup_on(*pair.I1) / fmin
    r, acc = 1, 1.0 + 0.5 * eps
    while acc < target:
        r += 1
        acc *= 1.0 + 0.5 * eps
    return r


# ---------------------------------------------------------------- certificates

@dataclass
class CertificateA:
    """Exact finite witness of ``F^r 1_{I1} >= 2`` on ``I2`` (at an angle or across ``J``)."""

    matrix: ProbabilityMatrix
    angle: Angle
    pair: IntervalPair
    r: int
    min_value: float
    argmin: float
    J: tuple[float, float] | None = None
    robustness_radius: float | None = None
    heuristic: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.min_value - 2.0

    @property
    def alpha(self) -> float:
        return self.angle.alpha

    @property
    def frame(self) -> ProjectionFrame:
        return ProjectionFrame(self.angle)

    @property
    def angle_range(self) -> tuple[float, float]:
        return self.J if self.J is not None else (self.alpha, self.alpha)

    def to_record(self) -> dict:
        return {
            "format": CERT_FORMAT,
            "status": "certified",
            "matrix": self.matrix.to_rows(),
            "alpha": self.alpha,
            "alpha_pi": str(self.angle.pi_fraction) if self.angle.pi_fraction is not None else None,
            "J": list(self.J) if self.J is not None else None,
            "robustness_radius": self.robustness_radius,
            "I1": list(self.pair.I1),
            "I2": list(self.pair.I2),
            "delta": self.pair.delta,
            "r": self.r,
            "min_value": self.min_value,
            "margin": self.margin,
            "argmin": self.argmin,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CertificateA":
        if rec.get("format") != CERT_FORMAT or rec.get("status") != "certified":
            raise ValidationError("not a certificate record")
        angle = (Angle(0.0, Fraction(rec["alpha_pi"])) if rec.get("alpha_pi") else Angle(rec["alpha"]))
        return cls(ProbabilityMatrix(np.array(rec["matrix"])), angle,
                   IntervalPair(tuple(rec["I1"]), tuple(rec["I2"])), int(rec["r"]),
                   float(rec["min_value"]), float(rec.get("argmin", 0.5)),
                   tuple(rec["J"]) if rec.get("J") else None, rec.get("robustness_radius"))


@dataclass
class NotFound:
    """No certificate up to ``r_max``; inconclusive about Condition A itself."""

    angle: Angle
    r_max: int
    reason: str
    best_min_value: float = 0.0

    def to_record(self) -> dict:
        return {"format": CERT_FORMAT, "status": "not-found", "alpha": self.angle.alpha,
                "alpha_pi": str(self.angle.pi_fraction) if self.angle.pi_fraction is not None else None,
                "r_max": self.r_max, "reason": self.reason, "best_min_value": self.best_min_value}


def sweep_min(matrix: ProbabilityMatrix, frame: ProjectionFrame, pair: IntervalPair, r: int,
              budget: int = DEFAULT_BUDGET, profile: LevelProfile | None = None) -> tuple[float, float]:
    """Exact minimum of ``F^r 1_{I1}`` over ``I2`` (breakpoints take the smaller side)."""
    prof = profile or LevelProfile(matrix, frame, r, budget)
    return prof.min_on(pair.I1, pair.I2)


_A_GRID = np.round(np.arange(0.01, 0.5, 0.01), 10)
_DELTAS = (0.2, 0.15, 0.1, 0.075, 0.05, 0.03, 0.02, 0.01, 0.005)
_X_GRID = (np.arange(1000) + 0.5) / 1000


def _grid_candidates(prof: LevelProfile, cushion: float, limit: int = 12) -> list[IntervalPair]:
    """Pairs whose coarse-grid minimum clears ``2 + cushion``, best (largest delta) first."""
    x = _X_GRID
    h = prof.h
    Ca = np.stack([np.searchsorted(prof.lo, x - h * a, side="right") for a in _A_GRID])
    right_ends = 1.0 - _A_GRID
    Cb = np.stack([np.searchsorted(prof.lo, x - h * b, side="left") for b in right_ends])
    g = prof.sums.range(Cb[None, :, :], Ca[:, None, :])
    out = []
    for d in _DELTAS:
        lo_ok = _A_GRID - d > 1e-3
        hi_ok = right_ends + d < 1 - 1e-3
        if not lo_ok.any() or not hi_ok.any():
            continue
        inside = ((x[None, None, :] >= (_A_GRID - d)[:, None, None])
                  & (x[None, None, :] <= (right_ends + d)[None, :, None]))
        gm = np.where(inside, g, np.inf).min(axis=2)
        valid = lo_ok[:, None] & hi_ok[None, :] & (_A_GRID[:, None] < right_ends[None, :])
        gm = np.where(valid, gm, -np.inf)
        ia, ib = np.nonzero(gm >= 2.0 + cushion)
        order = np.argsort(-gm[ia, ib], kind="stable")
        for k in order[:limit]:
            a, b = float(_A_GRID[ia[k]]), float(right_ends[ib[k]])
            out.append(IntervalPair((a, b), (a - d, b + d)))
        if len(out) >= limit:
            break
    return out[:limit]


def b_route(matrix: ProbabilityMatrix, frame: ProjectionFrame) -> dict:
    """Tent-function proposal: Condition-B margin, derived pair and doubling r."""
    tent = build_tent(frame)
    rep = check_condition_B(matrix, frame, tent)
    out = {"eps": rep.margin, "condition_B": rep.margin > 0}
    if rep.margin <= 0:
        return out
    try:
        pair = derive_intervals(tent, rep.margin, matrix, frame)
    except DerivationError as exc:
        out["error"] = str(exc)
        return out
    out["pair"] = pair
    out["r"] = derive_r(pair, tent, rep.margin)
    return out


def certify_A(matrix: ProbabilityMatrix, frame: ProjectionFrame, pair: IntervalPair | None = None,
              r_max: int = 8, budget: int = DEFAULT_BUDGET, safety: float = SAFETY,
              use_b_route: bool = True) -> CertificateA | NotFound:
    """Search the smallest ``r <= r_max`` with an exactly verified pair.

    Raises ``ResourceError`` if the search would need a level beyond the budget
    before succeeding; returns ``NotFound`` if every level up to ``r_max`` fails.
    """
    if not isinstance(frame, ProjectionFrame):
        frame = ProjectionFrame.at(frame)
    proposal = b_route(matrix, frame) if (use_b_route and pair is None) else {}
    best = -np.inf
    for r in range(1, r_max + 1):
        prof = LevelProfile(matrix, frame, r, budget)
        if pair is not None:
            cands = [pair]
        else:
            cands = [proposal["pair"]] if "pair" in proposal else []
            cands += (_grid_candidates(prof, 0.02) or _grid_candidates(prof, safety)
                      or _grid_candidates(prof, -np.inf, limit=1))
        for cand in cands:
            mv, where = prof.min_on(cand.I1, cand.I2)
            best = max(best, mv)
            if mv >= 2.0 + safety:
                heur = {k: v for k, v in proposal.items() if k != "pair"}
                if "pair" in proposal:
                    heur["pair"] = [list(proposal["pair"].I1), list(proposal["pair"].I2)]
                return CertificateA(matrix, frame.angle, cand, r, float(mv), float(where), heuristic=heur)
    return NotFound(frame.angle, r_max, "no pair passed the exact sweep", float(best))


def _component(alpha: float) -> tuple[float, float]:
    return (0.0, math.pi / 2) if alpha < math.pi / 2 else (math.pi / 2, math.pi)


def _lower_shift(matrix, r, theta0, theta1) -> float:
    """Largest movement of a level-r image lower end between two angles."""
    M = matrix.M
    a = level_lower_ends(ProjectionFrame.at(theta0), M, r)
    b = level_lower_ends(ProjectionFrame.at(theta1), M, r)
    return float(np.max(np.abs(a - b)))


def robustness_extend(cert: CertificateA, frame: ProjectionFrame | None = None,
                      budget: int = DEFAULT_BUDGET, safety: float = SAFETY) -> CertificateA:
    """Widen a point certificate to ``J = [alpha - rho, alpha + rho]``, ``rho = delta M^-r / 3``.

    ``I1`` grows by ``delta/2``.  Both ends of ``J`` are re-verified by exact
    sweeps; ``rho`` halves on failure.  Image ends move monotonically in the
    angle, so the end-point shift bound also covers the inside of ``J``.
    """
    alpha = cert.alpha
    M, r = cert.matrix.M, cert.r
    delta = cert.pair.delta
    wide = cert.pair.enlarged(delta / 2.0)
    lo_c, hi_c = _component(alpha)
    rho = delta * float(M) ** -r / 3.0
    rho = min(rho, 0.5 * (alpha - lo_c), 0.5 * (hi_c - alpha))
    h = float(M) ** -r
    while rho >= 1e-9:
        ends = (alpha - rho, alpha + rho)
        mins = [sweep_min(cert.matrix, ProjectionFrame.at(t), wide, r, budget) for t in ends]
        shift = max(_lower_shift(cert.matrix, r, alpha, t) for t in ends)
        if all(m >= 2.0 + safety for m, _ in mins):
            k = int(np.argmin([m for m, _ in mins]))
            heur = dict(cert.heuristic)
            heur.update(containment_shift=shift, containment_ok=shift <= h * delta / 2.0,
                        endpoint_min_values=[m for m, _ in mins])
            return CertificateA(cert.matrix, cert.angle, wide, r, float(mins[k][0]), float(mins[k][1]),
                                J=ends, robustness_radius=rho, heuristic=heur)
        rho /= 2.0
    raise DerivationError("robustness radius fell below 1e-9")


def certify_range(matrix: ProbabilityMatrix, a: float, b: float, pair: IntervalPair, r: int,
                  budget: int = DEFAULT_BUDGET, safety: float = SAFETY) -> CertificateA | None:
    """Certify one ``(I1 + delta/2, I2, r)`` on the whole angle range ``[a, b]``.

    ``(I1, I2, r)`` is checked exactly on a grid of spacing ``2 rho``; each grid
    check extends to ``rho`` around it by robustness.
    """
    delta = pair.delta
    rho = delta * float(matrix.M) ** -r / 3.0
    lo_c, hi_c = _component(a)
    if not (lo_c < a - rho and b + rho < hi_c and b < hi_c and a <= b):
        return None
    n = max(1, int(math.ceil((b - a) / (2 * rho))))
    grid = np.linspace(a, b, n + 1) if b > a else np.array([a])
    worst, where, at = np.inf, 0.5, a
    for t in grid:
        mv, w = sweep_min(matrix, ProjectionFrame.at(float(t)), pair, r, budget)
        if mv < 2.0 + safety:
            return None
        if mv < worst:
            worst, where, at = mv, w, float(t)
    step = (b - a) / n if b > a else 0.0
    radius = max(step / 2.0, 0.0)
    J = (float(a) - (rho - radius), float(b) + (rho - radius)) if radius <= rho else None
    if J is None:
        return None
    return CertificateA(matrix, Angle(0.5 * (a + b)), pair.enlarged(delta / 2.0), r, float(worst), float(where),
                        J=J, robustness_radius=rho, heuristic={"grid_points": len(grid), "worst_angle": at})


@dataclass
class Tiling:
    pieces: list[CertificateA]
    complete: bool
    failure_at: float | None = None


def tile_angle_range(matrix: ProbabilityMatrix, a: float, b: float, r_max: int = 8,
                     budget: int = DEFAULT_BUDGET) -> Tiling:
    """Greedy cover of ``[a, b]`` by closed angle intervals, each with one shared ``(I1, I2, r)``."""
    if a > b:
        raise ValidationError("need a <= b")
    lo_c, hi_c = _component(a)
    if not (lo_c < a and b < hi_c):
        raise DomainError("[a, b] must lie inside one component of (0, pi/2) ∪ (pi/2, pi)")
    pieces = []
    start = a
    while True:
        found = certify_A(matrix, ProjectionFrame.at(start), r_max=r_max, budget=budget)
        if isinstance(found, NotFound):
            return Tiling(pieces, False, start)
        pair, r = found.pair, found.r
        delta = pair.delta
        rho = delta * float(matrix.M) ** -r / 3.0
        rho = min(rho, 0.5 * (start - lo_c), 0.5 * (hi_c - start))
        last = start
        worst, where = found.min_value, found.argmin
        while last + rho < b:
            t = last + 2 * rho
            if not (t + rho < hi_c):
                break
            mv, w = sweep_min(matrix, ProjectionFrame.at(t), pair, r, budget)
            if mv < 2.0 + SAFETY:
                break
            if mv < worst:
                worst, where = mv, w
            last = t
        J = (start - rho, last + rho)
        pieces.append(CertificateA(matrix, Angle(0.5 * (J[0] + J[1])), pair.enlarged(delta / 2.0), r,
                                   float(worst), float(where), J=J, robustness_radius=rho,
                                   heuristic={"base_angle": start, "grid_end": last}))
        if last + rho >= b:
            return Tiling(pieces, True)
        start = last + rho
