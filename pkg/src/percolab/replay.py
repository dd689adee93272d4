"""Replay of the inductive good-event argument on sampled realizations.

At level ``n`` the net ``X_n`` is ``delta M^{-nr}/3``-dense in ``I1``; the
event is ``V_n(x) >= (3/2)^n`` at every net point, where ``V_n(x)`` counts
retained level-nr codes whose ``I1``-image contains ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .core import RealizationTree
from .errors import LevelRangeError, PreconditionError, ResourceError, ValidationError
from .families import CONSTANT, AlmostLinearFamily, tile_centers, tile_side, verify_almost_linear
from .geometry import MAIN, ProjectionFrame, _lower_ends, project_level
from .operator import CertificateA, IntervalPair

NET_BUDGET = 5_000_000
REPORT_FORMAT = "percolab-replay/1"


# ---------------------------------------------------------------- nets

@dataclass
class NetSpec:
    I1: tuple[float, float]
    delta: float
    n: int
    r: int
    M: int
    points: np.ndarray
    spacing: float
    angles: np.ndarray | None = None
    centers: np.ndarray | None = None

    @property
    def c(self) -> float:
        """``#X_n / M^{nr}`` (the cardinality constant, computed)."""
        return len(self.points) / float(self.M) ** (self.n * self.r)

    @property
    def size(self) -> int:
        k = len(self.points)
        if self.angles is not None:
            k *= len(self.angles)
        if self.centers is not None:
            k *= len(self.centers)
        return k


def regular_net(a: float, b: float, spacing: float) -> np.ndarray:
    """Endpoints of ``[a, b]`` plus equally spaced points, gaps at most ``spacing``."""
    if b <= a:
        return np.array([float(a)])
    k = max(1, math.ceil((b - a) / spacing - 1e-9))
    pts = np.linspace(a, b, k + 1)
    assert np.max(np.diff(pts)) <= spacing * (1 + 1e-9)
    return pts


def build_net(pair: IntervalPair, n: int, r: int, M: int, J: tuple[float, float] | None = None,
              T: AlmostLinearFamily | None = None, tile_report=None, budget: int = NET_BUDGET) -> NetSpec:
    """``X_n`` in ``I1`` (plus ``Y_n`` in ``J`` and center tiles of ``T`` when given)."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    spacing = pair.delta * float(M) ** (-n * r) / 3.0
    pts = regular_net(*pair.I1, spacing)
    net = NetSpec(pair.I1, pair.delta, n, r, M, pts, spacing)
    if J is not None:
        net.angles = regular_net(J[0], J[1], spacing)
    if T is not None:
        if tile_report is None:
            raise ValidationError("center tiles need a family report")
        side = tile_side(tile_report, pair.delta, M, n * r)
        if side <= 0:
            raise PreconditionError("family oscillation exceeds the net budget at this level")
        net.centers = tile_centers(T, side)
    if net.size > budget:
        raise ResourceError(f"net of size {net.size} exceeds the budget of {budget}")
    return net


# ---------------------------------------------------------------- counts

def _closed_count(lo_sorted, h, x, I):
    """Codes with ``x in [lo + h a, lo + h b]``; same arithmetic as the exact sweep."""
    a, b = I
    x = np.asarray(x, dtype=np.float64)
    return (np.searchsorted(lo_sorted, x - h * a, side="right")
            - np.searchsorted(lo_sorted, x - h * b, side="left"))


def _level_lows(tree: RealizationTree, frame: ProjectionFrame, level: int):
    ix, iy = tree.coords(level)
    h = float(tree.M) ** -level
    return np.sort(_lower_ends(frame, ix, iy, h)), h


def count_cover(tree: RealizationTree, x, frame: ProjectionFrame, I: tuple[float, float], level: int):
    """Retained level codes whose closed ``I``-image contains ``x`` (vectorized in ``x``)."""
    if not 0 <= level <= tree.depth:
        raise LevelRangeError(f"level {level} outside 0..{tree.depth}")
    lo, h = _level_lows(tree, frame, level)
    out = _closed_count(lo, h, x, I)
    return out if np.ndim(out) else int(out)


def meets_threshold(count: int, n: int) -> bool:
    """``count >= (3/2)^n`` in exact integer arithmetic."""
    return int(count) * 2 ** n >= 3 ** n


# ---------------------------------------------------------------- reports

@dataclass
class ReplayReport:
    kind: str
    n_max: int
    levels_checked: int = 0
    minima: list[int] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    net_sizes: list[int] = field(default_factory=list)
    passed: bool = False
    failure: dict | None = None
    containment: bool | None = None
    spot_checks: int = 0
    spot_violations: int = 0
    c: float = 0.0
    certificate: dict | None = None

    def _record_level(self, n: int, minimum: int, size: int, where: dict) -> bool:
        self.levels_checked = n
        self.minima.append(int(minimum))
        self.thresholds.append(1.5 ** n)
        self.net_sizes.append(int(size))
        if not meets_threshold(minimum, n):
            self.failure = {"level": n, "minimum": int(minimum), **where}
            return False
        return True

    def to_record(self) -> dict:
        return {"format": REPORT_FORMAT, "kind": self.kind, "n_max": self.n_max,
                "levels_checked": self.levels_checked, "minima": self.minima,
                "thresholds": self.thresholds, "net_sizes": self.net_sizes, "passed": self.passed,
                "failure": self.failure, "containment": self.containment,
                "spot_checks": self.spot_checks, "spot_violations": self.spot_violations,
                "c": self.c, "certificate": self.certificate}


def _check_depth(tree: RealizationTree, cert: CertificateA, n_max: int):
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    if tree.depth < n_max * cert.r:
        raise LevelRangeError(f"tree depth {tree.depth} < n_max * r = {n_max * cert.r}")
    if tree.matrix != cert.matrix:
        raise ValidationError("tree and certificate use different matrices")


def replay_single_angle(tree: RealizationTree, cert: CertificateA, n_max: int) -> ReplayReport:
    """Check ``min_{X_n} V_n >= (3/2)^n`` for ``n = 1..n_max`` at the certificate's angle."""
    _check_depth(tree, cert, n_max)
    pair = cert.pair
    frame = cert.frame
    rep = ReplayReport("single", n_max, certificate=cert.to_record())
    for n in range(1, n_max + 1):
        net = build_net(pair, n, cert.r, tree.M)
        rep.c = max(rep.c, net.c)
        counts = count_cover(tree, net.points, frame, pair.I1, n * cert.r)
        k = int(np.argmin(counts))
        if not rep._record_level(n, counts[k], len(net.points), {"x": float(net.points[k])}):
            return rep
    rep.passed = True
    rep.containment = project_level(tree, n_max * cert.r, frame).contains_interval(*pair.I1)
    return rep


def replay_angle_range(tree: RealizationTree, cert: CertificateA, n_max: int, spot: int = 200,
                       seed: int = 0) -> ReplayReport:
    """Events over ``X_n x Y_n`` for a certificate valid on the angle range ``J``.

    Also spot-checks the neighbour inequality: for net-adjacent ``(x, theta)``
    and ``(y, kappa)``, the ``(I2, kappa)`` count at ``y`` is at least the
    ``(I1, theta)`` count at ``x``.
    """
    _check_depth(tree, cert, n_max)
    pair = cert.pair
    J = cert.angle_range
    rng = np.random.default_rng(seed)
    rep = ReplayReport("range", n_max, certificate=cert.to_record())
    for n in range(1, n_max + 1):
        level = n * cert.r
        net = build_net(pair, n, cert.r, tree.M, J=J)
        rep.c = max(rep.c, net.c)
        best, where = None, {}
        cols = {}
        for th in net.angles:
            frame = ProjectionFrame.at(float(th)) if J[0] != J[1] else cert.frame
            lo, h = _level_lows(tree, frame, level)
            c1 = _closed_count(lo, h, net.points, pair.I1)
            cols[float(th)] = (lo, h, c1)
            k = int(np.argmin(c1))
            if best is None or c1[k] < best:
                best, where = int(c1[k]), {"x": float(net.points[k]), "angle": float(th)}
        # neighbour inequality on random adjacent net pairs
        na, nx = len(net.angles), len(net.points)
        for _ in range(min(spot, na * nx)):
            ia, ix = int(rng.integers(na)), int(rng.integers(nx))
            ja = min(na - 1, max(0, ia + int(rng.integers(-1, 2))))
            jx = min(nx - 1, max(0, ix + int(rng.integers(-1, 2))))
            _, _, c1 = cols[float(net.angles[ia])]
            lo2, h2, _ = cols[float(net.angles[ja])]
            c2 = _closed_count(lo2, h2, net.points[jx], pair.I2)
            rep.spot_checks += 1
            rep.spot_violations += int(c2 < c1[ix])
        if not rep._record_level(n, best, net.size, where):
            return rep
    rep.passed = True
    frames = [cert.frame] if J[0] == J[1] else [ProjectionFrame.at(J[0]), ProjectionFrame.at(J[1])]
    rep.containment = all(project_level(tree, n_max * cert.r, f).contains_interval(*pair.I1)
                          for f in frames)
    return rep


def _family_lows(tree, family: AlmostLinearFamily, t, level: int, cert: CertificateA):
    """Lower image ends with each code projected at ``alpha_t(center of its square)``."""
    ix, iy = tree.coords(level)
    h = float(tree.M) ** -level
    if family.kind == CONSTANT:
        return np.sort(_lower_ends(ProjectionFrame(family.alpha0), ix, iy, h)), h
    al = family.alpha(t, (ix + 0.5) * h, (iy + 0.5) * h)
    c, s = np.cos(al), np.sin(al)
    if cert.frame.codomain == MAIN:
        lo = (s * ix + c * iy) * h / (s + c)
    else:
        k = c / (c - s)
        lo = (1.0 - k) * ix * h - k * (iy + 1.0) * h + k
    return np.sort(lo), h


def replay_family(tree: RealizationTree, family: AlmostLinearFamily, cert: CertificateA, n_max: int,
                  report=None) -> ReplayReport:
    """Events over ``X_n x {tile centers}``, each code using its linearized angle.

    Requires ``verify_almost_linear`` to pass for the certificate's range and gap.
    """
    _check_depth(tree, cert, n_max)
    pair = cert.pair
    J = cert.angle_range
    fam = report or verify_almost_linear(family, J, pair.delta, n_max * cert.r, tree.M)
    if not fam.passed:
        raise PreconditionError(f"family is not almost linear for this certificate: {fam.notes}")
    rep = ReplayReport("family", n_max, certificate=cert.to_record())
    for n in range(1, n_max + 1):
        level = n * cert.r
        net = build_net(pair, n, cert.r, tree.M, T=family, tile_report=fam)
        rep.c = max(rep.c, net.c)
        best, where = None, {}
        for t in net.centers:
            lo, h = _family_lows(tree, family, t, level, cert)
            counts = _closed_count(lo, h, net.points, pair.I1)
            k = int(np.argmin(counts))
            if best is None or counts[k] < best:
                best, where = int(counts[k]), {"x": float(net.points[k]), "t": [float(v) for v in t]}
        if not rep._record_level(n, best, net.size, where):
            return rep
    rep.passed = True
    return rep


# ---------------------------------------------------------------- tail bounds

@dataclass(frozen=True)
class TailBound:
    value: float
    vacuous: bool = False

    def __float__(self):
        return self.value


def hoeffding_tail(k: int, B: float, mu: float, s: float) -> TailBound:
    """``exp(-2 (k mu - s)^2 / (k B^2))`` for a sum of ``k`` variables in ``[0, B]`` with mean ``>= mu``."""
    if k < 1 or not 0 < mu <= B:
        raise ValidationError("need k >= 1 and 0 < mu <= B")
    if s > k * mu:
        return TailBound(1.0, True)
    return TailBound(math.exp(-2.0 * (k * mu - s) ** 2 / (k * B * B)))


@dataclass(frozen=True)
class TailBoundParams:
    B: float
    mu: float
    gammas: tuple[float, ...]
    c: float

    def __post_init__(self):
        if self.B < self.mu:
            raise ValidationError("need B >= mu")


@dataclass
class SuccessBound:
    """Lower bound on the probability that every good event holds.

    ``value`` is the finite product over ``n = 0..n_terms`` (an mpmath number,
    since it underflows doubles).  ``bound_with_tail`` further multiplies by
    ``1 - sum of the remaining linearized terms``, a bound on the infinite product.
    """

    value: mpmath.mpf
    log_value: float
    params: TailBoundParams
    terms: list[float]
    tail: float
    bound_with_tail: mpmath.mpf
    crossover: int | None
    n_terms: int

    def to_record(self) -> dict:
        return {"value": mpmath.nstr(self.value, 17), "log_value": self.log_value,
                "bound_with_tail": mpmath.nstr(self.bound_with_tail, 17), "tail": self.tail,
                "crossover": self.crossover, "n_terms": self.n_terms, "gammas": list(self.params.gammas)}


def _gamma(n: int, B: float, mu: float) -> float:
    k = math.ceil(1.5 ** n - 1e-12)
    return float(hoeffding_tail(k, B, mu, 1.5 ** (n + 1)))


def success_lower_bound(cert: CertificateA, c: float, n_terms: int, tail_terms: int = 400) -> SuccessBound:
    """``prod_{n <= n_terms} (1 - gamma_n)^{c M^{(n+1) r}}`` with per-level Hoeffding ``gamma_n``.

    A deterministic matrix has no deviation, so every ``gamma_n`` is 0.
    """
    if c <= 0 or n_terms < 0:
        raise ValidationError("need c > 0 and n_terms >= 0")
    M, r = cert.matrix.M, cert.r
    B, mu = 2.0 * M ** r, 2.0
    det = cert.matrix.deterministic
    gammas, terms, log_total = [], [], mpmath.mpf(0)
    crossover = None
    for n in range(n_terms + 1):
        g = 0.0 if det else _gamma(n, B, mu)
        gammas.append(g)
        weight = c * mpmath.mpf(M) ** ((n + 1) * r)
        lin = float(weight * g)
        terms.append(lin)
        if crossover is None and lin < 1.0:
            crossover = n
        if g > 0:
            log_total += weight * mpmath.log1p(-mpmath.mpf(g))
    tail = mpmath.mpf(0)
    if not det:
        for n in range(n_terms + 1, n_terms + 1 + tail_terms):
            term = c * mpmath.mpf(M) ** ((n + 1) * r) * _gamma(n, B, mu)
            tail += term
            if term < mpmath.mpf(10) ** -40 * max(tail, mpmath.mpf(10) ** -300):
                break
    value = mpmath.exp(log_total)
    with_tail = value * max(mpmath.mpf(0), 1 - tail)
    return SuccessBound(value, float(log_total), TailBoundParams(B, mu, tuple(gammas), c), terms,
                        float(tail), with_tail, crossover, n_terms)
