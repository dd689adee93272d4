"""Monte Carlo campaigns: survival, shadow lengths, replays, coverage and self-similarity."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .core import (ProbabilityMatrix, RealizationTree, _check_depth, _children, level_offset,
                   survival_flags)
from .errors import DomainError, InsufficientSampleError, ValidationError
from .geometry import (HORIZONTAL, VERTICAL, Angle, ProjectionFrame, axis_projection_cover,
                       project_level)
from .operator import CertificateA
from .replay import replay_single_angle

CAMPAIGN_FORMAT = "percolab-campaign/1"
DEFAULT_MAX_CODES = 1 << 22


@dataclass
class CampaignConfig:
    """One campaign.  ``angles`` holds radians, ``Angle`` objects or the axis markers."""

    matrix: ProbabilityMatrix
    depth: int
    trials: int
    seed: int = 0
    angles: Sequence = ()
    thresholds: Sequence[float] = ()
    condition_on_survival: bool = False
    max_attempts: int | None = None
    max_codes: int = DEFAULT_MAX_CODES
    certificate: CertificateA | None = None
    replay_levels: int = 1
    csv_path: str | None = None
    jsonl_path: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        _check_depth(self.matrix.M, self.depth)
        for a in self.angles:
            if a in (HORIZONTAL, VERTICAL):
                continue
            if not Angle.of(a).in_D:
                raise ValidationError(f"angle {a} is outside (0, pi/2) ∪ (pi/2, pi); use an axis marker")

    def angle_labels(self) -> list[str]:
        return [a if isinstance(a, str) else f"{Angle.of(a).alpha:.12g}" for a in self.angles]


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: list[dict]
    summary: dict
    truncated: bool = False


def _grow(matrix: ProbabilityMatrix, depth: int, seed: int, max_codes: int):
    """``sample_tree`` that stops at the first level over ``max_codes`` (flagged as truncated)."""
    key = rng.stream_key(seed)
    ix = [np.zeros(1, dtype=np.int64)]
    iy = [np.zeros(1, dtype=np.int64)]
    parent = [np.full(1, -1, dtype=np.int64)]
    M2 = matrix.M ** 2
    for n in range(depth):
        if len(ix[n]) * M2 > max_codes:
            return RealizationTree(matrix, n, seed, ix, iy, parent), True
        cix, ciy, keep = _children(matrix, key, n, ix[n], iy[n])
        idx = np.flatnonzero(keep)
        ix.append(cix[idx])
        iy.append(ciy[idx])
        parent.append(idx // M2)
    return RealizationTree(matrix, depth, seed, ix, iy, parent), False


def _longest(tree: RealizationTree, angle) -> float:
    if tree.count(tree.depth) == 0:
        return 0.0
    if angle in (HORIZONTAL, VERTICAL):
        s = axis_projection_cover(tree, tree.depth, angle)
    else:
        s = project_level(tree, tree.depth, ProjectionFrame.at(angle))
    iv = s.longest()
    return 0.0 if iv is None else float(iv[1] - iv[0])


def run_campaign(config: CampaignConfig) -> CampaignResult:
    """Per-trial records and aggregates; a pure function of the config.

    With ``condition_on_survival`` extinct trials are discarded (and counted)
    until ``trials`` survivors are collected or ``max_attempts`` is reached.
    """
    labels = config.angle_labels()
    records = []
    kept = 0
    limit = config.max_attempts or (100 * config.trials if config.condition_on_survival else config.trials)
    trial = 0
    any_truncated = False
    while kept < config.trials and trial < limit:
        seed = rng.trial_seed(config.seed, trial)
        tree, truncated = _grow(config.matrix, config.depth, seed, config.max_codes)
        any_truncated |= truncated
        survived = bool(tree.count(tree.depth) > 0) if not truncated else True
        keep = survived or not config.condition_on_survival
        rec = {"trial": trial, "seed": seed, "survived": survived, "kept": keep, "truncated": truncated,
               "counts": tree.counts()}
        for lab, a in zip(labels, config.angles):
            rec[f"longest[{lab}]"] = None if truncated else _longest(tree, a)
        if config.certificate is not None:
            rec["replay"] = None
            if not truncated and keep:
                rep = replay_single_angle(tree, config.certificate, config.replay_levels)
                rec["replay"] = rep.passed
        records.append(rec)
        kept += keep
        trial += 1
    result = CampaignResult(config, records, aggregate(records, config), any_truncated)
    if config.csv_path:
        Path(config.csv_path).write_text(to_csv(result))
    if config.jsonl_path:
        Path(config.jsonl_path).write_text(to_jsonl(result))
    return result


def _radius(f: float, n: int) -> float:
    return 3.0 * math.sqrt(f * (1.0 - f) / n) if n else math.nan


def aggregate(records: list[dict], config: CampaignConfig) -> dict:
    """Summary statistics recomputed from per-trial records alone (kept, untruncated rows)."""
    rows = [r for r in records if r["kept"] and not r["truncated"]]
    n = len(rows)
    attempts = [r for r in records if not r["truncated"]]
    surv = sum(r["survived"] for r in attempts)
    f = surv / len(attempts) if attempts else math.nan
    out = {"format": CAMPAIGN_FORMAT, "attempts": len(records), "kept": n,
           "discarded": sum(not r["kept"] for r in records),
           "truncated": sum(r["truncated"] for r in records),
           "survival_frequency": f, "survival_radius": _radius(f, len(attempts)) if attempts else math.nan}
    if rows:
        out["mean_counts"] = [float(np.mean([r["counts"][k] for r in rows])) for k in range(config.depth + 1)]
    shadows = {}
    for lab in config.angle_labels():
        vals = [r[f"longest[{lab}]"] for r in rows]
        entry = {"mean_longest": float(np.mean(vals)) if vals else math.nan}
        for th in config.thresholds:
            fr = float(np.mean([v >= th for v in vals])) if vals else math.nan
            entry[f"frac>={th:g}"] = fr
            entry[f"radius>={th:g}"] = _radius(fr, n) if vals else math.nan
        shadows[lab] = entry
    out["shadows"] = shadows
    if config.certificate is not None:
        reps = [r["replay"] for r in rows if r.get("replay") is not None]
        out["replay_pass_rate"] = float(np.mean(reps)) if reps else math.nan
    return out


def _csv_columns(config: CampaignConfig) -> list[str]:
    cols = ["trial", "seed", "survived", "kept", "truncated"]
    cols += [f"n{k}" for k in range(config.depth + 1)]
    cols += [f"longest[{lab}]" for lab in config.angle_labels()]
    if config.certificate is not None:
        cols.append("replay")
    return cols


def to_csv(result: CampaignResult) -> str:
    """One row per trial under a format-version header line; missing levels are blank."""
    buf = io.StringIO()
    buf.write(f"# {CAMPAIGN_FORMAT}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = _csv_columns(result.config)
    w.writerow(cols)
    for r in result.records:
        row = []
        for c in cols:
            if c.startswith("n") and c[1:].isdigit():
                k = int(c[1:])
                row.append(r["counts"][k] if k < len(r["counts"]) else "")
            else:
                v = r.get(c)
                row.append("" if v is None else (int(v) if isinstance(v, bool) else repr(v) if isinstance(v, float) else v))
        w.writerow(row)
    return buf.getvalue()


def read_csv(text: str, config: CampaignConfig) -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {CAMPAIGN_FORMAT}":
        raise ValidationError("missing campaign format header")
    reader = csv.DictReader(lines[1:])
    out = []
    for row in reader:
        rec = {"trial": int(row["trial"]), "seed": int(row["seed"]), "survived": row["survived"] == "1",
               "kept": row["kept"] == "1", "truncated": row["truncated"] == "1"}
        rec["counts"] = [int(row[f"n{k}"]) for k in range(config.depth + 1) if row[f"n{k}"] != ""]
        for lab in config.angle_labels():
            v = row[f"longest[{lab}]"]
            rec[f"longest[{lab}]"] = None if v == "" else float(v)
        if "replay" in row:
            rec["replay"] = None if row["replay"] == "" else row["replay"] == "1"
        out.append(rec)
    return out


def to_jsonl(result: CampaignResult) -> str:
    lines = [json.dumps({"format": CAMPAIGN_FORMAT, "summary": result.summary}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in result.records]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- column process

def is_m_adic(u: float, M: int, max_level: int = 60, tol: float = 1e-12) -> bool:
    """Whether ``u`` is (numerically) ``k / M^n``; such points sit on two columns."""
    x = Fraction(u).limit_denominator(M ** 12)
    if abs(float(x) - u) < tol:
        d = x.denominator
        while d % M == 0:
            d //= M
        if d == 1:
            return True
    return False


def column_survival_probability(matrix: ProbabilityMatrix, u: float, axis: str, depth: int) -> float:
    """Exact probability that the column (or row) through ``u`` survives to ``depth``.

    The column is a branching process whose offspring at level ``k`` is the
    number of retained cells among the ``M`` in the digit of ``u`` at ``k``.
    """
    from .core import _column_digits
    digits = _column_digits(u, matrix.M, depth)
    s = 0.0
    for d in reversed(digits):
        ps = matrix.p[d, :] if axis == VERTICAL else matrix.p[:, d]
        s = float(np.prod(1.0 - ps + ps * s))
    return 1.0 - s


def column_extinction(matrix: ProbabilityMatrix, digit: int, axis: str = VERTICAL, tol: float = 1e-15) -> float:
    """Extinction probability of a column with a constant digit (``q = prod(1 - p + p q)``)."""
    ps = matrix.p[digit, :] if axis == VERTICAL else matrix.p[:, digit]
    if ps.sum() <= 1.0:
        return 1.0
    q = 0.0
    for _ in range(1_000_000):
        nxt = float(np.prod(1.0 - ps + ps * q))
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    return q


@dataclass
class CoverageEstimate:
    frequency: float
    trials: int
    oracle: float
    radius: float

    @property
    def within(self) -> bool:
        return abs(self.frequency - self.oracle) <= max(self.radius, 1e-12)


def fixed_point_coverage(matrix: ProbabilityMatrix, u: float, axis: str, depth: int, trials: int,
                         seed: int = 0) -> CoverageEstimate:
    """Frequency with which the point ``u`` of the axis is covered by the shadow of ``E_depth``.

    ``vertical`` projects along columns (``u`` is an abscissa); ``horizontal``
    along rows.  The oracle is the exact finite-depth column survival probability.
    """
    if axis not in (HORIZONTAL, VERTICAL):
        raise ValidationError(f"unknown axis {axis!r}")
    if not 0.0 < u < 1.0 or is_m_adic(u, matrix.M):
        raise DomainError(f"u={u} is M-adic (or outside (0, 1)): it lies on two columns")
    seeds = [rng.trial_seed(seed, k) for k in range(trials)]
    kw = {"column": u} if axis == VERTICAL else {"row": u}
    alive = survival_flags(matrix, depth, seeds, **kw)
    f = float(np.mean(alive))
    oracle = column_survival_probability(matrix, u, axis, depth)
    return CoverageEstimate(f, trials, oracle, 3.0 * math.sqrt(oracle * (1 - oracle) / trials))


# ---------------------------------------------------------------- self-similarity

@dataclass
class SimilarityReport:
    tv: float
    radius: float
    n_root: int
    n_code: int
    root_law: np.ndarray
    code_law: np.ndarray

    @property
    def passes(self) -> bool:
        """Null accepted: ``tv`` within three sampling radii."""
        return self.tv <= 3.0 * self.radius


def _children_counts(matrix, keys, level, ix, iy):
    M = matrix.M
    total = np.zeros(len(keys), dtype=np.int64)
    for i in range(M):
        for j in range(M):
            cx, cy = ix * M + i, iy * M + j
            counter = np.uint64(level_offset(M, level + 1) + cx * M ** (level + 1) + cy)
            u = rng.uniforms(keys, np.full(len(keys), counter, dtype=np.uint64))
            total += u < matrix.p[i, j]
    return total


def self_similarity_test(matrix: ProbabilityMatrix, depth: int, trials: int, code, seed: int = 0,
                         reference_matrix: ProbabilityMatrix | None = None,
                         min_conditioned: int = 30) -> SimilarityReport:
    """Total-variation distance between the root's child-count law and ``code``'s,
    conditioned on ``code`` being retained.

    ``reference_matrix`` samples the root law from a different matrix (power check).
    """
    if code.level + 1 > depth:
        raise ValidationError("code level + 1 must not exceed depth")
    keys = np.array([rng.stream_key(rng.trial_seed(seed, k)) for k in range(trials)], dtype=np.uint64)
    ref = reference_matrix or matrix
    root = _children_counts(ref, keys, 0, 0, 0)
    alive = np.ones(trials, dtype=bool)
    M = matrix.M
    for n in range(1, code.level + 1):
        i, j = code.digits_i[n - 1], code.digits_j[n - 1]
        sub = code.from_coords(M, n, *_prefix_coords(code, n))
        cx, cy = sub.coords
        counter = np.uint64(level_offset(M, n) + cx * M ** n + cy)
        u = rng.uniforms(keys, np.full(trials, counter, dtype=np.uint64))
        alive &= u < matrix.p[i, j]
    ix, iy = code.coords
    kids = _children_counts(matrix, keys[alive], code.level, ix, iy)
    if len(kids) < min_conditioned:
        raise InsufficientSampleError(f"only {len(kids)} trials retained the code")
    k = M * M + 1
    p1 = np.bincount(root, minlength=k) / len(root)
    p2 = np.bincount(kids, minlength=k) / len(kids)
    tv = 0.5 * float(np.abs(p1 - p2).sum())
    pooled = (p1 * len(root) + p2 * len(kids)) / (len(root) + len(kids))
    radius = 0.5 * float(np.sum(np.sqrt(pooled * (1 - pooled) * (1 / len(root) + 1 / len(kids)))))
    return SimilarityReport(tv, radius, len(root), len(kids), p1, p2)


def _prefix_coords(code, n):
    M = code.M
    ix = iy = 0
    for k in range(n):
        ix = ix * M + code.digits_i[k]
        iy = iy * M + code.digits_j[k]
    return ix, iy
