"""Flat ``section.key=value`` configuration with typed, documented keys."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import ProbabilityMatrix
from .errors import ValidationError
from .geometry import Angle


class ConfigError(ValidationError):
    """Bad configuration; ``key`` names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# key -> help; the value parsers live in the accessors below
KEYS = {
    "matrix.M": "grid order (integer >= 2)",
    "matrix.p": "uniform retention probability",
    "matrix.kind": "uniform | sierpinski | rows",
    "matrix.p_center": "center probability for the sierpinski kind (default 0)",
    "run.seed": "base seed (integer)",
    "run.depth": "tree depth",
    "run.trials": "number of trials",
    "angle.alpha": "one angle: radians or a multiple of pi such as 3pi/4",
    "angle.list": "comma-separated angles",
    "angle.range": "a,b for sweeps",
    "angle.center": "x,y center of a radial or co-radial projection (render)",
    "angle.kind": "radial | coradial (with angle.center)",
    "certify.r_max": "largest block size searched (default 8)",
    "certify.budget": "largest number of level-r codes (default 2^24)",
    "certify.I1": "a,b; fixes the inner interval",
    "certify.I2": "a,b; fixes the outer interval",
    "replay.n_max": "number of induction levels (default 2)",
    "replay.certificate": "path to a certificate JSON-lines file (default: certify first)",
    "campaign.thresholds": "comma-separated shadow-length thresholds",
    "campaign.condition": "none | survival",
    "campaign.max_codes": "per-level code budget before a trial is truncated",
    "render.level": "level drawn (default: run.depth)",
    "render.tree": "path to a tree dump to draw instead of sampling",
    "render.size": "square side in pixels (default 512)",
}
_ROW = re.compile(r"^matrix\.row(\d+)$")


def parse_lines(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out = {}
    for k, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{k}", f"expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        check_key(key)
        out[key] = value
    return out


def check_key(key: str):
    if key not in KEYS and not _ROW.match(key):
        raise ConfigError(key, "unknown key")


class Config:
    """Resolved configuration: file values overridden by ``overrides``."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(values or {})
        for k in self.values:
            check_key(k)

    @classmethod
    def load(cls, path: str | None = None, overrides: Iterable[str] = ()) -> "Config":
        values = parse_lines(Path(path).read_text().splitlines(), str(path)) if path else {}
        values.update(parse_lines(overrides, "<override>"))
        return cls(values)

    def __contains__(self, key):
        return key in self.values

    def resolved(self) -> dict[str, str]:
        return dict(sorted(self.values.items()))

    def text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.resolved().items())

    # typed accessors
    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def int(self, key: str, default=None) -> int:
        v = self.values.get(key)
        if v is None:
            if default is None:
                raise ConfigError(key, "missing")
            return default
        try:
            return int(v, 0)
        except ValueError:
            raise ConfigError(key, f"not an integer: {v!r}") from None

    def float(self, key: str, default=None) -> float:
        v = self.values.get(key)
        if v is None:
            if default is None:
                raise ConfigError(key, "missing")
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(key, f"not a number: {v!r}") from None

    def floats(self, key: str, default=None) -> list[float]:
        v = self.values.get(key)
        if v is None:
            if default is None:
                raise ConfigError(key, "missing")
            return list(default)
        try:
            return [float(s) for s in v.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(key, f"not a list of numbers: {v!r}") from None

    def interval(self, key: str) -> tuple[float, float] | None:
        if key not in self.values:
            return None
        vals = self.floats(key)
        if len(vals) != 2:
            raise ConfigError(key, "expected a,b")
        return vals[0], vals[1]

    def angles(self) -> list[Angle]:
        if "angle.list" in self.values:
            items = self.values["angle.list"].split(",")
            key = "angle.list"
        elif "angle.alpha" in self.values:
            items, key = [self.values["angle.alpha"]], "angle.alpha"
        else:
            raise ConfigError("angle.alpha", "missing")
        return [parse_angle(s, key) for s in items if s.strip()]

    def angle_range(self) -> tuple[Angle, Angle]:
        v = self.values.get("angle.range")
        if v is None:
            raise ConfigError("angle.range", "missing")
        parts = v.split(",")
        if len(parts) != 2:
            raise ConfigError("angle.range", "expected a,b")
        return parse_angle(parts[0], "angle.range"), parse_angle(parts[1], "angle.range")

    def matrix(self) -> ProbabilityMatrix:
        kind = self.values.get("matrix.kind", "rows" if any(_ROW.match(k) for k in self.values) else "uniform")
        try:
            if kind == "uniform":
                return ProbabilityMatrix.uniform(self.int("matrix.M", 2), self.float("matrix.p"))
            if kind == "sierpinski":
                return ProbabilityMatrix.sierpinski(self.float("matrix.p"), self.float("matrix.p_center", 0.0))
            if kind == "rows":
                M = self.int("matrix.M")
                rows = [self.floats(f"matrix.row{i}") for i in range(M)]
                return ProbabilityMatrix(np.array(rows))
        except ConfigError:
            raise
        except ValidationError as exc:
            raise ConfigError("matrix", str(exc)) from None
        raise ConfigError("matrix.kind", f"unknown kind {kind!r}")


_PI = re.compile(r"^\s*(?P<num>\d+)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+))?\s*$")


def parse_angle(text: str, key: str = "angle") -> Angle:
    """Radians, or ``[k]pi[/d]`` stored exactly as a multiple of pi."""
    m = _PI.match(text.lower())
    try:
        if m:
            return Angle.pi_times(int(m["num"] or 1), int(m["den"] or 1))
        return Angle(float(text))
    except (ValueError, ValidationError) as exc:
        raise ConfigError(key, f"bad angle {text!r}: {exc}") from None
