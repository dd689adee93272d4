"""Line-based text dump of a realization: one retained code per line."""

from __future__ import annotations

import json

import numpy as np

from .core import ProbabilityMatrix, RealizationTree, _digits
from .errors import ValidationError

TREE_FORMAT = "percolab-tree/1"


def dump_tree(tree: RealizationTree) -> str:
    """Header line, a metadata line, then ``level digits_i digits_j`` per code.

    Digits are comma-joined; the root (level 0) is written as ``0 - -``.
    """
    meta = {"M": tree.M, "depth": tree.depth, "seed": tree.seed, "matrix": tree.matrix.to_rows()}
    out = [f"# {TREE_FORMAT}", "# " + json.dumps(meta, sort_keys=True)]
    M = tree.M
    for n in range(tree.depth + 1):
        ix, iy = tree.coords(n)
        for a, b in zip(ix.tolist(), iy.tolist()):
            if n == 0:
                out.append("0 - -")
            else:
                di = ",".join(map(str, _digits(a, M, n)))
                dj = ",".join(map(str, _digits(b, M, n)))
                out.append(f"{n} {di} {dj}")
    return "\n".join(out) + "\n"


def load_tree(text: str) -> RealizationTree:
    lines = text.splitlines()
    if len(lines) < 2 or lines[0] != f"# {TREE_FORMAT}" or not lines[1].startswith("# "):
        raise ValidationError("not a tree dump (missing format header)")
    meta = json.loads(lines[1][2:])
    matrix = ProbabilityMatrix(np.array(meta["matrix"]))
    M, depth = matrix.M, int(meta["depth"])
    levels = [([], []) for _ in range(depth + 1)]
    for k, line in enumerate(lines[2:], 3):
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"line {k}: expected 'level digits_i digits_j'")
        n = int(parts[0])
        if not 0 <= n <= depth:
            raise ValidationError(f"line {k}: level {n} outside 0..{depth}")
        if n == 0:
            levels[0][0].append(0)
            levels[0][1].append(0)
            continue
        di = [int(d) for d in parts[1].split(",")]
        dj = [int(d) for d in parts[2].split(",")]
        if len(di) != n or len(dj) != n or not all(0 <= d < M for d in di + dj):
            raise ValidationError(f"line {k}: bad digits for level {n}")
        a = b = 0
        for x, y in zip(di, dj):
            a, b = a * M + x, b * M + y
        levels[n][0].append(a)
        levels[n][1].append(b)
    ix = [np.array(l[0], dtype=np.int64) for l in levels]
    iy = [np.array(l[1], dtype=np.int64) for l in levels]
    parent = [np.full(len(ix[0]), -1, dtype=np.int64)]
    for n in range(1, depth + 1):
        # parent index in level n-1 by coordinate lookup
        keys = ix[n - 1] * (M ** (n - 1)) + iy[n - 1]
        order = np.argsort(keys)
        child_keys = (ix[n] // M) * (M ** (n - 1)) + iy[n] // M
        pos = np.searchsorted(keys[order], child_keys)
        if len(keys) == 0 and len(child_keys):
            raise ValidationError(f"level {n} has codes without parents")
        pos = np.clip(pos, 0, max(len(keys) - 1, 0))
        if len(child_keys) and not np.array_equal(keys[order][pos], child_keys):
            raise ValidationError(f"level {n} has codes without parents")
        parent.append(order[pos] if len(child_keys) else np.zeros(0, dtype=np.int64))
    return RealizationTree(matrix, depth, int(meta["seed"]), ix, iy, parent)
