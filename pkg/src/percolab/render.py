"""Deterministic SVG of ``E_n`` and its shadow on a screen line next to the square."""

from __future__ import annotations

from .core import RealizationTree
from .geometry import Center, IntervalSet, ProjectionFrame, project_level, radial_project_level

SVG_FORMAT = "percolab-svg/1"


def _f(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def shadow_of(tree: RealizationTree, level: int, projection) -> tuple[IntervalSet, str]:
    """Shadow of ``E_level`` under a frame, an angle, or a ``Center``, with a short label."""
    if isinstance(projection, Center):
        shadow = radial_project_level(tree, level, projection) if tree.count(level) else IntervalSet()
        return shadow, f"{projection.kind} t=({_f(projection.t[0])},{_f(projection.t[1])})"
    frame = projection if isinstance(projection, ProjectionFrame) else ProjectionFrame.at(projection)
    shadow = project_level(tree, level, frame) if tree.count(level) else IntervalSet()
    return shadow, f"alpha={_f(frame.alpha)}"


def render_svg(tree: RealizationTree, level: int, projection, size: int = 512, margin: int = 24) -> str:
    """Squares of ``E_level`` as rects (y axis up) and the shadow as line segments.

    ``projection`` is a ``ProjectionFrame`` or a ``Center``; the diagonal
    parameter ``u`` is drawn left to right on a horizontal screen below K.
    """
    ix, iy = tree.coords(level)
    shadow, label = shadow_of(tree, level, projection)
    h = size / tree.M ** level
    width = size + 2 * margin
    screen_y = margin + size + margin
    height = screen_y + margin
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f"<!-- {SVG_FORMAT} level={level} {label} -->",
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect class="frame" x="{margin}" y="{margin}" width="{size}" height="{size}" '
           f'fill="none" stroke="#999" stroke-width="1"/>',
           '<g class="squares" fill="#222">']
    for a, b in zip(ix.tolist(), iy.tolist()):
        x = margin + a * h
        y = margin + size - (b + 1) * h
        out.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(h)}" height="{_f(h)}"/>')
    out.append("</g>")
    out.append(f'<line class="screen" x1="{margin}" y1="{screen_y}" x2="{margin + size}" y2="{screen_y}" '
               f'stroke="#ccc" stroke-width="1"/>')
    out.append('<g class="shadow" stroke="#c00" stroke-width="4">')
    for lo, hi in shadow:
        out.append(f'<line x1="{_f(margin + lo * size)}" y1="{screen_y}" '
                   f'x2="{_f(margin + hi * size)}" y2="{screen_y}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
