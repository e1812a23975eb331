"""Static SVG 1.1 line/scatter plots, rendered as deterministic text.

No plotting dependency: axes, ticks, polylines and markers are emitted
directly. Identical inputs produce byte-identical output (all floats go
through one fixed format and nothing timestamped enters the file).
"""

from __future__ import annotations

import math

from .errors import DomainError, SchemaError

_WIDTH = 720
_HEIGHT = 480
_MARGIN_L = 72
_MARGIN_R = 24
_MARGIN_T = 36
_MARGIN_B = 56

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return "%.6g" % x


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    else:
        step = 10.0 * mag
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def render_svg(x: list[float], ys: dict[str, list[float]], *,
               title: str = "", x_label: str = "", y_label: str = "",
               log_y: bool = False) -> str:
    """Render one figure with a shared x axis and one curve per series."""
    if not ys:
        raise SchemaError("no y series given")
    for name, y in ys.items():
        if len(y) != len(x):
            raise SchemaError(f"series {name!r} length {len(y)} != x length {len(x)}")
    if len(x) == 0:
        raise SchemaError("cannot plot an empty series")
    if log_y:
        for name, y in ys.items():
            bad = [v for v in y if not (v > 0)]
            if bad:
                raise DomainError(
                    f"log-scale axis requires positive values; series "
                    f"{name!r} contains {bad[0]!r}"
                )
        tys = {k: [math.log10(v) for v in v_list] for k, v_list in ys.items()}
    else:
        tys = ys

    x_lo, x_hi = min(x), max(x)
    all_y = [v for y in tys.values() for v in y]
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    iw = _WIDTH - _MARGIN_L - _MARGIN_R
    ih = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(v):
        return _MARGIN_L + iw * (v - x_lo) / (x_hi - x_lo)

    def sy(v):
        return _MARGIN_T + ih * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    # axes box
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{iw}" height="{ih}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    )
    # ticks and labels
    for tx in _nice_ticks(x_lo, x_hi):
        if not (x_lo <= tx <= x_hi):
            continue
        px = sx(tx)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_MARGIN_T + ih}" '
                     f'x2="{_fmt(px)}" y2="{_MARGIN_T + ih + 5}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{_MARGIN_T + ih + 20}" '
                     f'font-size="12" text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _nice_ticks(y_lo, y_hi):
        if not (y_lo <= ty <= y_hi):
            continue
        py = sy(ty)
        label = f"1e{_fmt(ty)}" if log_y else _fmt(ty)
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(py)}" '
                     f'x2="{_MARGIN_L}" y2="{_fmt(py)}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{_fmt(py + 4)}" '
                     f'font-size="12" text-anchor="end">{label}</text>')
    # curves
    for i, (name, y) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = [(sx(xv), sy(yv)) for xv, yv in zip(x, tys[name])]
        if len(pts) > 1:
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            parts.append(f'<polyline points="{path}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        for px, py in pts:
            parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" '
                         f'fill="{color}"/>')
        parts.append(f'<text x="{_MARGIN_L + 10}" y="{_MARGIN_T + 16 + 16 * i}" '
                     f'font-size="12" fill="{color}">{name}</text>')
    if title:
        parts.append(f'<text x="{_WIDTH // 2}" y="{_MARGIN_T - 12}" '
                     f'font-size="14" text-anchor="middle">{title}</text>')
    if x_label:
        parts.append(f'<text x="{_MARGIN_L + iw // 2}" y="{_HEIGHT - 16}" '
                     f'font-size="12" text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(
            f'<text x="18" y="{_MARGIN_T + ih // 2}" font-size="12" '
            f'text-anchor="middle" '
            f'transform="rotate(-90 18 {_MARGIN_T + ih // 2})">{y_label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
