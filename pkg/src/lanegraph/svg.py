"""Tiny SVG line-chart writer (no plotting dependency)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 80, 40, 60


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    return f"{v:g}"


def line_chart(path, x, left: dict, right: dict | None = None, title="", xlabel="", ylabel="", y2label="", x_labels=None):
    """Write a line chart; ``left``/``right`` map series names to y lists.

    ``x_labels`` replaces numeric x ticks with categorical labels at ``x``.
    """
    x = [float(v) for v in x]
    right = right or {}
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    xlo, xhi = min(x), max(x)
    if xhi == xlo:
        xhi = xlo + 1.0

    def sx(v):
        return LEFT + (v - xlo) / (xhi - xlo) * pw

    def scale(series):
        vals = [v for ys in series.values() for v in ys if v is not None and math.isfinite(v)]
        lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
        lo = min(lo, 0.0)
        ticks = _ticks(lo, hi)
        lo, hi = ticks[0], ticks[-1] if ticks[-1] > ticks[0] else ticks[0] + 1.0
        return lo, hi, ticks

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    if x_labels is not None:
        xt = list(zip(x, x_labels))
    else:
        xt = [(v, _fmt(v)) for v in _ticks(xlo, xhi) if xlo <= v <= xhi]
    for v, label in xt:
        parts.append(f'<text x="{sx(v):.1f}" y="{TOP + ph + 18}" text-anchor="middle">{escape(str(label))}</text>')
    parts.append(f'<text x="{LEFT + pw / 2}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')

    color = iter(PALETTE * 4)
    legend = []
    for side, series, label in (("left", left, ylabel), ("right", right, y2label)):
        if not series:
            continue
        lo, hi, ticks = scale(series)

        def sy(v, lo=lo, hi=hi):
            return TOP + ph - (v - lo) / (hi - lo) * ph

        ax = LEFT if side == "left" else LEFT + pw
        if side == "right":
            parts.append(f'<line x1="{ax}" y1="{TOP}" x2="{ax}" y2="{TOP + ph}" stroke="black"/>')
        for t in ticks:
            tx, anchor = (ax - 6, "end") if side == "left" else (ax + 6, "start")
            parts.append(f'<text x="{tx}" y="{sy(t) + 4:.1f}" text-anchor="{anchor}">{_fmt(t)}</text>')
            if side == "left":
                parts.append(f'<line x1="{LEFT}" y1="{sy(t):.1f}" x2="{LEFT + pw}" y2="{sy(t):.1f}" stroke="#eee"/>')
        lx = 18 if side == "left" else W - 18
        parts.append(
            f'<text x="{lx}" y="{TOP + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 {lx} {TOP + ph / 2})">{escape(label)}</text>'
        )
        for name, ys in series.items():
            c = next(color)
            pts = [(sx(xv), sy(yv)) for xv, yv in zip(x, ys) if yv is not None and math.isfinite(yv)]
            dash = ' stroke-dasharray="6 4"' if side == "right" else ""
            parts.append(
                f'<polyline fill="none" stroke="{c}" stroke-width="2"{dash} points="'
                + " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
                + '"/>'
            )
            parts.extend(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="{c}"/>' for px, py in pts)
            legend.append((name, c))
    for i, (name, c) in enumerate(legend):
        y = TOP + 8 + 16 * i
        parts.append(f'<rect x="{LEFT + 10}" y="{y - 9}" width="10" height="10" fill="{c}"/>')
        parts.append(f'<text x="{LEFT + 26}" y="{y}">{escape(name)}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
