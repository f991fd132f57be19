"""Minimal self-contained SVG line charts (measured vs forecast)."""

from __future__ import annotations

import datetime as dt
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 300
MARGIN = dict(left=60, right=20, top=30, bottom=40)


def _month_ticks(first: dt.date, last: dt.date) -> list[dt.date]:
    d = dt.date(first.year, first.month, 1)
    if d < first:
        d = dt.date(d.year + d.month // 12, d.month % 12 + 1, 1)
    ticks = []
    while d <= last:
        ticks.append(d)
        d = dt.date(d.year + d.month // 12, d.month % 12 + 1, 1)
    step = max(1, len(ticks) // 12)
    return ticks[::step]


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    mag = 10 ** np.floor(np.log10(v))
    for m in (1, 2, 2.5, 5, 10):
        if m * mag >= v:
            return float(m * mag)
    return float(10 * mag)


def line_chart(dates: Sequence[dt.date], measured, forecast, title: str = "",
               labels: tuple[str, str] = ("Measured traffic", "Forecast")) -> str:
    """Two polylines over a date axis; gaps (nan) in either series break its line."""
    measured = np.asarray(measured, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    n = len(dates)
    if n < 2 or measured.shape != (n,) or forecast.shape != (n,):
        raise ValueError("need at least two aligned points to plot")
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    span = (dates[-1] - dates[0]).days or 1
    top = _nice_max(float(np.nanmax(np.concatenate([measured, forecast]))))

    def px(d: dt.date) -> float:
        return x0 + (x1 - x0) * (d - dates[0]).days / span

    def py(v: float) -> float:
        return y0 - (y0 - y1) * v / top

    def polylines(values, style):
        out, run = [], []
        for d, v in zip(dates, values):
            if np.isnan(v):
                if len(run) > 1:
                    out.append(run)
                run = []
            else:
                run.append(f"{px(d):.2f},{py(v):.2f}")
        if len(run) > 1:
            out.append(run)
        return [f'<polyline fill="none" {style} points="{" ".join(r)}"/>' for r in out]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="13">'
                     f'{escape(title)}</text>')
    for k in range(6):
        v = top * k / 5
        y = py(v)
        parts.append(f'<line x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{x0 - 6}" y="{y + 4:.2f}" text-anchor="end">{v:g}</text>')
    for d in _month_ticks(dates[0], dates[-1]):
        x = px(d)
        parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle">{d:%Y-%m}</text>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    parts += polylines(measured, 'stroke="#1f4e9e" stroke-width="0.8"')
    parts += polylines(forecast, 'stroke="#c0392b" stroke-width="2"')
    lx, ly = x0 + 10, y1 + 8
    parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="#1f4e9e" stroke-width="0.8"/>')
    parts.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(labels[0])}</text>')
    parts.append(f'<line x1="{lx + 160}" y1="{ly}" x2="{lx + 184}" y2="{ly}" stroke="#c0392b" stroke-width="2"/>')
    parts.append(f'<text x="{lx + 190}" y="{ly + 4}">{escape(labels[1])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
