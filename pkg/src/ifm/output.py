"""CSV and SVG emitters. Output is byte-stable for identical input."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence

SVG_W, SVG_H = 640, 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class OutputError(OSError):
    pass


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        if value.imag == 0:
            return fmt(value.real)
        return f"{value.real:.12g}{value.imag:+.12g}j"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    columns = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def _write(text: str, path: str | Path) -> Path:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_csv(rows: Sequence[dict], path: str | Path) -> Path:
    return _write(rows_to_csv(rows), path)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def rows_to_svg(rows: Sequence[dict], x: str, ys: Sequence[str], title: str = "") -> str:
    """Polyline plot of columns ``ys`` against ``x``."""
    if not rows:
        raise ValueError("refusing to plot an empty result set")
    xs = [float(r[x]) for r in rows]
    series = {y: [float(r[y]) for r in rows] for y in ys}
    finite = [v for vals in series.values() for v in vals if math.isfinite(v)]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    pw, ph = SVG_W - 2 * MARGIN, SVG_H - 2 * MARGIN

    def px(v):
        return MARGIN + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return SVG_H - MARGIN - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{SVG_H - MARGIN}" x2="{SVG_W - MARGIN}" y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{SVG_H - MARGIN}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{px(t):.2f}" y="{SVG_H - MARGIN + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{MARGIN - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{SVG_W / 2:.0f}" y="{SVG_H - 15}" text-anchor="middle">{x}</text>')
    out.append(
        f'<text x="15" y="{SVG_H / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 15 {SVG_H / 2:.0f})">probability</text>'
    )
    if title:
        out.append(f'<text x="{SVG_W / 2:.0f}" y="25" text-anchor="middle">{title}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, vals) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(
            f'<text x="{SVG_W - MARGIN + 4}" y="{MARGIN + 16 * k}" fill="{color}">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(rows: Sequence[dict], x: str, ys: Sequence[str], path: str | Path, title: str = "") -> Path:
    return _write(rows_to_svg(rows, x, ys, title), path)
