"""SVG bar charts of mean RMSE with 95% CI whiskers, one per city."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
            "#ccb974", "#64b5cd", "#2f4b7c", "#a05195")


def bar_chart_svg(city: str, rows: Sequence[tuple[str, float, float]], config_hash: str = "") -> str:
    """``rows`` are (label, mean, ci95 half-width); NaN half-widths draw no whisker."""
    width, height = 120 + 70 * max(len(rows), 1), 420
    left, top, bottom = 70, 40, 150
    plot_h = height - top - bottom
    tops = [m + (h if math.isfinite(h) else 0.0) for _, m, h in rows] or [1.0]
    ymax = max(tops) * 1.1 or 1.0
    y = lambda v: top + plot_h * (1 - v / ymax)  # noqa: E731
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<desc>config_hash={escape(config_hash)}</desc>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(city)}: mean RMSE (95% CI)</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 20}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for i in range(6):
        v = ymax * i / 5
        out.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.3f}</text>')
        out.append(f'<line x1="{left - 3}" y1="{y(v):.1f}" x2="{left}" y2="{y(v):.1f}" stroke="black"/>')
    for i, (label, mean, half) in enumerate(rows):
        x = left + 20 + 70 * i
        colour = _PALETTE[i % len(_PALETTE)]
        out.append(f'<rect x="{x}" y="{y(mean):.1f}" width="40" height="{top + plot_h - y(mean):.1f}" fill="{colour}">'
                   f'<title>{escape(label)}: {mean:.4f}</title></rect>')
        if math.isfinite(half):
            cx = x + 20
            for a, b in ((y(mean - half), y(mean + half)),):
                out.append(f'<line x1="{cx}" y1="{a:.1f}" x2="{cx}" y2="{b:.1f}" stroke="black"/>')
            for v in (mean - half, mean + half):
                out.append(f'<line x1="{cx - 6}" y1="{y(v):.1f}" x2="{cx + 6}" y2="{y(v):.1f}" stroke="black"/>')
        ty = top + plot_h + 12
        out.append(f'<text transform="translate({x + 20},{ty}) rotate(45)" text-anchor="start">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_charts(summary: Sequence[tuple[str, str, float, float]], directory: str | Path,
                 config_hash: str = "") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cities: dict[str, list[tuple[str, float, float]]] = {}
    for city, label, mean, half in summary:
        cities.setdefault(city, []).append((label, mean, half))
    paths = []
    for city, rows in cities.items():
        slug = "".join(ch if ch.isalnum() else "_" for ch in city.lower())
        path = directory / f"rmse_{slug}.svg"
        path.write_text(bar_chart_svg(city, rows, config_hash), encoding="utf-8")
        paths.append(path)
    return paths
