"""Dependency-free SVG heatmap of a recovery phase diagram.

Cells are colored on a 3-stop linear map: probability 0 maps to
``#2c7bb6`` (blue, failure), 0.5 to ``#ffffbf`` (pale yellow) and 1 to
``#d7191c`` (red, recovery), interpolating linearly per RGB channel
between adjacent stops.  Prevalence runs along the x axis, corruption
fraction along the y axis (increasing upward), and a gradient legend is
embedded on the right.
"""

from __future__ import annotations

from .simulate import PhaseDiagram

COLOR_STOPS = ((0.0, (0x2C, 0x7B, 0xB6)), (0.5, (0xFF, 0xFF, 0xBF)), (1.0, (0xD7, 0x19, 0x1C)))

_CELL = 36
_MARGIN_LEFT = 70
_MARGIN_BOTTOM = 56
_MARGIN_TOP = 34
_LEGEND_W = 64


def probability_color(prob: float) -> str:
    """Hex color of a probability under the 3-stop linear map."""
    prob = min(1.0, max(0.0, prob))
    for (lo, lo_rgb), (hi, hi_rgb) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if prob <= hi:
            frac = 0.0 if hi == lo else (prob - lo) / (hi - lo)
            rgb = tuple(
                round(a + frac * (b - a)) for a, b in zip(lo_rgb, hi_rgb)
            )
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*COLOR_STOPS[-1][1])


def _ticks(values, limit: int = 7) -> list[int]:
    stride = max(1, (len(values) + limit - 1) // limit)
    picked = list(range(0, len(values), stride))
    if picked[-1] != len(values) - 1:
        picked.append(len(values) - 1)
    return picked


def render_heatmap(diagram: PhaseDiagram) -> str:
    """Render the diagram to an SVG document string."""
    n_p, n_pe = diagram.p_grid.size, diagram.pe_grid.size
    plot_w, plot_h = n_p * _CELL, n_pe * _CELL
    width = _MARGIN_LEFT + plot_w + _LEGEND_W + 20
    height = _MARGIN_TOP + plot_h + _MARGIN_BOTTOM
    probs = diagram.probabilities

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n',
        "<defs>\n"
        '<linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">\n'
        + "".join(
            f'<stop offset="{int(stop * 100)}%" stop-color="{probability_color(stop)}"/>\n'
            for stop, _ in COLOR_STOPS
        )
        + "</linearGradient>\n</defs>\n",
        f'<rect width="{width}" height="{height}" fill="white"/>\n',
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="20" text-anchor="middle" '
        'font-family="sans-serif" font-size="14">empirical recovery probability</text>\n',
    ]
    for i in range(n_p):
        x = _MARGIN_LEFT + i * _CELL
        for j in range(n_pe):
            # pe increases upward
            y = _MARGIN_TOP + (n_pe - 1 - j) * _CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" '
                f'fill="{probability_color(float(probs[i, j]))}"/>\n'
            )
    frame = (
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black" stroke-width="1"/>\n'
    )
    parts.append(frame)

    axis_y = _MARGIN_TOP + plot_h
    for i in _ticks(diagram.p_grid):
        x = _MARGIN_LEFT + i * _CELL + _CELL / 2
        parts.append(
            f'<line x1="{x:.1f}" y1="{axis_y}" x2="{x:.1f}" y2="{axis_y + 5}" stroke="black"/>\n'
            f'<text x="{x:.1f}" y="{axis_y + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{diagram.p_grid[i]:.3g}</text>\n'
        )
    for j in _ticks(diagram.pe_grid):
        y = _MARGIN_TOP + (n_pe - 1 - j) * _CELL + _CELL / 2
        parts.append(
            f'<line x1="{_MARGIN_LEFT - 5}" y1="{y:.1f}" x2="{_MARGIN_LEFT}" y2="{y:.1f}" stroke="black"/>\n'
            f'<text x="{_MARGIN_LEFT - 8}" y="{y + 3:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{diagram.pe_grid[j]:.3g}</text>\n'
        )
    parts.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{height - 14}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12">prevalence p</text>\n'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2:.1f})">corruption fraction p_e</text>\n'
    )

    legend_x = _MARGIN_LEFT + plot_w + 24
    parts.append(
        f'<rect x="{legend_x}" y="{_MARGIN_TOP}" width="14" height="{plot_h}" '
        'fill="url(#scale)" stroke="black" stroke-width="0.5"/>\n'
    )
    for stop, _ in COLOR_STOPS:
        y = _MARGIN_TOP + (1.0 - stop) * plot_h
        parts.append(
            f'<text x="{legend_x + 20}" y="{y + 3:.1f}" font-family="sans-serif" '
            f'font-size="10">{stop:g}</text>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)


def write_heatmap(diagram: PhaseDiagram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_heatmap(diagram))
