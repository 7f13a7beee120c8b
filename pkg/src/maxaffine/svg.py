"""Self-contained SVG heatmap rendering for two-axis experiment grids.

One colored rectangle per grid cell, keyed to the lower-median error
clipped to [-6, 0], with tick labels, a colorbar, and the fitted phase
boundary overlaid when the grid defines one.  The output is plain text
with fixed number formatting, so identical grids render byte-identical
documents.
"""

from __future__ import annotations

from .errors import ConfigError
from .experiment import ExperimentGrid

ERR_LOW = -6.0  # rendered as the "success" end of the ramp
ERR_HIGH = 0.0  # rendered as the "failure" end

_COLOR_LOW = (13, 8, 135)  # deep blue at err <= -6
_COLOR_HIGH = (240, 249, 33)  # yellow at err >= 0

_CELL_W = 48
_CELL_H = 22
_MARGIN_LEFT = 66
_MARGIN_TOP = 18
_MARGIN_BOTTOM = 48
_BAR_GAP = 26
_BAR_W = 16
_BAR_STEPS = 24


def _clip_err(err: float) -> float:
    if err != err:  # NaN guards as total failure
        return ERR_HIGH
    return min(ERR_HIGH, max(ERR_LOW, err))


def _fill(err: float) -> str:
    t = (_clip_err(err) - ERR_LOW) / (ERR_HIGH - ERR_LOW)
    channels = (
        round(a + t * (b - a)) for a, b in zip(_COLOR_LOW, _COLOR_HIGH)
    )
    return "#%02x%02x%02x" % tuple(channels)


def _fmt_tick(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return "%g" % value


def render_heatmap(grid: ExperimentGrid) -> str:
    """Render a two-axis grid as a standalone SVG document."""
    cfg = grid.config
    if len(cfg.axes) != 2:
        raise ConfigError(
            "heatmaps need a two-axis grid; plot one-axis sweeps as line "
            "charts from grid.csv instead"
        )
    (x_name, x_values), (y_name, y_values) = cfg.axes
    cols, rows = len(x_values), len(y_values)
    plot_w = cols * _CELL_W
    plot_h = rows * _CELL_H
    width = _MARGIN_LEFT + plot_w + _BAR_GAP + _BAR_W + 52
    height = _MARGIN_TOP + plot_h + _MARGIN_BOTTOM

    def x_left(col: int) -> float:
        return _MARGIN_LEFT + col * _CELL_W

    def y_top(row: int) -> float:
        # y increases upward: the largest value sits at the top row.
        return _MARGIN_TOP + (rows - 1 - row) * _CELL_H

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]

    by_coords = {cell.coords: cell for cell in grid.cells}
    for col, xv in enumerate(x_values):
        for row, yv in enumerate(y_values):
            cell = by_coords[(xv, yv)]
            parts.append(
                f'<rect class="cell" x="{x_left(col):.1f}" y="{y_top(row):.1f}" '
                f'width="{_CELL_W}" height="{_CELL_H}" fill="{_fill(cell.median_err)}">'
                f"<title>{x_name}={_fmt_tick(xv)} {y_name}={_fmt_tick(yv)} "
                f"median_err={cell.median_err:.3f}</title></rect>"
            )

    axis_y = _MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{axis_y}" x2="{_MARGIN_LEFT + plot_w}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    for col, xv in enumerate(x_values):
        cx = x_left(col) + _CELL_W / 2
        parts.append(
            f'<text x="{cx:.1f}" y="{axis_y + 14}" text-anchor="middle">'
            f"{_fmt_tick(xv)}</text>"
        )
    for row, yv in enumerate(y_values):
        cy = y_top(row) + _CELL_H / 2 + 4
        parts.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{cy:.1f}" text-anchor="end">'
            f"{_fmt_tick(yv)}</text>"
        )
    parts.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{axis_y + 32}" '
        f'text-anchor="middle">{x_name}</text>'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2:.1f})">{y_name}</text>'
    )

    bar_x = _MARGIN_LEFT + plot_w + _BAR_GAP
    for i in range(_BAR_STEPS):
        frac = i / (_BAR_STEPS - 1)
        err = ERR_HIGH - frac * (ERR_HIGH - ERR_LOW)  # top = failure end
        seg_h = plot_h / _BAR_STEPS
        parts.append(
            f'<rect class="cbar" x="{bar_x}" y="{_MARGIN_TOP + i * seg_h:.1f}" '
            f'width="{_BAR_W}" height="{seg_h + 0.5:.1f}" fill="{_fill(err)}"/>'
        )
    for err, frac in ((ERR_HIGH, 0.0), ((ERR_HIGH + ERR_LOW) / 2, 0.5), (ERR_LOW, 1.0)):
        ty = _MARGIN_TOP + frac * plot_h
        parts.append(
            f'<text x="{bar_x + _BAR_W + 4}" y="{ty + 4:.1f}">{_fmt_tick(err)}</text>'
        )
    parts.append(
        f'<text x="{bar_x + _BAR_W + 4}" y="{_MARGIN_TOP - 6}">median err</text>'
    )

    if cfg.kind.startswith("phase_") and y_name == "n":
        points = []
        row_of = {value: row for row, value in enumerate(y_values)}
        for col, (sec, n_star) in enumerate(grid.boundary()):
            if n_star is None:
                continue
            cx = x_left(col) + _CELL_W / 2
            cy = y_top(row_of[n_star]) + _CELL_H / 2
            points.append(f"{cx:.1f},{cy:.1f}")
        if points:
            parts.append(
                f'<polyline class="boundary" points="{" ".join(points)}" '
                'fill="none" stroke="white" stroke-width="2" stroke-dasharray="4 3"/>'
            )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
