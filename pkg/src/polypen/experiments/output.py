"""Result serialization: CSV table, JSON run record, SVG figures.

Everything written here is a pure function of the ResultTable, so rerunning
with the same config and seed reproduces every output byte for byte.  Floats
go through repr-exact '%.17g' in the CSV and fixed low precision in the SVG
geometry (coordinates quantized to 0.01 px).
"""

from __future__ import annotations

import csv
import json
from typing import Iterable

from ..errors import ConfigError
from .runner import ResultRow, ResultTable

__all__ = ["CSV_COLUMNS", "emit_csv", "read_result_csv", "emit_plot", "write_metadata"]

# Fixed column order; documented in the README.
CSV_COLUMNS = (
    "key",
    "alpha",
    "rmse",
    "rmse_se",
    "mean_rre",
    "rre_se",
    "recovery",
    "recovery_se",
    "count",
    "exclusions",
)

_METRICS = {
    "rmse": ("rmse", "RMSE"),
    "rre": ("mean_rre", "mean relative residual error"),
    "recovery": ("recovery", "pattern recovery rate"),
}

_PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def emit_csv(table: ResultTable, path: str) -> None:
    """One row per grid cell, UTF-8, floats at 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table.rows:
            writer.writerow(
                [
                    row.key,
                    _g17(row.alpha),
                    _g17(row.rmse),
                    _g17(row.rmse_se),
                    _g17(row.mean_rre),
                    _g17(row.rre_se),
                    _g17(row.recovery),
                    _g17(row.recovery_se),
                    row.count,
                    row.exclusions,
                ]
            )


def read_result_csv(path: str) -> tuple[ResultRow, ...]:
    """Inverse of emit_csv (17 significant digits make the floats exact)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"unexpected result CSV header: {header}")
        rows = []
        for rec in reader:
            rows.append(
                ResultRow(
                    key=rec[0],
                    alpha=float(rec[1]),
                    rmse=float(rec[2]),
                    rmse_se=float(rec[3]),
                    mean_rre=float(rec[4]),
                    rre_se=float(rec[5]),
                    recovery=float(rec[6]),
                    recovery_se=float(rec[7]),
                    count=int(rec[8]),
                    exclusions=int(rec[9]),
                )
            )
    return tuple(rows)


def write_metadata(table: ResultTable, path: str) -> None:
    """JSON run record: seed, config echo and hash, library versions."""
    blob = json.dumps(table.metadata(), indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(blob + "\n")


def _px(v: float) -> str:
    return format(v, ".2f")


def _series(table: ResultTable, column: str) -> list[tuple[str, list[tuple[float, float]]]]:
    keys = [str(n) for n in table.config.n_values] + ["asymptotic"]
    out = []
    for key in keys:
        pts = [
            (row.alpha, getattr(row, column))
            for row in table.rows
            if row.key == key
        ]
        pts.sort(key=lambda t: t[0])
        label = key if key == "asymptotic" else f"n={key}"
        out.append((label, pts))
    return out


def _axis_range(values: Iterable[float]) -> tuple[float, float]:
    vals = list(values)
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = 0.5 if lo == 0 else max(abs(lo) * 0.1, 0.5)
    else:
        pad = (hi - lo) * 0.06
    return lo - pad, hi + pad


def emit_plot(table: ResultTable, metric: str, path: str) -> None:
    """Self-contained SVG: one curve per n value plus the asymptotic curve,
    metric against the alpha grid. `metric` is one of rmse, rre, recovery."""
    if metric not in _METRICS:
        raise ConfigError(f"metric must be one of {sorted(_METRICS)}, got {metric!r}")
    column, label = _METRICS[metric]
    series = _series(table, column)

    width, height = 640.0, 420.0
    left, right, top, bottom = 64.0, 180.0, 36.0, 48.0
    plot_w = width - left - right
    plot_h = height - top - bottom

    x_lo, x_hi = _axis_range(a for _, pts in series for a, _ in pts)
    y_lo, y_hi = _axis_range(v for _, pts in series for _, v in pts)

    def sx(a: float) -> float:
        return left + (a - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<text x="{_px(left + plot_w / 2)}" y="20" font-family="sans-serif" '
        f'font-size="15" text-anchor="middle">{label}</text>',
    ]

    # axes and ticks
    axis = f'stroke="#333333" stroke-width="1"'
    parts.append(
        f'<line x1="{_px(left)}" y1="{_px(top + plot_h)}" x2="{_px(left + plot_w)}" '
        f'y2="{_px(top + plot_h)}" {axis}/>'
    )
    parts.append(
        f'<line x1="{_px(left)}" y1="{_px(top)}" x2="{_px(left)}" '
        f'y2="{_px(top + plot_h)}" {axis}/>'
    )
    for t in range(5):
        frac = t / 4.0
        ax = x_lo + frac * (x_hi - x_lo)
        px = sx(ax)
        parts.append(
            f'<line x1="{_px(px)}" y1="{_px(top + plot_h)}" x2="{_px(px)}" '
            f'y2="{_px(top + plot_h + 5)}" {axis}/>'
        )
        parts.append(
            f'<text x="{_px(px)}" y="{_px(top + plot_h + 20)}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{format(ax, ".4g")}</text>'
        )
        ay = y_lo + frac * (y_hi - y_lo)
        py = sy(ay)
        parts.append(
            f'<line x1="{_px(left - 5)}" y1="{_px(py)}" x2="{_px(left)}" '
            f'y2="{_px(py)}" {axis}/>'
        )
        parts.append(
            f'<text x="{_px(left - 9)}" y="{_px(py + 4)}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">{format(ay, ".4g")}</text>'
        )
    parts.append(
        f'<text x="{_px(left + plot_w / 2)}" y="{_px(height - 10)}" '
        f'font-family="sans-serif" font-size="12" text-anchor="middle">alpha</text>'
    )

    # one polyline + markers per series; asymptotic curve black and dashed
    legend_x = left + plot_w + 18.0
    for idx, (name, pts) in enumerate(series):
        if name == "asymptotic":
            color, dash = "#000000", ' stroke-dasharray="6 3"'
        else:
            color, dash = _PALETTE[idx % len(_PALETTE)], ""
        if len(pts) > 1:
            coords = " ".join(f"{_px(sx(a))},{_px(sy(v))}" for a, v in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="1.8"{dash}/>'
            )
        for a, v in pts:
            parts.append(
                f'<circle cx="{_px(sx(a))}" cy="{_px(sy(v))}" r="3" fill="{color}"/>'
            )
        ly = top + 12.0 + 18.0 * idx
        parts.append(
            f'<line x1="{_px(legend_x)}" y1="{_px(ly - 4)}" x2="{_px(legend_x + 22)}" '
            f'y2="{_px(ly - 4)}" stroke="{color}" stroke-width="1.8"{dash}/>'
        )
        parts.append(
            f'<text x="{_px(legend_x + 28)}" y="{_px(ly)}" font-family="sans-serif" '
            f'font-size="12">{name}</text>'
        )

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
