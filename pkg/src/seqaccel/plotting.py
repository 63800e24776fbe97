"""Loss-curve figures: a deterministic SVG writer plus a matplotlib render.

The SVG output is the reproducibility contract: one polyline per series,
green for the accelerated run and red for the plain run, with byte-identical
output for identical inputs. The matplotlib PNG is a richer companion figure
(loss and accuracy panels) rendered alongside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidParameterError
from .trainer import TrainingTrace

ROLE_WITH_AA = "with_aa"
ROLE_WITHOUT_AA = "without_aa"
ROLE_COLORS = {ROLE_WITH_AA: "green", ROLE_WITHOUT_AA: "red"}

X_LABEL = "iterations"
Y_LABEL = "cross entropy loss"

_WIDTH, _HEIGHT = 800, 500
_ML, _MR, _MT, _MB = 78, 24, 24, 58


@dataclass(frozen=True)
class PlotSeries:
    """One curve: display label, trace CSV path and a color role."""

    label: str
    path: str
    role: str

    def __post_init__(self):
        if self.role not in ROLE_COLORS:
            raise InvalidParameterError(
                f"role must be one of {tuple(ROLE_COLORS)}, got {self.role!r}"
            )


@dataclass
class PlotSpec:
    """Figure description: series list, axis labels and the output path."""

    series: list[PlotSeries]
    out_path: str
    x_label: str = X_LABEL
    y_label: str = Y_LABEL

    def __post_init__(self):
        if not self.series:
            raise InvalidParameterError("plot needs at least one series")


def _nice_step(span: float, target: int) -> float:
    raw = span / max(target - 1, 1)
    exponent = math.floor(math.log10(raw))
    fraction = raw / 10**exponent
    if fraction < 1.5:
        nice = 1.0
    elif fraction < 3.0:
        nice = 2.0
    elif fraction < 7.0:
        nice = 5.0
    else:
        nice = 10.0
    return nice * 10**exponent

def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    step = _nice_step(hi - lo, target)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + step * 1e-9:
        out.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return out


def render_svg(spec: PlotSpec, loaded: list[tuple[PlotSeries, TrainingTrace]]) -> str:
    """Render the loss curves to an SVG 1.1 string with deterministic bytes."""
    xs_all: list[float] = []
    ys_all: list[float] = []
    for _, trace in loaded:
        xs_all.extend(r.iteration for r in trace.records)
        ys_all.extend(r.mean_loss for r in trace.records)
    x0, x1 = min(xs_all), max(xs_all)
    if x0 == x1:
        x0, x1 = x0 - 1.0, x1 + 1.0
    y0, y1 = min(ys_all), max(ys_all)
    if y0 == y1:
        y0, y1 = y0 - 0.5, y1 + 0.5
    else:
        pad = (y1 - y0) * 0.05
        y0, y1 = y0 - pad, y1 + pad

    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def sx(v: float) -> float:
        return _ML + (v - x0) / (x1 - x0) * plot_w

    def sy(v: float) -> float:
        return _MT + (1.0 - (v - y0) / (y1 - y0)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_MT + plot_h}" x2="{_ML + plot_w}" y2="{_MT + plot_h}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + plot_h}" '
        f'stroke="black" stroke-width="1"/>',
    ]
    font = 'font-family="Helvetica, Arial, sans-serif"'
    for tv in _ticks(x0, x1):
        px = sx(tv)
        parts.append(
            f'<line x1="{px:.2f}" y1="{_MT + plot_h}" x2="{px:.2f}" '
            f'y2="{_MT + plot_h + 5}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{_MT + plot_h + 20}" {font} font-size="12" '
            f'text-anchor="middle">{tv:g}</text>'
        )
    for tv in _ticks(y0, y1):
        py = sy(tv)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{py:.2f}" x2="{_ML}" y2="{py:.2f}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_ML - 9}" y="{py + 4:.2f}" {font} font-size="12" '
            f'text-anchor="end">{tv:g}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.2f}" y="{_HEIGHT - 14}" {font} font-size="14" '
        f'text-anchor="middle">{spec.x_label}</text>'
    )
    parts.append(
        f'<text x="20" y="{_MT + plot_h / 2:.2f}" {font} font-size="14" '
        f'text-anchor="middle" transform="rotate(-90 20 {_MT + plot_h / 2:.2f})">'
        f"{spec.y_label}</text>"
    )
    for series, trace in loaded:
        color = ROLE_COLORS[series.role]
        points = " ".join(
            f"{sx(r.iteration):.2f},{sy(r.mean_loss):.2f}" for r in trace.records
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.6" stroke-linejoin="round"/>'
        )
    legend_x = _ML + plot_w - 160
    for i, (series, _) in enumerate(loaded):
        ly = _MT + 16 + 18 * i
        color = ROLE_COLORS[series.role]
        parts.append(
            f'<line x1="{legend_x}" y1="{ly - 4}" x2="{legend_x + 26}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.6"/>'
        )
        parts.append(
            f'<text x="{legend_x + 32}" y="{ly}" {font} font-size="12">{series.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_png(
    loaded: list[tuple[PlotSeries, TrainingTrace]], out_path: str | Path
) -> None:
    """Render loss and accuracy panels to a PNG via the Agg backend."""
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(8, 5), dpi=150)
    FigureCanvasAgg(fig)
    ax_loss, ax_acc = fig.subplots(2, 1, sharex=True)
    for series, trace in loaded:
        xs = [r.iteration for r in trace.records]
        color = ROLE_COLORS[series.role]
        ax_loss.plot(xs, [r.mean_loss for r in trace.records], color=color, label=series.label)
        ax_acc.plot(xs, [r.accuracy for r in trace.records], color=color, label=series.label)
    ax_loss.set_ylabel(Y_LABEL)
    ax_loss.grid(alpha=0.3)
    ax_loss.legend()
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_xlabel(X_LABEL)
    ax_acc.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="png")
