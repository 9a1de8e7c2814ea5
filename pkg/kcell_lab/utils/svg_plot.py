# kcell_lab/utils/svg_plot.py
"""
Deterministic SVG plots rendered from Jinja2 templates: log-log gap plot
with error bars and the fitted line, and the tail survival plot.
Output depends only on the CSV / report values passed in.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from kcell_lab.core.logging import LoggerManager

logger = LoggerManager.get_logger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
PALETTE = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

_env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), undefined=StrictUndefined,
                   autoescape=True, keep_trailing_newline=True)


def _r(value: float) -> float:
    return round(float(value), 2)


@dataclass
class PlotArea:
    title: str
    x_label: str
    y_label: str
    x_range: tuple
    y_range: tuple
    width: int = 640
    height: int = 440
    left: int = 70
    right_margin: int = 20
    top: int = 40
    bottom_margin: int = 50
    x_ticks: List[Dict[str, Any]] = field(default_factory=list)
    y_ticks: List[Dict[str, Any]] = field(default_factory=list)
    series: List[Dict[str, Any]] = field(default_factory=list)
    fit: Optional[Dict[str, Any]] = None

    @property
    def right(self) -> int:
        return self.width - self.right_margin

    @property
    def bottom(self) -> int:
        return self.height - self.bottom_margin

    @property
    def inner_width(self) -> int:
        return self.right - self.left

    @property
    def inner_height(self) -> int:
        return self.bottom - self.top

    def sx(self, x: float) -> float:
        lo, hi = self.x_range
        return _r(self.left + (x - lo) / (hi - lo) * self.inner_width)

    def sy(self, y: float) -> float:
        lo, hi = self.y_range
        return _r(self.bottom - (y - lo) / (hi - lo) * self.inner_height)


def _padded(lo: float, hi: float, pad: float = 0.05) -> tuple:
    if hi <= lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def log_ticks(lo: float, hi: float) -> List[float]:
    """Tick values (in log10 space) at 1, 2, 5 times powers of ten inside [lo, hi]"""
    ticks = []
    for e in range(int(math.floor(lo)) - 1, int(math.ceil(hi)) + 1):
        for m in (1.0, 2.0, 5.0):
            t = e + math.log10(m)
            if lo <= t <= hi:
                ticks.append(t)
    if len(ticks) > 12:
        ticks = [t for t in ticks if abs(t - round(t)) < 1e-12]
    return ticks


def _tick_label(t: float) -> str:
    return f"{10.0 ** t:.3g}"


def render_gap_plot(frame: pd.DataFrame, fit: Optional[Dict[str, Any]] = None,
                    title: str = "mean width gap") -> str:
    """Log-log plot of mean_gap against n, one series per experiment label"""
    data = frame[frame["mean_gap"] > 0]
    if data.empty:
        raise ValueError("no positive mean_gap values to plot")
    lx = np.log10(data["n"].to_numpy(dtype=float))
    mean = data["mean_gap"].to_numpy(dtype=float)
    se = data["stderr"].to_numpy(dtype=float)
    high = np.log10(mean + se)
    low = np.log10(np.where(mean - se > 0, mean - se, mean))
    plot = PlotArea(title, "n", "E W(Z) - W(K)",
                    _padded(lx.min(), lx.max()), _padded(low.min(), high.max()))
    plot.x_ticks = [{"pos": plot.sx(t), "label": _tick_label(t)} for t in log_ticks(*plot.x_range)]
    plot.y_ticks = [{"pos": plot.sy(t), "label": _tick_label(t)} for t in log_ticks(*plot.y_range)]

    for k, (label, group) in enumerate(data.groupby("experiment", sort=False)):
        points = []
        for n, m, s in zip(group["n"], group["mean_gap"], group["stderr"]):
            y_low = m - s if m - s > 0 else m
            points.append({
                "x": plot.sx(math.log10(n)), "y": plot.sy(math.log10(m)),
                "y_low": plot.sy(math.log10(y_low)), "y_high": plot.sy(math.log10(m + s)),
            })
        plot.series.append({"label": str(label), "color": PALETTE[k % len(PALETTE)], "points": points})

    if fit is not None:
        slope, intercept = float(fit["slope"]), float(fit["intercept"])
        x1, x2 = lx.min(), lx.max()

        def y(x):
            # ln(gap) = intercept + slope ln(n)  ->  log10(gap) = intercept/ln10 + slope log10(n)
            return intercept / math.log(10.0) + slope * x

        lo, hi = fit.get("slope_ci_95", (slope, slope))
        plot.fit = {
            "x1": plot.sx(x1), "y1": plot.sy(y(x1)), "x2": plot.sx(x2), "y2": plot.sy(y(x2)),
            "label": f"slope {slope:.4f} [{lo:.4f}, {hi:.4f}]",
        }
    return _env.get_template("gap_plot.svg.j2").render(plot=plot)


def render_survival_plot(x_grid: Sequence[float], curves: Dict[str, Sequence[float]],
                         title: str = "circumradius tail") -> str:
    """log10 P(R_o(Z) > b(R_o(K) + x)) against x; each curve stops at its first zero"""
    x_grid = np.asarray(x_grid, dtype=float)
    kept = {}
    for label, values in curves.items():
        values = np.asarray(values, dtype=float)
        positive = values > 0
        stop = int(np.argmin(positive)) if not positive.all() else values.size
        if stop:
            kept[label] = (x_grid[:stop], np.log10(values[:stop]))
    if not kept:
        raise ValueError("all survival curves are zero")
    y_min = min(v.min() for _, v in kept.values())
    plot = PlotArea(title, "x", "survival", _padded(x_grid.min(), x_grid.max(), 0.0),
                    _padded(min(y_min, -0.5), 0.0))
    plot.x_ticks = [{"pos": plot.sx(t), "label": f"{t:g}"}
                    for t in np.linspace(x_grid.min(), x_grid.max(), 5)]
    plot.y_ticks = [{"pos": plot.sy(t), "label": _tick_label(t)} for t in log_ticks(*plot.y_range)]
    for k, (label, (xs, ys)) in enumerate(kept.items()):
        plot.series.append({
            "label": f"n={float(label):g}", "color": PALETTE[k % len(PALETTE)],
            "points": [{"x": plot.sx(x), "y": plot.sy(y)} for x, y in zip(xs, ys)],
        })
    return _env.get_template("survival_plot.svg.j2").render(plot=plot)


def plot_gap_csv(csv_path: Path, svg_path: Path, fit: Optional[Dict[str, Any]] = None,
                 title: Optional[str] = None) -> Path:
    data = pd.read_csv(csv_path, dtype={"seed": str})
    title = title or Path(csv_path).stem
    svg_path = Path(svg_path)
    svg_path.write_text(render_gap_plot(data, fit, title), encoding="utf-8")
    logger.info(f"Wrote plot {svg_path}")
    return svg_path


def plot_survival(x_grid: Sequence[float], curves: Dict[str, Sequence[float]], svg_path: Path,
                  title: str = "circumradius tail") -> Path:
    svg_path = Path(svg_path)
    svg_path.write_text(render_survival_plot(x_grid, curves, title), encoding="utf-8")
    logger.info(f"Wrote plot {svg_path}")
    return svg_path
