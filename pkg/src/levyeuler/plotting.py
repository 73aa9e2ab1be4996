"""Plot-ready rate data and a log-log figure rendered with the Agg backend."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PLOT_COLUMNS = ("series", "p", "log2_x", "log2_estimate", "log2_fit")


@dataclass
class Series:
    label: str
    p: float
    xs: list
    estimates: list
    slope: float
    intercept: float  # natural-log intercept of the fit


def _log2(v: float) -> str:
    return repr(math.log2(v)) if v > 0 and math.isfinite(v) else ""


def plot_rows(series: list[Series]) -> list[list[str]]:
    rows = []
    for s in series:
        has_fit = math.isfinite(s.slope) and math.isfinite(s.intercept)
        for x, e in zip(s.xs, s.estimates):
            fit = ""
            if has_fit:
                fit = repr((s.slope * math.log(x) + s.intercept) / math.log(2.0))
            rows.append([s.label, repr(float(s.p)), _log2(x), _log2(e), fit])
    return rows


def write_plot_csv(series: list[Series], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        w.writerows(plot_rows(series))


def render_rate_figure(series: list[Series], path, title: str = "", xlabel: str = "n") -> None:
    """Log-log estimates with their fitted lines; skips series with no positive estimate."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=120)
    drawn = False
    for k, s in enumerate(series):
        pts = [(x, e) for x, e in zip(s.xs, s.estimates) if e > 0 and math.isfinite(e)]
        if not pts:
            continue
        color = f"C{k % 10}"
        ax.plot(*zip(*pts), "o", color=color, label=f"{s.label}, p={s.p:g}")
        if math.isfinite(s.slope):
            xs = [p[0] for p in pts]
            ax.plot(xs, [math.exp(s.intercept) * x**s.slope for x in xs], "-", color=color, lw=1,
                    label=f"slope {s.slope:.3f}")
        drawn = True
    if drawn:
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.legend(fontsize=8, frameon=False)
    else:
        ax.text(0.5, 0.5, "all estimates zero", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("estimate")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(Path(path), metadata={"Software": None})
    plt.close(fig)
