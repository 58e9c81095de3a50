"""Deterministic matplotlib renders of the simulator's output files.

Four figure kinds, one input file each:

  covariance  covariance CSV; estimates as points over the kernel curve
              with a +-3 sigma band around the kernel
  gaussianity field CSV; histogram of |value| at the base offset with the
              matching Rayleigh density
  decay       decay CSV (t, b0); log-scale amplitude with a fitted slope
  meanphase   mean-phase summary JSON; panel mean against h

The module only rearranges numbers the simulator already computed; the one
derived quantity (the decay slope) is a display aid on the fitted line.
Renders are byte-stable for identical inputs: fixed style, no timestamps.
"""

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, read_meanphase_json, read_table

KINDS = ("covariance", "gaussianity", "decay", "meanphase")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "waveplots",
}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw, from where, to where."""

    inputs: tuple
    kind: str
    out_path: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("a figure needs at least one input file")
        for p in self.inputs:
            if not os.path.exists(p):
                raise FileNotFoundError(f"figure input does not exist: {p}")


def band_coverage(table):
    """Fraction of covariance estimates within 3 sigma of the kernel."""
    dev = np.abs(table["re"] + 1j * table["im"] - table["kernel_reference"])
    return float(np.mean(dev <= 3.0 * np.maximum(table["stderr"], 1e-12)))


def decay_slope(table):
    """Least-squares slope of log b0 against t."""
    return float(np.polyfit(table["t"], np.log(table["b0"]), 1)[0])


def _draw_covariance(ax, path):
    tab = read_table(path, "covariance")
    r, ref, se = tab["r"], tab["kernel_reference"], np.maximum(tab["stderr"], 1e-12)
    ax.fill_between(r, ref - 3 * se, ref + 3 * se, color="#b0c4de", alpha=0.6,
                    label="kernel +- 3 sigma")
    ax.plot(r, ref, "-", color="#2f4f4f", lw=1.2, label="kernel")
    ax.plot(r, tab["re"], "o", ms=4, color="#b22222", label="Re estimate")
    ax.plot(r, tab["im"], "x", ms=4, color="#cd853f", label="Im estimate")
    frac = band_coverage(tab)
    n = len(r)
    ax.annotate(f"in band: {round(frac * n)}/{n}", xy=(0.98, 0.95),
                xycoords="axes fraction", ha="right")
    ax.set_xlabel("separation r")
    ax.set_ylabel("covariance")
    ax.legend(loc="upper right", fontsize=8, framealpha=0.9)
    return "radial covariance vs kernel"


def _draw_gaussianity(ax, path):
    tab = read_table(path, "field")
    base = (tab["y1"] == 0.0) & (tab["y2"] == 0.0)
    if not np.any(base):
        raise SchemaError(f"{path}: no base-offset rows (y1 = y2 = 0)")
    a = np.hypot(tab["re"][base], tab["im"][base])
    sigma2 = float(np.mean(a**2)) / 2.0
    edges = np.linspace(0.0, max(float(a.max()), 1e-9), 25)
    ax.hist(a, bins=edges, density=True, color="#b0c4de", edgecolor="#2f4f4f",
            label=f"|value| at base offset (n={a.size})")
    grid = np.linspace(0.0, edges[-1], 200)
    ray = grid / sigma2 * np.exp(-(grid**2) / (2.0 * sigma2))
    ax.plot(grid, ray, "-", color="#b22222", lw=1.4,
            label="Rayleigh, matched 2nd moment")
    ax.set_xlabel("|value|")
    ax.set_ylabel("density")
    ax.legend(loc="upper right", fontsize=8, framealpha=0.9)
    return "field modulus vs the Gaussian law"


def _draw_decay(ax, path):
    tab = read_table(path, "decay")
    t, b0 = tab["t"], tab["b0"]
    slope = decay_slope(tab)
    ax.semilogy(t, b0, "o-", color="#2f4f4f", ms=4, label="sup b0(t)")
    anchor = float(np.exp(np.mean(np.log(b0)) - slope * np.mean(t)))
    ax.semilogy(t, anchor * np.exp(slope * t), "--", color="#b22222", lw=1.2,
                label=f"fit slope {slope:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("amplitude")
    ax.legend(loc="upper right", fontsize=8, framealpha=0.9)
    return "amplitude decay"


def _draw_meanphase(ax, path):
    doc = read_meanphase_json(path)
    ax.loglog(doc["h"], doc["mean"], "o-", color="#2f4f4f", ms=5, label="panel mean")
    verdict = doc["decreasing"]
    if verdict is not None:
        ax.annotate(f"decreasing in h: {'yes' if verdict else 'no'}",
                    xy=(0.02, 0.05), xycoords="axes fraction")
    ax.set_xlabel("h")
    ax.set_ylabel("debiased |mean phase factor|")
    ax.invert_xaxis()
    ax.legend(loc="upper left", fontsize=8, framealpha=0.9)
    return "mean phase factor vs h"


_DRAWERS = {
    "covariance": _draw_covariance,
    "gaussianity": _draw_gaussianity,
    "decay": _draw_decay,
    "meanphase": _draw_meanphase,
}


def render(spec):
    """Draw the figure and return the output path."""
    style = dict(_STYLE)
    dpi = spec.style.get("dpi")
    if dpi:
        style["savefig.dpi"] = dpi
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        try:
            title = _DRAWERS[spec.kind](ax, spec.inputs[0])
            ax.set_title(spec.style.get("title", title))
            fig.savefig(spec.out_path, metadata=_clean_metadata(spec.out_path))
        finally:
            plt.close(fig)
    return spec.out_path


def _clean_metadata(out_path):
    # SVG embeds a creation date unless told otherwise; PNG does not.
    if os.fspath(out_path).lower().endswith(".svg"):
        return {"Date": None}
    return None
