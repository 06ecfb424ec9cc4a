"""Static SVG figures: log-log spectra, slope timelines, slope heatmaps."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

CLASS_COLORS = {"white": "#ffffff", "pink": "#f4a6c0", "brown": "#8b5a2b", "other": "#bdbdbd",
                "failed": "#000000"}
_CLASS_ORDER = list(CLASS_COLORS)


def _save(fig, path):
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def spectrum_svg(analysis, path, title=None):
    fit = analysis.fit
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(analysis.spectrum.freqs, analysis.spectrum.psd, color="0.8", lw=0.5, label="PSD")
    ax.loglog(analysis.binned.freqs, analysis.binned.psd, "o", ms=3, color="k", label="log-binned")
    ff = np.geomspace(fit.f_lo, fit.f_hi, 50)
    ax.loglog(ff, fit.predict(ff), "r-", lw=1.5, label=f"slope {fit.slope:.2f} (r² {fit.r2:.3f})")
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("PSD")
    ax.set_title(title or f"demod: {analysis.demod.label()}")
    ax.legend(loc="lower left", fontsize=8)
    return _save(fig, path)


def timeline_svg(timeline, path, title=None):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(timeline.times, timeline.slopes, "-o", ms=2, color="k")
    ax.axhspan(-1.2, -0.8, color=CLASS_COLORS["pink"], alpha=0.5, lw=0)
    ax.axhline(-1.0, color="r", lw=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("PSD slope")
    ax.set_title(title or f"window {timeline.window:g} s, hop {timeline.hop:g} s")
    return _save(fig, path)


def heatmap_svg(smap, path, title=None):
    labels = [[smap.cells[(n, k)].label for k in smap.spec.K_values] for n in smap.spec.N_values]
    codes = np.array([[_CLASS_ORDER.index(lab) for lab in row] for row in labels])
    means = smap.grid("slope_mean")
    cmap = ListedColormap([CLASS_COLORS[c] for c in _CLASS_ORDER])
    fig, ax = plt.subplots(figsize=(1 + 0.8 * len(smap.spec.K_values), 1 + 0.7 * len(smap.spec.N_values)))
    ax.imshow(codes, cmap=cmap, vmin=-0.5, vmax=len(_CLASS_ORDER) - 0.5, origin="lower", aspect="auto")
    for i in range(codes.shape[0]):
        for j in range(codes.shape[1]):
            if np.isfinite(means[i, j]):
                color = "w" if labels[i][j] == "brown" else "k"
                ax.text(j, i, f"{means[i, j]:.2f}", ha="center", va="center", fontsize=7, color=color)
    ax.set_xticks(range(len(smap.spec.K_values)), [f"{k:g}" for k in smap.spec.K_values])
    ax.set_yticks(range(len(smap.spec.N_values)), [str(n) for n in smap.spec.N_values])
    ax.set_xlabel("K")
    ax.set_ylabel("N")
    ax.set_title(title or "PSD slope by (N, K)")
    return _save(fig, path)
