"""Power spectra, logarithmic binning and low-frequency power-law fits.

The default chain is: demodulate, periodogram of the whole (mean-removed)
series, average the PSD in bins of equal width in ``log10 f``, then ordinary
least squares of ``log10 psd`` on ``log10 f`` between ``f_lo`` and ``f_hi``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy import stats

from .signal import DemodMethod, TimeSeries, demodulate

__all__ = [
    "Spectrum",
    "PowerLawFit",
    "SlopeTimeline",
    "Analysis",
    "psd",
    "log_bin",
    "fit_power_law",
    "find_knee",
    "analyze",
    "slope_of",
    "sliding_slopes",
    "classify_slope",
    "write_spectrum_csv",
    "write_timeline_csv",
    "fit_report",
    "dumps_report",
]

_WINDOWS = {"rect": "boxcar", "boxcar": "boxcar", "hann": "hann"}


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    psd: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.float64)
        p = np.asarray(self.psd, dtype=np.float64)
        if f.shape != p.shape:
            raise ValueError("freqs and psd differ in length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly ascending")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("psd must be finite and non-negative")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "psd", p)

    def __len__(self):
        return self.freqs.size


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line in log-log coordinates.

    ``intercept`` is ``log10`` of the fitted power at 1 Hz.
    """

    slope: float
    intercept: float
    f_lo: float
    f_hi: float
    r2: float
    n_bins: int
    stderr: float = float("nan")

    def predict(self, f):
        return 10 ** (self.intercept + self.slope * np.log10(f))

    def decades(self) -> float:
        return math.log10(self.f_hi / self.f_lo)


@dataclass(frozen=True)
class SlopeTimeline:
    times: np.ndarray
    slopes: np.ndarray
    window: float
    hop: float
    r2: np.ndarray | None = None

    def __len__(self):
        return self.times.size


def psd(ts: TimeSeries, estimator: str = "periodogram", n_segments: int = 16,
        window: str = "rect") -> Spectrum:
    """One-sided PSD (units²/Hz) of the mean-removed series, DC bin dropped.

    ``periodogram`` transforms the whole series; ``segment_average`` splits
    it into ``n_segments`` non-overlapping pieces and averages their
    periodograms. With the rectangular window the periodogram satisfies
    ``sum(psd) * df == var(x)``.
    """
    x = ts.samples
    if x.size < 16:
        raise ValueError(f"need at least 16 samples for a PSD, got {x.size}")
    try:
        win = _WINDOWS[window]
    except KeyError:
        raise ValueError(f"unknown window {window!r}; use 'rect' or 'hann'") from None
    if estimator == "periodogram":
        f, p = sps.periodogram(x, fs=ts.rate, window=win, detrend="constant", scaling="density")
        meta = {"estimator": "periodogram"}
    elif estimator == "segment_average":
        nper = x.size // int(n_segments)
        if nper < 16:
            raise ValueError(f"{n_segments} segments leave only {nper} samples each")
        f, p = sps.welch(x[: nper * int(n_segments)], fs=ts.rate, window=win, nperseg=nper,
                         noverlap=0, detrend="constant", scaling="density", average="mean")
        meta = {"estimator": "segment_average", "n_segments": int(n_segments)}
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    meta.update(n_samples=int(x.size), rate=ts.rate, window=window)
    return Spectrum(f[1:], p[1:], meta)


def log_bin(spec: Spectrum, bins_per_decade: int = 10) -> Spectrum:
    """Average the PSD over bins of equal width in ``log10 f``.

    Bin edges sit at ``10**(k / bins_per_decade)``. Each output point is
    the geometric mean frequency and arithmetic mean power of its bin;
    empty bins are skipped.
    """
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be >= 1")
    f, p = spec.freqs, spec.psd
    pos = f > 0
    f, p = f[pos], p[pos]
    if f.size == 0:
        return Spectrum(f, p, dict(spec.meta, bins_per_decade=bins_per_decade))
    lf = np.log10(f)
    idx = np.floor(lf * bins_per_decade + 1e-9).astype(np.int64)
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    counts = np.diff(np.r_[starts, f.size])
    fb = 10 ** (np.add.reduceat(lf, starts) / counts)
    pb = np.add.reduceat(p, starts) / counts
    return Spectrum(fb, pb, dict(spec.meta, bins_per_decade=bins_per_decade))


def fit_power_law(spec: Spectrum, f_lo: float | None = None, f_hi: float | None = None) -> PowerLawFit:
    """OLS of ``log10 psd`` against ``log10 f`` over ``f_lo <= f <= f_hi``.

    Missing bounds default to the ends of the spectrum. Points with zero
    power are left out.
    """
    f, p = spec.freqs, spec.psd
    lo = f[0] if f_lo is None else f_lo
    hi = f[-1] if f_hi is None else f_hi
    if not lo < hi:
        raise ValueError(f"empty fit range [{lo:g}, {hi:g}] Hz")
    tol = 1e-9
    m = (f >= lo * (1 - tol)) & (f <= hi * (1 + tol)) & (p > 0)
    n = int(m.sum())
    if n < 3:
        raise ValueError(f"only {n} spectral points in [{lo:g}, {hi:g}] Hz; need at least 3")
    lf, lp = np.log10(f[m]), np.log10(p[m])
    res = stats.linregress(lf, lp)
    r2 = float(res.rvalue ** 2) if np.ptp(lp) > 0 else 1.0
    return PowerLawFit(float(res.slope), float(res.intercept), float(lo), float(hi), r2, n,
                       float(res.stderr))


def find_knee(spec: Spectrum, f_lo: float | None = None, min_points: int = 5) -> PowerLawFit:
    """Fit with the upper cutoff that maximises r² over the binned points.

    Candidate cutoffs are the binned frequencies themselves; among equally
    good fits the widest range wins. Never applied implicitly by the other
    functions.
    """
    f = spec.freqs
    lo = f[0] if f_lo is None else f_lo
    cands = f[f >= lo]
    best = None
    for hi in cands[min_points - 1:]:
        try:
            fit = fit_power_law(spec, lo, hi)
        except ValueError:
            continue
        if best is None or fit.r2 >= best.r2 - 1e-12:
            best = fit
    if best is None:
        raise ValueError(f"fewer than {min_points} points above {lo:g} Hz")
    return best


@dataclass(frozen=True)
class Analysis:
    envelope: TimeSeries
    spectrum: Spectrum
    binned: Spectrum
    fit: PowerLawFit
    demod: DemodMethod


def analyze(ts: TimeSeries, demod: DemodMethod | str = "identity", f_lo: float | None = None,
            f_hi: float | None = None, bins_per_decade: int = 10, estimator: str = "periodogram",
            n_segments: int = 16, window: str = "rect") -> Analysis:
    """Demodulate, estimate the PSD, log-bin and fit in one call."""
    if isinstance(demod, str):
        demod = DemodMethod.parse(demod)
    env = demodulate(ts, demod)
    spec = psd(env, estimator, n_segments, window)
    binned = log_bin(spec, bins_per_decade)
    fit = fit_power_law(binned, f_lo, f_hi)
    return Analysis(env, spec, binned, fit, demod)


def slope_of(ts: TimeSeries, demod: DemodMethod | str = "square", f_lo=None, f_hi=None, **kw) -> float:
    return analyze(ts, demod, f_lo, f_hi, **kw).fit.slope


def sliding_slopes(ts: TimeSeries, window: float, hop: float, demod: DemodMethod | str = "square",
                   f_lo: float | None = None, f_hi: float | None = None, bins_per_decade: int = 10,
                   estimator: str = "periodogram", spectral_window: str = "rect") -> SlopeTimeline:
    """Fitted slope in consecutive windows of ``window`` s, advanced by ``hop`` s.

    Timestamps are window centres. ``f_lo`` defaults to ``10 / window``, the
    lowest frequency a window resolves with some margin.
    """
    if not hop > 0:
        raise ValueError("hop must be > 0")
    if window > ts.duration * (1 + 1e-12):
        raise ValueError(f"window {window:g} s exceeds the {ts.duration:g} s input")
    if f_lo is None:
        f_lo = 10.0 / window
    if window < 10.0 / f_lo * (1 - 1e-9):
        raise ValueError(f"window {window:g} s cannot resolve f_lo={f_lo:g} Hz; need >= {10 / f_lo:g} s")
    wn = int(round(window * ts.rate))
    hn = int(round(hop * ts.rate))
    if hn < 1:
        raise ValueError("hop shorter than one sample")
    count = (len(ts) - wn) // hn + 1
    times = np.empty(count)
    slopes = np.empty(count)
    r2 = np.empty(count)
    for i in range(count):
        seg = TimeSeries(ts.samples[i * hn: i * hn + wn], ts.rate, ts.origin + i * hn / ts.rate)
        fit = analyze(seg, demod, f_lo, f_hi, bins_per_decade, estimator, window=spectral_window).fit
        times[i] = seg.origin + wn / (2 * ts.rate)
        slopes[i] = fit.slope
        r2[i] = fit.r2
    return SlopeTimeline(times, slopes, float(window), float(hop), r2)


def classify_slope(slope: float) -> str:
    """Label a fitted slope: pink near -1, white near 0, brown at -1.5 and below."""
    if not math.isfinite(slope):
        raise ValueError("slope must be finite")
    if -1.2 <= slope <= -0.8:
        return "pink"
    if -0.5 < slope < 0.5:
        return "white"
    if slope <= -1.5:
        return "brown"
    return "other"


def write_spectrum_csv(spec: Spectrum, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("f_hz,psd\n")
        for f, p in zip(spec.freqs.tolist(), spec.psd.tolist()):
            fh.write(f"{f!r},{p!r}\n")
    return path


def write_timeline_csv(tl: SlopeTimeline, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("t_s,slope\n")
        for t, s in zip(tl.times.tolist(), tl.slopes.tolist()):
            fh.write(f"{t!r},{s!r}\n")
    return path


def fit_report(analysis: Analysis, source_rate: float | None = None) -> dict:
    fit = analysis.fit
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "f_lo": fit.f_lo,
        "f_hi": fit.f_hi,
        "decades": fit.decades(),
        "r2": fit.r2,
        "n_bins": fit.n_bins,
        "stderr": fit.stderr,
        "class": classify_slope(fit.slope),
        "demod": analysis.demod.label(),
        "envelope_rate": analysis.envelope.rate,
        "source_rate": source_rate,
        "estimator": dict(analysis.spectrum.meta),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
