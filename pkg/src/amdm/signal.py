"""Test-signal synthesis and demodulation transforms.

Everything in the package passes signals around as :class:`TimeSeries`, a
uniformly sampled real series with a sampling rate and a start time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "DemodMethod",
    "AccumulationSpec",
    "DEMOD_KINDS",
    "synth_beat_pair",
    "synth_accumulated",
    "sample_exponential_frequencies",
    "sum_of_sines",
    "demodulate",
    "delayed_superposition",
    "colored_noise",
    "write_csv",
    "read_csv",
]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real-valued signal.

    Parameters
    ----------
    samples : array_like
        Signal amplitudes. Stored as a read-only float64 array.
    rate : float
        Sampling rate in Hz.
    origin : float
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    rate: float
    origin: float = 0.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate!r}")
        if arr.size < 1:
            raise ValueError("a TimeSeries needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("TimeSeries samples must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "origin", float(self.origin))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    @property
    def times(self) -> np.ndarray:
        return self.origin + np.arange(self.samples.size) / self.rate

    def with_samples(self, samples, rate=None, origin=None) -> "TimeSeries":
        return TimeSeries(
            samples,
            self.rate if rate is None else rate,
            self.origin if origin is None else origin,
        )

    def slice_time(self, start: float, stop: float) -> "TimeSeries":
        """Samples with ``start <= t < stop`` (times relative to origin)."""
        i0 = max(int(round(start * self.rate)), 0)
        i1 = min(int(round(stop * self.rate)), self.samples.size)
        return TimeSeries(self.samples[i0:i1], self.rate, self.origin + i0 / self.rate)


DEMOD_KINDS = (
    "identity",
    "square",
    "nth_power",
    "abs",
    "rect_pos",
    "rect_neg",
    "thresh_above_mean",
    "anti_thresh_below_mean",
    "timing",
    "block_energy",
)

_DEMOD_ALIASES = {
    "raw": "identity",
    "none": "identity",
    "sq": "square",
    "power": "nth_power",
    "pow": "nth_power",
    "absolute": "abs",
    "rect": "rect_pos",
    "thresh": "thresh_above_mean",
    "anti_thresh": "anti_thresh_below_mean",
    "block": "block_energy",
}


@dataclass(frozen=True)
class DemodMethod:
    """A demodulation transform applied before spectral analysis.

    ``n`` is used by ``nth_power`` and ``block_len`` by ``block_energy``.
    ``literal`` switches ``anti_thresh_below_mean`` to the formula
    ``x * H(mu - x)``, which also keeps negative samples.
    """

    kind: str = "square"
    n: int = 2
    block_len: int = 100
    literal: bool = False

    def __post_init__(self):
        kind = _DEMOD_ALIASES.get(self.kind, self.kind)
        if kind not in DEMOD_KINDS:
            raise ValueError(f"unknown demodulation {self.kind!r}; choose from {', '.join(DEMOD_KINDS)}")
        object.__setattr__(self, "kind", kind)
        if int(self.n) < 1:
            raise ValueError(f"power n must be >= 1, got {self.n}")
        if int(self.block_len) < 1:
            raise ValueError(f"block_len must be >= 1, got {self.block_len}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "block_len", int(self.block_len))

    @classmethod
    def parse(cls, text: str) -> "DemodMethod":
        """Parse ``"square"``, ``"nth_power:3"``, ``"block_energy:100"`` and similar."""
        name, _, arg = text.strip().partition(":")
        name = _DEMOD_ALIASES.get(name, name)
        if name == "nth_power":
            return cls(name, n=int(arg) if arg else 2)
        if name == "block_energy":
            return cls(name, block_len=int(arg) if arg else 100)
        if name == "anti_thresh_below_mean" and arg == "literal":
            return cls(name, literal=True)
        if arg:
            raise ValueError(f"demodulation {name!r} takes no argument")
        return cls(name)

    def label(self) -> str:
        if self.kind == "nth_power":
            return f"nth_power:{self.n}"
        if self.kind == "block_energy":
            return f"block_energy:{self.block_len}"
        if self.kind == "anti_thresh_below_mean" and self.literal:
            return "anti_thresh_below_mean:literal"
        return self.kind


@dataclass(frozen=True)
class AccumulationSpec:
    """Parameters of an exponentially accumulated set of sine frequencies.

    Component ``i`` sits at ``base_freq * (1 + scale * exp(-xi_i))`` with
    ``xi_i`` uniform on ``[0, xi_max]``. The smallest offset is
    ``base_freq * scale * exp(-xi_max)``; keeping it near the frequency
    resolution of the record (``exp(xi_max) ~ base_freq * scale * T``)
    avoids components whose beats are slower than the record itself.
    """

    base_freq: float
    scale: float
    count: int
    xi_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not self.base_freq > 0:
            raise ValueError("base_freq must be > 0")
        if int(self.count) < 1:
            raise ValueError("count must be >= 1")
        if not self.xi_max > 0:
            raise ValueError("xi_max must be > 0")


def _check_nyquist(freqs, rate):
    fmax = float(np.max(freqs))
    if fmax >= rate / 2:
        raise ValueError(
            f"component at {fmax:g} Hz aliases at rate {rate:g} Hz (Nyquist {rate / 2:g} Hz)"
        )


def _check_duration(duration, rate):
    if not duration > 0:
        raise ValueError("duration must be > 0")
    n = int(round(duration * rate))
    if n < 1:
        raise ValueError("duration shorter than one sample")
    return n


def sum_of_sines(freqs, n: int, rate: float, t0: float = 0.0, chunk: int = 64) -> np.ndarray:
    """Unit-amplitude, zero-phase sum ``sum_i sin(2 pi f_i t)`` on ``t0 + k/rate``."""
    t = t0 + np.arange(n) / rate
    out = np.zeros(n)
    freqs = np.asarray(freqs, dtype=np.float64)
    for i in range(0, freqs.size, chunk):
        out += np.sin(2 * np.pi * np.outer(freqs[i:i + chunk], t)).sum(axis=0)
    return out


def synth_beat_pair(lam: float, omega: float, duration: float, rate: float) -> TimeSeries:
    """Two sines at ``omega +- lam`` Hz, i.e. a carrier with envelope ``2 cos(2 pi lam t)``."""
    if not lam > 0:
        raise ValueError("beat offset lambda must be > 0")
    _check_nyquist([omega + lam], rate)
    n = _check_duration(duration, rate)
    t = np.arange(n) / rate
    x = np.sin(2 * np.pi * (omega + lam) * t) + np.sin(2 * np.pi * (omega - lam) * t)
    return TimeSeries(x, rate)


def sample_exponential_frequencies(spec: AccumulationSpec, xi: Sequence[float] | None = None) -> np.ndarray:
    """Frequencies ``base * (1 + scale * exp(-xi))``.

    With ``xi`` uniform the offsets ``base*scale*exp(-xi)`` are log-uniform,
    so their density falls as one over the offset.  Pass ``xi`` to pin the
    draws explicitly.
    """
    if xi is None:
        rng = np.random.default_rng(spec.seed)
        xi = rng.uniform(0.0, spec.xi_max, int(spec.count))
    xi = np.asarray(xi, dtype=np.float64)
    return spec.base_freq * (1.0 + spec.scale * np.exp(-xi))


def synth_accumulated(spec: AccumulationSpec, duration: float, rate: float) -> TimeSeries:
    freqs = sample_exponential_frequencies(spec)
    _check_nyquist(freqs, rate)
    n = _check_duration(duration, rate)
    return TimeSeries(sum_of_sines(freqs, n, rate), rate)


def _heaviside(x):
    return (x > 0).astype(np.float64)


def demodulate(ts: TimeSeries, method: DemodMethod | str) -> TimeSeries:
    """Apply a demodulation transform.

    Thresholding methods compare against ``mu = mean(|x|)`` over the whole
    series. ``nth_power`` rescales the input to unit peak first so large
    powers stay finite. ``block_energy`` sums squares over consecutive
    blocks, dropping a trailing partial block, and lowers the rate by
    ``block_len``.
    """
    if isinstance(method, str):
        method = DemodMethod.parse(method)
    x = ts.samples
    kind = method.kind
    if kind == "identity":
        return ts
    if kind == "square":
        return ts.with_samples(x * x)
    if kind == "nth_power":
        peak = np.max(np.abs(x))
        y = x / peak if peak > 0 else x
        return ts.with_samples(y ** method.n)
    if kind == "abs":
        return ts.with_samples(np.abs(x))
    if kind == "rect_pos":
        return ts.with_samples(np.maximum(x, 0.0))
    if kind == "rect_neg":
        return ts.with_samples(np.minimum(x, 0.0))
    if kind == "block_energy":
        b = method.block_len
        nblocks = x.size // b
        if nblocks < 1:
            raise ValueError(f"block_len {b} exceeds sample count {x.size}")
        e = np.sum(x[: nblocks * b].reshape(nblocks, b) ** 2, axis=1)
        return TimeSeries(e, ts.rate / b, ts.origin)

    mu = np.mean(np.abs(x))
    if kind == "thresh_above_mean":
        return ts.with_samples(x * _heaviside(x - mu))
    if kind == "timing":
        return ts.with_samples(_heaviside(x - mu))
    if kind == "anti_thresh_below_mean":
        if method.literal:
            return ts.with_samples(x * _heaviside(mu - x))
        return ts.with_samples(np.where((x >= 0) & (x < mu), x, 0.0))
    raise AssertionError(kind)


def delayed_superposition(ts: TimeSeries, tau: float) -> TimeSeries:
    """``x(t) + x(t - tau)`` on the overlap; the output starts ``tau`` later."""
    if not (0 < tau < ts.duration):
        raise ValueError(f"delay {tau!r} s must lie in (0, {ts.duration:g}) s")
    d = int(round(tau * ts.rate))
    if d < 1 or d >= len(ts):
        raise ValueError(f"delay {tau!r} s rounds to {d} samples, outside the series")
    x = ts.samples
    return TimeSeries(x[d:] + x[:-d], ts.rate, ts.origin + d / ts.rate)


def colored_noise(n: int, rate: float, exponent: float = 1.0, seed: int | None = None) -> TimeSeries:
    """Gaussian noise whose PSD falls as ``f**-exponent``.

    Built by shaping white complex Fourier coefficients, then normalised to
    unit variance. ``exponent=0`` is white, 1 pink, 2 brown.
    """
    rng = np.random.default_rng(seed)
    nf = n // 2 + 1
    coef = rng.standard_normal(nf) + 1j * rng.standard_normal(nf)
    f = np.fft.rfftfreq(n, 1.0 / rate)
    scale = np.zeros(nf)
    scale[1:] = f[1:] ** (-exponent / 2.0)
    y = np.fft.irfft(coef * scale, n)
    return TimeSeries(y / y.std(), rate)


def write_csv(ts: TimeSeries, path, columns: dict | None = None) -> Path:
    """Write ``t,x`` rows using shortest round-trip float text.

    ``columns`` adds extra named columns of the same length.
    """
    path = Path(path)
    cols = {"t": ts.times.tolist(), "x": ts.samples.tolist()}
    for name, values in (columns or {}).items():
        values = np.asarray(values, dtype=np.float64)
        if values.size != len(ts):
            raise ValueError(f"column {name!r} has {values.size} rows, expected {len(ts)}")
        cols[name] = values.tolist()
    names = list(cols)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*(cols[k] for k in names)):
            fh.write(",".join(map(repr, row)) + "\n")
    return path


def _infer_rate(t: np.ndarray) -> float:
    if t.size < 2:
        raise ValueError("need at least two rows to infer the sampling rate")
    rate = (t.size - 1) / (t[-1] - t[0])
    if not rate > 0:
        raise ValueError("time column must be strictly increasing")
    snapped = round(rate)
    if snapped > 0 and abs(rate - snapped) <= 1e-8 * rate:
        return float(snapped)
    return float(rate)


def read_csv(path, column: str = "x") -> TimeSeries:
    """Read a CSV written by :func:`write_csv` (or any file with a ``t`` column)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if "t" not in header or column not in header:
            raise ValueError(f"{path}: expected columns 't' and {column!r}, found {header}")
        it, ix = header.index("t"), header.index(column)
        rows = [(float(r[it]), float(r[ix])) for r in reader if r]
    data = np.array(rows, dtype=np.float64)
    t, x = data[:, 0], data[:, 1]
    return TimeSeries(x, _infer_rate(t), t[0])
