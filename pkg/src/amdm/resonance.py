"""Rectangular-hall eigenmodes, reverberation and Lorentzian resonance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import TimeSeries, sum_of_sines

__all__ = [
    "RoomGeometry",
    "ModeSet",
    "ReverbConfig",
    "PRESETS",
    "room_eigenfrequencies",
    "synth_modes",
    "add_reverberation",
    "synth_hall",
    "lorentzian_gain",
    "apply_lorentzian",
    "write_modes_csv",
]


@dataclass(frozen=True)
class RoomGeometry:
    L1: float
    L2: float
    L3: float
    v_s: float = 343.0

    def __post_init__(self):
        if min(self.L1, self.L2, self.L3) <= 0:
            raise ValueError("room dimensions must be > 0")
        if not self.v_s > 0:
            raise ValueError("sound speed must be > 0")

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.L1, self.L2, self.L3)

    @classmethod
    def preset(cls, name: str) -> "RoomGeometry":
        try:
            return PRESETS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown room preset {name!r}; known: {', '.join(PRESETS)}") from None


# Vienna, Grosser Musikvereinssaal: depth x width x height in meters
PRESETS = {"musikverein": RoomGeometry(48.8, 19.2, 17.75)}


@dataclass(frozen=True)
class ModeSet:
    frequencies: np.ndarray
    indices: np.ndarray  # (count, 3) integer triples

    def __len__(self):
        return self.frequencies.size


@dataclass(frozen=True)
class ReverbConfig:
    M: int = 20
    alpha: float = 0.1

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("reflection count M must be >= 0")
        if self.alpha < 0:
            raise ValueError("decay exponent alpha must be >= 0")


def _modes_below(geom: RoomGeometry, fmax: float, start: int):
    half = geom.v_s / 2
    axes = [np.arange(start, int(math.floor(2 * fmax * L / geom.v_s)) + 1) for L in geom.lengths]
    n1, n2, n3 = np.meshgrid(*axes, indexing="ij")
    n1, n2, n3 = n1.ravel(), n2.ravel(), n3.ravel()
    f = half * np.sqrt((n1 / geom.L1) ** 2 + (n2 / geom.L2) ** 2 + (n3 / geom.L3) ** 2)
    keep = (f <= fmax) & ((n1 + n2 + n3) > 0)
    return f[keep], np.stack([n1[keep], n2[keep], n3[keep]], axis=1)


def room_eigenfrequencies(geom: RoomGeometry, count: int, index_start: int = 0) -> ModeSet:
    """The ``count`` lowest standing-wave frequencies of a rectangular room.

    ``f = (v_s/2) sqrt((n1/L1)^2 + (n2/L2)^2 + (n3/L3)^2)`` with indices
    from ``index_start`` (0 or 1); the all-zero triple is excluded.

    Every mode with ``f <= fmax`` has ``n_i <= 2 fmax L_i / v_s``, so the
    box enumeration below is complete up to ``fmax``; ``fmax`` doubles until
    it holds at least ``count`` modes.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if index_start not in (0, 1):
        raise ValueError("index_start must be 0 or 1")
    fmax = geom.v_s / (2 * min(geom.lengths)) * (1 + index_start)
    while True:
        f, idx = _modes_below(geom, fmax, index_start)
        if f.size >= count:
            break
        fmax *= 2
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], f))[:count]
    return ModeSet(f[order], idx[order])


def synth_modes(modes: ModeSet, duration: float, rate: float, t0: float = 0.0) -> TimeSeries:
    """Equal-amplitude zero-phase superposition of the mode frequencies."""
    fmax = float(np.max(modes.frequencies))
    if fmax >= rate / 2:
        raise ValueError(f"mode at {fmax:g} Hz aliases at rate {rate:g} Hz")
    n = int(round(duration * rate))
    if n < 1:
        raise ValueError("duration shorter than one sample")
    return TimeSeries(sum_of_sines(modes.frequencies, n, rate, t0), rate, t0)


def reverb_delays(geom: RoomGeometry, rc: ReverbConfig, rate: float):
    """(delay in samples, weight) for every reflection term."""
    out = []
    for L in geom.lengths:
        for k in range(1, rc.M + 1):
            out.append((int(round(k * L / geom.v_s * rate)), (1.0 + k) ** (-rc.alpha)))
    return out


def add_reverberation(ts: TimeSeries, geom: RoomGeometry, rc: ReverbConfig) -> TimeSeries:
    """Sum of delayed, decayed copies along each room axis.

    ``out(t) = Σ_m Σ_{k=1..M} (1+k)^-alpha · x(t - k L_m / v_s)``, delays
    rounded to whole samples, the source taken as zero before its start.
    The direct sound itself is not part of the sum.
    """
    longest = rc.M * max(geom.lengths) / geom.v_s
    if longest >= ts.duration:
        raise ValueError(
            f"longest reflection delay {longest:.3g} s does not fit in the {ts.duration:.3g} s series"
        )
    x = ts.samples
    out = np.zeros_like(x)
    for d, w in reverb_delays(geom, rc, ts.rate):
        if d == 0:
            out += w * x
        else:
            out[d:] += w * x[:-d]
    return ts.with_samples(out)


def synth_hall(geom: RoomGeometry, count: int, rc: ReverbConfig, duration: float, rate: float,
               index_start: int = 0, settle: bool = True) -> TimeSeries:
    """Mode superposition of a hall with its reverberation.

    With ``settle`` the mode sum starts early by the longest reflection
    delay and that lead-in is cut after reverberating, so every output
    sample carries the full set of reflections instead of a zero-padded
    onset ramp.
    """
    modes = room_eigenfrequencies(geom, count, index_start)
    if rc.M == 0:
        return TimeSeries(np.zeros(int(round(duration * rate))), rate)
    lead = int(math.ceil(rc.M * max(geom.lengths) / geom.v_s * rate)) + 1 if settle else 0
    src = synth_modes(modes, duration + lead / rate, rate, t0=-lead / rate)
    wet = add_reverberation(src, geom, rc)
    n = int(round(duration * rate))
    return TimeSeries(wet.samples[lead:lead + n], rate, 0.0)


def lorentzian_gain(f, f0: float, gamma: float):
    """Power response ``1 / ((f - f0)^2 + (gamma/2)^2)``."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    f = np.asarray(f, dtype=np.float64)
    h = 1.0 / ((f - f0) ** 2 + (gamma / 2) ** 2)
    return h if h.ndim else float(h)


def apply_lorentzian(ts: TimeSeries, f0: float, gamma: float) -> TimeSeries:
    """Zero-phase filter with amplitude gain ``sqrt(H(|f|))``."""
    x = ts.samples
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / ts.rate)
    y = np.fft.irfft(spec * np.sqrt(lorentzian_gain(f, f0, gamma)), x.size)
    return ts.with_samples(y)


def write_modes_csv(modes: ModeSet, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("n1,n2,n3,f_hz\n")
        for (a, b, c), f in zip(modes.indices.tolist(), modes.frequencies.tolist()):
            fh.write(f"{a},{b},{c},{f!r}\n")
    return path
