"""WAV input/output.

Decoding supports 8/16/24/32-bit integer PCM and 32/64-bit float, mono or
multichannel. Integer samples are scaled by their full-scale value so the
decoded range is [-1, 1].
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal import TimeSeries

__all__ = ["AudioInput", "AudioFormatError", "read_wav", "write_wav", "wav_format"]

CHANNEL_POLICIES = ("mix_mean", "left", "right")

_FORMAT_NAMES = {
    0x0001: "PCM",
    0x0002: "MS ADPCM",
    0x0003: "IEEE float",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA ADPCM",
    0x0050: "MPEG",
    0x0055: "MP3",
    0xFFFE: "extensible",
}


class AudioFormatError(ValueError):
    pass


@dataclass(frozen=True)
class AudioInput:
    path: Path
    series: TimeSeries
    channel_policy: str
    fmt: dict


def wav_format(path) -> dict:
    """Read the ``fmt `` chunk: format tag, channels, rate, bits per sample."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] not in (b"RIFF", b"RIFX") or head[8:12] != b"WAVE":
            suffix = path.suffix.lower()
            hint = f" ({suffix} files need transcoding to WAV first)" if suffix and suffix != ".wav" else ""
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file{hint}")
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                raise AudioFormatError(f"{path}: no 'fmt ' chunk found")
            cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
            if cid == b"fmt ":
                body = fh.read(size)
                tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
                if tag == 0xFFFE and size >= 40:
                    tag = struct.unpack("<H", body[24:26])[0]
                return {"format_tag": tag, "format": _FORMAT_NAMES.get(tag, f"0x{tag:04x}"),
                        "channels": channels, "rate": rate, "bits": bits}
            fh.seek(size + (size & 1), 1)


def _check_supported(fmt: dict, path):
    tag, bits = fmt["format_tag"], fmt["bits"]
    if tag == 1 and bits in (8, 16, 24, 32):
        return
    if tag == 3 and bits in (32, 64):
        return
    raise AudioFormatError(
        f"{path}: unsupported WAV encoding {fmt['format']} with {bits}-bit samples; "
        "supported are 8/16/24/32-bit PCM and 32/64-bit float"
    )


def _to_unit(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        return data.astype(np.float64) / 2147483648.0
    return data.astype(np.float64)


def read_wav(path, channel: str = "mix_mean") -> AudioInput:
    if channel not in CHANNEL_POLICIES:
        raise ValueError(f"channel policy must be one of {CHANNEL_POLICIES}")
    path = Path(path)
    fmt = wav_format(path)
    _check_supported(fmt, path)
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:  # noqa: BLE001 - scipy raises assorted types on bad files
        raise AudioFormatError(f"{path}: could not decode WAV data ({exc})") from exc
    x = _to_unit(data)
    if x.ndim == 1 and channel == "right":
        raise AudioFormatError(f"{path}: right channel requested from mono data")
    if x.ndim == 2:
        if channel == "mix_mean":
            x = x.mean(axis=1)
        elif channel == "left":
            x = x[:, 0]
        else:
            if x.shape[1] < 2:
                raise AudioFormatError(f"{path}: right channel requested from mono data")
            x = x[:, 1]
    if x.size == 0:
        raise AudioFormatError(f"{path}: no audio frames")
    return AudioInput(path, TimeSeries(x, float(rate)), channel, fmt)


def write_wav(ts: TimeSeries, path, bits: int = 16, normalize: bool = True) -> Path:
    """Render to WAV. ``bits`` is 16 (PCM) or 32 (float); peak-normalised by default."""
    path = Path(path)
    x = ts.samples
    rate = int(round(ts.rate))
    if abs(rate - ts.rate) > 1e-9 * ts.rate:
        raise ValueError(f"WAV needs an integer sample rate, got {ts.rate!r}")
    if normalize:
        peak = np.max(np.abs(x))
        x = x / peak if peak > 0 else x
    if bits == 16:
        data = np.clip(np.round(x * 32767.0), -32768, 32767).astype(np.int16)
    elif bits == 32:
        data = x.astype(np.float32)
    else:
        raise ValueError("bits must be 16 or 32")
    wavfile.write(path, rate, data)
    return path
