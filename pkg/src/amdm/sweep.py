"""(N, K) grids of stochastic Kuramoto runs and their slope maps."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .kuramoto import EnsembleConfig, simulate
from .signal import DemodMethod
from .spectral import analyze, classify_slope

log = logging.getLogger(__name__)

__all__ = [
    "SweepSpec",
    "CellResult",
    "SlopeMap",
    "child_seed",
    "run_cell",
    "run_sweep",
    "summarize_regions",
    "gradient_correlation",
    "write_slopemap_csv",
]


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition. ``base`` supplies every ensemble setting except N, K and seed."""

    N_values: tuple
    K_values: tuple
    reps: int = 1
    base: EnsembleConfig = field(default_factory=EnsembleConfig)
    demod: DemodMethod = field(default_factory=lambda: DemodMethod("square"))
    f_lo: float | None = None
    f_hi: float | None = 40.0
    bins_per_decade: int = 10
    window: str = "rect"
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        object.__setattr__(self, "K_values", tuple(float(k) for k in self.K_values))
        if not self.N_values or not self.K_values:
            raise ValueError("N_values and K_values must be non-empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if isinstance(self.demod, str):
            object.__setattr__(self, "demod", DemodMethod.parse(self.demod))
        if isinstance(self.base, dict):
            object.__setattr__(self, "base", EnsembleConfig.from_dict(self.base))

    def to_dict(self) -> dict:
        return {
            "N_values": list(self.N_values),
            "K_values": list(self.K_values),
            "reps": self.reps,
            "base": self.base.to_dict(),
            "demod": self.demod.label(),
            "f_lo": self.f_lo,
            "f_hi": self.f_hi,
            "bins_per_decade": self.bins_per_decade,
            "window": self.window,
            "master_seed": self.master_seed,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        base = d.pop("base", {})
        # the base template's N, K and seed are placeholders
        base = {k: v for k, v in base.items() if k not in ("N", "K", "seed", "explicit_freqs")}
        return cls(base=EnsembleConfig.from_dict(base), **d)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def child_seed(master_seed: int, N: int, K: float, rep: int) -> int:
    """Stable 63-bit seed for one (N, K, rep) run, independent of grid order."""
    key = f"{int(master_seed)}|{int(N)}|{float(K).hex()}|{int(rep)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1


@dataclass(frozen=True)
class CellResult:
    N: int
    K: float
    slopes: tuple
    seeds: tuple
    status: str = "ok"
    error: str | None = None

    @property
    def slope_mean(self) -> float:
        return float(np.mean(self.slopes)) if self.slopes else float("nan")

    @property
    def slope_std(self) -> float:
        return float(np.std(self.slopes)) if self.slopes else float("nan")

    @property
    def label(self) -> str:
        return classify_slope(self.slope_mean) if self.slopes else "failed"


def run_cell(spec: SweepSpec, N: int, K: float) -> CellResult:
    slopes, seeds = [], []
    try:
        for rep in range(spec.reps):
            seed = child_seed(spec.master_seed, N, K, rep)
            cfg = spec.base.replace(N=int(N), K=float(K), seed=seed)
            traj = simulate(cfg)
            fit = analyze(traj.x, spec.demod, spec.f_lo, spec.f_hi, spec.bins_per_decade,
                          window=spec.window).fit
            slopes.append(fit.slope)
            seeds.append(seed)
    except Exception as exc:  # noqa: BLE001 - recorded per cell, sweep continues
        log.warning("cell N=%s K=%s failed: %s", N, K, exc)
        return CellResult(int(N), float(K), (), tuple(seeds), "failed", f"{type(exc).__name__}: {exc}")
    return CellResult(int(N), float(K), tuple(slopes), tuple(seeds))


def _run_cell_args(args):
    return run_cell(*args)


@dataclass(frozen=True)
class SlopeMap:
    spec: SweepSpec
    cells: dict  # (N, K) -> CellResult

    def grid(self, attr: str = "slope_mean") -> np.ndarray:
        """Array indexed [i_N, i_K]."""
        out = np.full((len(self.spec.N_values), len(self.spec.K_values)), np.nan)
        for i, n in enumerate(self.spec.N_values):
            for j, k in enumerate(self.spec.K_values):
                out[i, j] = getattr(self.cells[(n, k)], attr)
        return out

    def rows(self):
        for n in self.spec.N_values:
            for k in self.spec.K_values:
                yield self.cells[(n, k)]

    @property
    def n_failed(self) -> int:
        return sum(c.status != "ok" for c in self.cells.values())


def run_sweep(spec: SweepSpec) -> SlopeMap:
    """Simulate, demodulate and fit every (N, K) cell ``reps`` times.

    Results are keyed by cell, so the map is the same for any worker count
    or completion order.
    """
    jobs = [(spec, n, k) for n in spec.N_values for k in spec.K_values]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [run_cell(*job) for job in jobs]
    return SlopeMap(spec, {(c.N, c.K): c for c in results})


def _region_stats(cells) -> dict:
    slopes = np.array([c.slope_mean for c in cells if c.status == "ok"])
    if slopes.size == 0:
        return {"count": 0, "mean": float("nan"), "std": float("nan"), "pink_fraction": float("nan")}
    pink = np.mean([classify_slope(s) == "pink" for s in slopes])
    return {"count": int(slopes.size), "mean": float(slopes.mean()), "std": float(slopes.std()),
            "pink_fraction": float(pink)}


def summarize_regions(smap: SlopeMap, band: float = 10.0) -> dict:
    """Slope statistics near the diagonal (|N-K| <= band) and on either side of it."""
    if len(smap.spec.N_values) < 2 or len(smap.spec.K_values) < 2:
        raise ValueError("region summary needs at least two N and two K values")
    cells = list(smap.cells.values())
    return {
        "band": band,
        "diagonal": _region_stats([c for c in cells if abs(c.N - c.K) <= band]),
        "resonance": _region_stats([c for c in cells if c.N - c.K > band]),
        "synchronization": _region_stats([c for c in cells if c.K - c.N > band]),
        "all": _region_stats(cells),
    }


def gradient_correlation(smap: SlopeMap) -> float:
    """Spearman rank correlation between N - K and the cell mean slope."""
    ok = [c for c in smap.cells.values() if c.status == "ok"]
    if len(ok) < 3:
        return float("nan")
    rho = stats.spearmanr([c.N - c.K for c in ok], [c.slope_mean for c in ok]).statistic
    return float(rho)


def write_slopemap_csv(smap: SlopeMap, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("N,K,slope_mean,slope_std,class\n")
        for c in smap.rows():
            mean = repr(c.slope_mean) if not math.isnan(c.slope_mean) else "nan"
            std = repr(c.slope_std) if not math.isnan(c.slope_std) else "nan"
            fh.write(f"{c.N},{c.K!r},{mean},{std},{c.label}\n")
    return path
