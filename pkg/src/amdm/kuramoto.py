"""Stochastic Kuramoto ensembles with reset-type noise.

Two models are integrated:

* ``first_order``: ``dθ_i/dt = 2π f_i + (K/N) Σ_j sin(θ_j - θ_i)`` with
  explicit Euler steps.
* ``second_order``: ``d²θ_i/dt² = -(2π f_i)² θ_i + (K/N) Σ_j sin(θ_j - θ_i)``
  with semi-implicit (symplectic) Euler steps.

Noise enters as intermittent resets: every oscillator carries its own
renewal process with gaps uniform on ``[0, max_interval]``, and at each event
its phase is shifted by (or set to) a uniform draw from ``amount_range``.
The whole event schedule is drawn up front from per-oscillator random
streams, so stepping one step at a time and running the compiled loop see
exactly the same events.

The coupling sum is evaluated in its mean-field form
``K (S cos θ_i - C sin θ_i)`` with ``C, S`` the ensemble means of
``cos θ`` and ``sin θ``; that is the same quantity in O(N) per step.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .signal import TimeSeries

__all__ = [
    "ResetPolicy",
    "EnsembleConfig",
    "ResetSchedule",
    "EnsembleState",
    "Trajectory",
    "schedule_resets",
    "init_ensemble",
    "step_first_order",
    "step_second_order",
    "step",
    "apply_resets",
    "order_parameter",
    "mean_field_signal",
    "simulate",
    "partial_sum_signal",
    "single_oscillator_signal",
    "bare_superposition",
]

MODELS = ("first_order", "second_order")
_MODEL_ALIASES = {"skm1": "first_order", "skm2": "second_order", "1": "first_order", "2": "second_order"}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResetPolicy:
    enabled: bool = True
    max_interval: float = 0.05
    mode: str = "shift"
    amount_range: tuple = (0.0, 1.0)
    unit: str = "radians"

    def __post_init__(self):
        lo, hi = (float(v) for v in self.amount_range)
        object.__setattr__(self, "amount_range", (lo, hi))
        if hi < lo:
            raise ValueError(f"amount_range {self.amount_range} is empty")
        if self.mode not in ("shift", "reassign"):
            raise ValueError(f"reset mode must be 'shift' or 'reassign', got {self.mode!r}")
        if self.unit not in ("radians", "turns"):
            raise ValueError(f"reset unit must be 'radians' or 'turns', got {self.unit!r}")
        if self.enabled and not self.max_interval > 0:
            raise ValueError("max_interval must be > 0 when resets are enabled")

    @property
    def scale(self) -> float:
        return 2 * math.pi if self.unit == "turns" else 1.0


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything needed to reproduce one ensemble run.

    Natural frequencies are in Hz. ``freq_dist="uniform"`` draws them on
    ``freq_center * (1 ± freq_spread)``; ``"accumulated"`` draws
    ``freq_center * (1 + freq_spread * exp(-xi))`` with ``xi`` uniform on
    ``[0, xi_max]``, crowding them towards the center. ``explicit_freqs``
    overrides both.
    """

    N: int = 20
    K: float = 20.0
    freq_center: float = 100.0
    freq_spread: float = 0.01
    freq_dist: str = "uniform"
    xi_max: float = 10.0
    explicit_freqs: tuple | None = None
    model: str = "first_order"
    dt: float = 1e-4
    duration: float = 10.0
    record_rate: float = 1000.0
    seed: int = 0
    reset: ResetPolicy = field(default_factory=ResetPolicy)

    def __post_init__(self):
        model = _MODEL_ALIASES.get(str(self.model), self.model)
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        object.__setattr__(self, "model", model)
        if isinstance(self.reset, dict):
            object.__setattr__(self, "reset", ResetPolicy(**self.reset))
        if self.explicit_freqs is not None:
            freqs = tuple(float(f) for f in self.explicit_freqs)
            object.__setattr__(self, "explicit_freqs", freqs)
            if len(freqs) != self.N:
                raise ValueError(f"explicit_freqs has {len(freqs)} entries but N={self.N}")
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        object.__setattr__(self, "N", int(self.N))
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.freq_dist not in ("uniform", "accumulated"):
            raise ValueError(f"freq_dist must be 'uniform' or 'accumulated', got {self.freq_dist!r}")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        fmax = max(self.explicit_freqs) if self.explicit_freqs else self.freq_center * (1 + abs(self.freq_spread))
        if self.dt > 1.0 / (20.0 * fmax) * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt:g} s under-resolves {fmax:g} Hz; need dt <= {1 / (20 * fmax):.3g} s"
            )
        if not (0 < self.record_rate <= 1.0 / self.dt * (1 + 1e-12)):
            raise ValueError(f"record_rate must lie in (0, 1/dt = {1 / self.dt:g}] Hz")

    @property
    def nsteps(self) -> int:
        return int(round(self.duration / self.dt))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["reset"]["amount_range"] = list(d["reset"]["amount_range"])
        if d["explicit_freqs"] is not None:
            d["explicit_freqs"] = list(d["explicit_freqs"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        d = dict(d)
        reset = d.pop("reset", None)
        if reset is not None and not isinstance(reset, ResetPolicy):
            reset = ResetPolicy(**{k: tuple(v) if k == "amount_range" else v for k, v in reset.items()})
        if reset is not None:
            d["reset"] = reset
        if d.get("explicit_freqs") is not None:
            d["explicit_freqs"] = tuple(d["explicit_freqs"])
        return cls(**d)

    def replace(self, **changes) -> "EnsembleConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ResetSchedule:
    """Pre-drawn reset events, sorted by the integration step that applies them."""

    times: np.ndarray
    osc: np.ndarray
    amounts: np.ndarray
    steps: np.ndarray
    reassign: bool = False

    def __len__(self):
        return self.times.size

    def counts(self, n: int) -> np.ndarray:
        return np.bincount(self.osc, minlength=n)


def _event_steps(times: np.ndarray, dt: float) -> np.ndarray:
    """First step k (1-based) with ``times <= k*dt``."""
    k = np.ceil(times / dt).astype(np.int64)
    k = np.maximum(k, 1)
    k[k * dt < times] += 1
    over = (k > 1) & ((k - 1) * dt >= times)
    k[over] -= 1
    return k


def schedule_resets(policy: ResetPolicy, n: int, duration: float, dt: float,
                    seed_seq: np.random.SeedSequence) -> ResetSchedule:
    """Draw each oscillator's renewal process on ``[0, duration]``.

    Oscillator ``i`` uses its own child stream of ``seed_seq``, so its events
    do not depend on any other oscillator or on ``n``.
    """
    empty = ResetSchedule(np.empty(0), np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64),
                          policy.mode == "reassign")
    if not policy.enabled:
        return empty
    lo, hi = policy.amount_range
    mean_gap = policy.max_interval / 2
    times, osc, amounts = [], [], []
    for i, child in enumerate(seed_seq.spawn(n)):
        rng = np.random.default_rng(child)
        chunk = int(duration / mean_gap * 1.2) + 16
        t_i = np.empty(0)
        last = 0.0
        while last <= duration:
            gaps = rng.uniform(0.0, policy.max_interval, chunk)
            more = last + np.cumsum(gaps)
            t_i = np.concatenate([t_i, more])
            last = more[-1]
        t_i = t_i[t_i <= duration]
        times.append(t_i)
        osc.append(np.full(t_i.size, i, dtype=np.int64))
        amounts.append(rng.uniform(lo, hi, t_i.size) * policy.scale)
    times = np.concatenate(times)
    osc = np.concatenate(osc)
    amounts = np.concatenate(amounts)
    steps = _event_steps(times, dt)
    order = np.lexsort((osc, times, steps))
    return ResetSchedule(times[order], osc[order], amounts[order], steps[order],
                         policy.mode == "reassign")


@dataclass(frozen=True)
class EnsembleState:
    """Phases (and velocities, for the inertial model) at step ``step``.

    ``omega`` holds the angular natural frequencies. ``cursor`` is the index
    of the first schedule event not yet applied.
    """

    step: int
    dt: float
    phases: np.ndarray
    velocities: np.ndarray
    omega: np.ndarray
    schedule: ResetSchedule
    cursor: int = 0

    @property
    def t(self) -> float:
        return self.step * self.dt

    @property
    def natural_freqs(self) -> np.ndarray:
        return self.omega / (2 * np.pi)

    @property
    def next_reset_times(self) -> np.ndarray:
        nxt = np.full(self.phases.size, np.inf)
        pending = slice(self.cursor, None)
        osc = self.schedule.osc[pending]
        times = self.schedule.times[pending]
        # events are sorted by time within each oscillator, so the first hit wins
        first = np.unique(osc, return_index=True)
        nxt[first[0]] = times[first[1]]
        return nxt


def init_ensemble(config: EnsembleConfig) -> EnsembleState:
    init_seq, reset_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(init_seq)
    n = config.N
    phases = rng.uniform(0.0, 2 * np.pi, n)
    if config.explicit_freqs is not None:
        freqs = np.array(config.explicit_freqs, dtype=np.float64)
    elif config.freq_dist == "accumulated":
        xi = rng.uniform(0.0, config.xi_max, n)
        freqs = config.freq_center * (1.0 + config.freq_spread * np.exp(-xi))
    else:
        freqs = rng.uniform(config.freq_center * (1 - config.freq_spread),
                            config.freq_center * (1 + config.freq_spread), n)
    schedule = schedule_resets(config.reset, n, config.nsteps * config.dt, config.dt, reset_seq)
    return EnsembleState(0, config.dt, phases, np.zeros(n), 2 * np.pi * freqs, schedule, 0)


def _coupling(phases: np.ndarray, K: float) -> np.ndarray:
    cs = np.cos(phases)
    sn = np.sin(phases)
    return K * (sn.mean() * cs - cs.mean() * sn)


def _check_finite(state: EnsembleState) -> EnsembleState:
    if not (np.all(np.isfinite(state.phases)) and np.all(np.isfinite(state.velocities))):
        bad = np.flatnonzero(~np.isfinite(state.phases) | ~np.isfinite(state.velocities))
        raise SimulationError(f"non-finite state at t={state.t:g} s for oscillators {bad.tolist()}")
    return state


def apply_resets(state: EnsembleState, policy: ResetPolicy | None = None) -> EnsembleState:
    """Apply every scheduled event due at or before ``state.t``.

    The amounts and waiting times come from the schedule drawn in
    :func:`init_ensemble`; ``policy`` only gates whether anything happens.
    """
    if policy is not None and not policy.enabled:
        return state
    sched = state.schedule
    end = state.cursor
    while end < len(sched) and sched.steps[end] <= state.step:
        end += 1
    if end == state.cursor:
        return state
    phases = state.phases.copy()
    for j, amount in zip(sched.osc[state.cursor:end], sched.amounts[state.cursor:end]):
        if sched.reassign:
            phases[j] = amount
        else:
            phases[j] += amount
    return dataclasses.replace(state, phases=phases, cursor=end)


def step_first_order(state: EnsembleState, config: EnsembleConfig) -> EnsembleState:
    phases = state.phases + config.dt * (state.omega + _coupling(state.phases, config.K))
    new = dataclasses.replace(state, phases=phases, step=state.step + 1)
    return _check_finite(apply_resets(new, config.reset))


def step_second_order(state: EnsembleState, config: EnsembleConfig) -> EnsembleState:
    acc = -state.omega ** 2 * state.phases + _coupling(state.phases, config.K)
    vel = state.velocities + config.dt * acc
    phases = state.phases + config.dt * vel
    new = dataclasses.replace(state, phases=phases, velocities=vel, step=state.step + 1)
    return _check_finite(apply_resets(new, config.reset))


def step(state: EnsembleState, config: EnsembleConfig) -> EnsembleState:
    if config.model == "first_order":
        return step_first_order(state, config)
    return step_second_order(state, config)


def order_parameter(phases) -> tuple[float, float]:
    """Magnitude and angle of the mean unit phasor, angle in (-π, π]."""
    phases = np.asarray(phases, dtype=np.float64)
    z = np.exp(1j * phases).mean()
    psi = float(np.angle(z))
    if psi <= -np.pi:
        psi = np.pi
    return min(float(abs(z)), 1.0), psi


def mean_field_signal(phases) -> float:
    return float(np.sin(np.asarray(phases, dtype=np.float64)).mean())


@dataclass(frozen=True)
class Trajectory:
    x: TimeSeries
    r: TimeSeries
    psi: TimeSeries
    config: EnsembleConfig
    natural_freqs: np.ndarray
    reset_counts: np.ndarray
    backend: str
    phases: np.ndarray | None = None

    def phase_series(self) -> np.ndarray:
        if self.phases is None:
            raise ValueError("trajectory was recorded without phases; simulate(..., record_phases=True)")
        return self.phases


def record_steps(config: EnsembleConfig) -> np.ndarray:
    """Step index nearest to each recording instant ``j / record_rate``."""
    nrec = int(math.floor(config.duration * config.record_rate + 1e-9))
    j = np.arange(nrec)
    steps = np.rint(j / (config.record_rate * config.dt)).astype(np.int64)
    return np.minimum(steps, config.nsteps)


def simulate(config: EnsembleConfig, record_phases: bool = False,
             initial_state: EnsembleState | None = None, backend: str | None = None) -> Trajectory:
    """Integrate ``config`` and record ``x``, ``r`` and ``psi`` at ``record_rate``.

    ``backend`` selects ``"cython"`` or ``"python"``; default is whatever
    :mod:`amdm._backend` picked at import.
    """
    state = initial_state if initial_state is not None else init_ensemble(config)
    if backend is None:
        kernel, backend = _backend.integrate, _backend.BACKEND
    else:
        try:
            kernel = _backend.BACKENDS[backend]
        except KeyError:
            raise ValueError(f"backend {backend!r} unavailable; have {sorted(_backend.BACKENDS)}") from None
    sched = state.schedule
    pending = slice(state.cursor, None)
    theta = np.ascontiguousarray(state.phases, dtype=np.float64).copy()
    vel = np.ascontiguousarray(state.velocities, dtype=np.float64).copy()
    model = 1 if config.model == "first_order" else 2
    # kernel step numbers count from the initial state
    x, r, psi, ph = kernel(
        model, theta, vel, np.ascontiguousarray(state.omega, dtype=np.float64),
        float(config.K), float(config.dt), int(config.nsteps),
        record_steps(config),
        np.ascontiguousarray(sched.steps[pending] - state.step, dtype=np.int64),
        np.ascontiguousarray(sched.osc[pending], dtype=np.int64),
        np.ascontiguousarray(sched.amounts[pending], dtype=np.float64),
        int(sched.reassign), bool(record_phases),
    )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(theta))):
        raise SimulationError("integration produced non-finite phases; reduce dt or K")
    rate = config.record_rate
    return Trajectory(
        x=TimeSeries(x, rate),
        r=TimeSeries(np.clip(r, 0.0, 1.0), rate),
        psi=TimeSeries(psi, rate),
        config=config,
        natural_freqs=state.natural_freqs,
        reset_counts=sched.counts(config.N),
        backend=backend,
        phases=ph if record_phases else None,
    )


def partial_sum_signal(traj: Trajectory, indices) -> TimeSeries:
    """Mean of ``sin θ_i`` over a subset of oscillators."""
    ph = traj.phase_series()[:, list(indices)]
    return TimeSeries(np.sin(ph).mean(axis=1), traj.x.rate)


def single_oscillator_signal(traj: Trajectory, index: int = 0) -> TimeSeries:
    return TimeSeries(np.sin(traj.phase_series()[:, index]), traj.x.rate)


def bare_superposition(traj: Trajectory, wrap: bool = True) -> TimeSeries:
    """``Σ θ_i`` without the sine.

    With ``wrap`` each phase is first mapped to (-π, π]; unwrapped
    first-order phases grow linearly and their sum is a ramp.
    """
    ph = traj.phase_series()
    if wrap:
        ph = np.pi - np.mod(np.pi - ph, 2 * np.pi)
    return TimeSeries(ph.sum(axis=1), traj.x.rate)
