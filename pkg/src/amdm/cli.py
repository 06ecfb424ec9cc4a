"""Command-line driver: ``amdm {synth,simulate,analyze,slopes,sweep}``.

Every command writes its outputs plus ``manifest.json`` into ``--out``.
Settings resolve as flags > ``--config`` JSON > built-in defaults, and the
manifest records the resolved set. A manifest is itself a valid
``--config`` file, which is how runs are replayed.

Exit status: 0 success, 1 usage error, 2 runtime or data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import secrets
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .audio import AudioFormatError, read_wav, write_wav
from .kuramoto import EnsembleConfig, ResetPolicy, SimulationError, simulate
from .resonance import ReverbConfig, RoomGeometry, room_eigenfrequencies, synth_hall, write_modes_csv
from .signal import (AccumulationSpec, DemodMethod, TimeSeries, read_csv, synth_accumulated,
                     synth_beat_pair, write_csv)
from .spectral import (analyze, fit_report, sliding_slopes, write_spectrum_csv,
                       write_timeline_csv)
from .sweep import (SweepSpec, gradient_correlation, run_sweep, summarize_regions,
                    write_slopemap_csv)

log = logging.getLogger("amdm")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


DEFAULTS = {
    "synth beat": {"lambda": 1.0, "omega": 100.0, "dur": 10.0, "rate": 1000.0},
    "synth accumulated": {"n": 1000, "omega": 100.0, "c": 0.1, "xi_max": 10.0, "dur": 60.0,
                          "rate": 1000.0, "seed": None},
    "synth hall": {"preset": "musikverein", "dims": None, "vs": 343.0, "modes": 500, "index_start": 0,
                   "reverb": 20, "alpha": 0.1, "dur": 60.0, "rate": 1000.0, "settle": True},
    "simulate": {"n": 20, "k": None, "center": 100.0, "spread": 0.01, "freq_dist": "uniform",
                 "xi_max": 10.0, "dt": 1e-4, "dur": 10.0, "record_rate": 1000.0, "resets": True,
                 "reset_interval": 0.05, "reset_mode": "shift", "reset_unit": "radians",
                 "reset_amount": [0.0, 1.0], "seed": None, "phases": False},
    "analyze": {"demod": "block_energy:100", "f_lo": None, "f_hi": 40.0, "bins_per_decade": 10,
                "estimator": "periodogram", "segments": 16, "window": "rect", "channel": "mix_mean",
                "column": "x", "normalize": True},
    "slopes": {"window": 120.0, "hop": 6.0, "demod": "square", "f_lo": None, "f_hi": 40.0,
               "bins_per_decade": 10, "estimator": "periodogram", "spectral_window": "rect",
               "channel": "mix_mean", "column": "x", "normalize": True},
    "sweep": {"workers": None},
}


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write_json(obj, path: Path):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    # a manifest replays its resolved configuration
    return dict(data.get("config", data))


def _resolve(command: str, args: argparse.Namespace, file_cfg: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    unknown = set(file_cfg) - set(cfg)
    if unknown:
        raise UsageError(f"unknown config keys for '{command}': {', '.join(sorted(unknown))}")
    cfg.update(file_cfg)
    for key in DEFAULTS[command]:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


class Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, command: str, out: Path, config: dict, argv):
        self.command = command
        self.out = out
        self.config = config
        self.argv = list(argv)
        self.inputs = {}
        self.outputs = []
        self.extra = {}
        self.start = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def add_input(self, path):
        self.inputs[str(path)] = _sha256(path)

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.config.get("seed"),
            "tool_version": __version__,
            "backend": _backend.BACKEND,
            "inputs": self.inputs,
            "outputs": self.outputs + ["manifest.json"],
            "wall_time_s": round(time.perf_counter() - self.start, 6),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        manifest.update(self.extra)
        path = self.out / "manifest.json"
        _atomic_write_json(manifest, path)
        return path


def _emit_series(run: Run, ts: TimeSeries, formats, name="signal", columns=None):
    if "csv" in formats or not formats:
        write_csv(ts, run.path(f"{name}.csv"), columns)
    if "wav" in formats:
        write_wav(ts, run.path(f"{name}.wav"))


def cmd_synth(args, cfg, run: Run):
    kind = args.kind
    if kind == "beat":
        ts = synth_beat_pair(cfg["lambda"], cfg["omega"], cfg["dur"], cfg["rate"])
    elif kind == "accumulated":
        if cfg["seed"] is None:
            cfg["seed"] = secrets.randbits(63)
        spec = AccumulationSpec(cfg["omega"], cfg["c"], int(cfg["n"]), cfg["xi_max"], int(cfg["seed"]))
        ts = synth_accumulated(spec, cfg["dur"], cfg["rate"])
    else:
        geom = (RoomGeometry(*cfg["dims"], v_s=cfg["vs"]) if cfg["dims"]
                else RoomGeometry.preset(cfg["preset"]))
        if cfg["dims"] is None and cfg["vs"] != geom.v_s:
            geom = RoomGeometry(geom.L1, geom.L2, geom.L3, cfg["vs"])
        rc = ReverbConfig(int(cfg["reverb"]), cfg["alpha"])
        ts = synth_hall(geom, int(cfg["modes"]), rc, cfg["dur"], cfg["rate"],
                        index_start=int(cfg["index_start"]), settle=bool(cfg["settle"]))
        write_modes_csv(room_eigenfrequencies(geom, int(cfg["modes"]), int(cfg["index_start"])),
                        run.path("modes.csv"))
    _emit_series(run, ts, args.format)


def _ensemble_config(model: str, cfg: dict) -> EnsembleConfig:
    lo, hi = cfg["reset_amount"]
    policy = ResetPolicy(enabled=bool(cfg["resets"]), max_interval=cfg["reset_interval"],
                         mode=cfg["reset_mode"], amount_range=(lo, hi), unit=cfg["reset_unit"])
    return EnsembleConfig(N=int(cfg["n"]), K=float(cfg["k"]), freq_center=cfg["center"],
                          freq_spread=cfg["spread"], freq_dist=cfg["freq_dist"], xi_max=cfg["xi_max"],
                          model=model, dt=cfg["dt"], duration=cfg["dur"], record_rate=cfg["record_rate"],
                          seed=int(cfg["seed"]), reset=policy)


def cmd_simulate(args, cfg, run: Run):
    model = {"skm1": "first_order", "skm2": "second_order"}[args.model]
    if cfg["k"] is None:
        cfg["k"] = 20.0 if args.model == "skm1" else 50.0
    if cfg["seed"] is None:
        cfg["seed"] = secrets.randbits(63)
    ens = _ensemble_config(model, cfg)
    traj = simulate(ens, record_phases=bool(cfg["phases"]))
    cols = {"r": traj.r.samples, "psi": traj.psi.samples}
    if "csv" in args.format or not args.format:
        write_csv(traj.x, run.path("trajectory.csv"), cols)
    if "wav" in args.format:
        write_wav(traj.x, run.path("trajectory.wav"))
    if traj.phases is not None:
        np.save(run.path("phases.npy"), traj.phases)
    run.extra["ensemble"] = ens.to_dict()
    run.extra["natural_freqs_hz"] = traj.natural_freqs.tolist()
    run.extra["reset_counts"] = traj.reset_counts.tolist()


def _load_series(path: Path, cfg: dict, run: Run) -> TimeSeries:
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    run.add_input(path)
    if path.suffix.lower() == ".csv":
        ts = read_csv(path, cfg["column"])
        run.extra["source_format"] = {"format": "csv", "column": cfg["column"]}
    else:
        audio = read_wav(path, cfg["channel"])
        ts = audio.series
        run.extra["source_format"] = dict(audio.fmt, channel_policy=audio.channel_policy)
    if cfg["normalize"]:
        peak = np.max(np.abs(ts.samples))
        if peak > 0:
            ts = ts.with_samples(ts.samples / peak)
    return ts


def cmd_analyze(args, cfg, run: Run):
    from . import plots

    ts = _load_series(Path(args.input), cfg, run)
    res = analyze(ts, DemodMethod.parse(cfg["demod"]), cfg["f_lo"], cfg["f_hi"],
                  int(cfg["bins_per_decade"]), cfg["estimator"], int(cfg["segments"]), cfg["window"])
    write_spectrum_csv(res.spectrum, run.path("spectrum.csv"))
    write_spectrum_csv(res.binned, run.path("spectrum_binned.csv"))
    report = fit_report(res, source_rate=ts.rate)
    with open(run.path("fit.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if "svg" in args.format:
        plots.spectrum_svg(res, run.path("spectrum.svg"), title=Path(args.input).name)
    print(f"slope {report['slope']:.3f}  r2 {report['r2']:.3f}  class {report['class']}  "
          f"envelope rate {report['envelope_rate']:g} Hz")


def cmd_slopes(args, cfg, run: Run):
    from . import plots

    ts = _load_series(Path(args.input), cfg, run)
    tl = sliding_slopes(ts, cfg["window"], cfg["hop"], DemodMethod.parse(cfg["demod"]), cfg["f_lo"],
                        cfg["f_hi"], int(cfg["bins_per_decade"]), cfg["estimator"], cfg["spectral_window"])
    write_timeline_csv(tl, run.path("timeline.csv"))
    plots.timeline_svg(tl, run.path("timeline.svg"), title=Path(args.input).name)
    print(f"{len(tl)} windows, slope mean {np.mean(tl.slopes):.3f} std {np.std(tl.slopes):.3f}")


def cmd_sweep(args, cfg, run: Run):
    from . import plots

    path = Path(args.specfile)
    run.add_input(path)
    try:
        spec = SweepSpec.load(path)
    except (json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"{path}: cannot parse sweep spec ({exc})") from exc
    if cfg["workers"] is not None:
        spec = SweepSpec.from_dict(dict(spec.to_dict(), workers=int(cfg["workers"])))
    smap = run_sweep(spec)
    write_slopemap_csv(smap, run.path("slopemap.csv"))
    plots.heatmap_svg(smap, run.path("heatmap.svg"))
    run.extra["spec"] = spec.to_dict()
    run.extra["cells"] = [
        {"N": c.N, "K": c.K, "status": c.status, "error": c.error, "seeds": list(c.seeds),
         "slopes": list(c.slopes)}
        for c in smap.rows()
    ]
    if len(spec.N_values) >= 2 and len(spec.K_values) >= 2:
        run.extra["regions"] = summarize_regions(smap)
        run.extra["spearman_nk_slope"] = gradient_correlation(smap)
    failed = smap.n_failed
    print(f"{len(smap.cells)} cells, {failed} failed")
    if failed == len(smap.cells):
        raise RuntimeError("every sweep cell failed")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (generated if omitted)")
    common.add_argument("--out", default="amdm_out", help="output directory")
    common.add_argument("--config", default=None, help="JSON config or manifest to start from")
    common.add_argument("--format", action="append", choices=("csv", "wav", "svg"), default=None,
                        help="extra output formats (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="amdm", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"amdm {__version__} ({_backend.BACKEND} core)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="synthesize a test signal")
    s.add_argument("kind", choices=("beat", "accumulated", "hall"))
    s.add_argument("--lambda", dest="lambda", type=float, help="beat offset [Hz]")
    s.add_argument("--omega", type=float, help="carrier / base frequency [Hz]")
    s.add_argument("--dur", type=float, help="duration [s]")
    s.add_argument("--rate", type=float, help="sampling rate [Hz]")
    s.add_argument("--n", type=int, help="number of accumulated components")
    s.add_argument("--c", type=float, help="accumulation scale")
    s.add_argument("--xi-max", dest="xi_max", type=float)
    s.add_argument("--preset", help="room preset name")
    s.add_argument("--dims", type=float, nargs=3, metavar=("L1", "L2", "L3"), help="room size [m]")
    s.add_argument("--vs", type=float, help="sound speed [m/s]")
    s.add_argument("--modes", type=int, help="number of lowest eigenmodes")
    s.add_argument("--index-start", dest="index_start", type=int, choices=(0, 1))
    s.add_argument("--reverb", type=int, help="reflections per axis (M)")
    s.add_argument("--alpha", type=float, help="reflection decay exponent")
    s.add_argument("--no-settle", dest="settle", action="store_false", default=None,
                   help="keep the zero-padded reverberation onset")
    s.set_defaults(func=cmd_synth, key="synth")

    m = sub.add_parser("simulate", parents=[common], help="run a stochastic Kuramoto ensemble")
    m.add_argument("model", choices=("skm1", "skm2"))
    m.add_argument("--n", type=int, help="oscillator count")
    m.add_argument("--k", type=float, help="coupling strength [1/s]")
    m.add_argument("--center", type=float, help="center natural frequency [Hz]")
    m.add_argument("--spread", type=float, help="fractional frequency half-width")
    m.add_argument("--freq-dist", dest="freq_dist", choices=("uniform", "accumulated"))
    m.add_argument("--xi-max", dest="xi_max", type=float)
    m.add_argument("--dt", type=float, help="integration step [s]")
    m.add_argument("--dur", type=float, help="duration [s]")
    m.add_argument("--record-rate", dest="record_rate", type=float, help="recording rate [Hz]")
    m.add_argument("--no-resets", dest="resets", action="store_false", default=None)
    m.add_argument("--reset-interval", dest="reset_interval", type=float, help="max gap between resets [s]")
    m.add_argument("--reset-mode", dest="reset_mode", choices=("shift", "reassign"))
    m.add_argument("--reset-unit", dest="reset_unit", choices=("radians", "turns"))
    m.add_argument("--reset-amount", dest="reset_amount", type=float, nargs=2, metavar=("LO", "HI"))
    m.add_argument("--phases", action="store_true", default=None, help="also save all phases (phases.npy)")
    m.set_defaults(func=cmd_simulate, key="simulate")

    def analysis_flags(q):
        q.add_argument("input", help="WAV or CSV (t,x) file")
        q.add_argument("--demod", help="e.g. square, abs, nth_power:3, block_energy:100")
        q.add_argument("--f-lo", dest="f_lo", type=float, help="fit lower bound [Hz]")
        q.add_argument("--f-hi", dest="f_hi", type=float, help="fit upper bound [Hz]")
        q.add_argument("--bins-per-decade", dest="bins_per_decade", type=int)
        q.add_argument("--estimator", choices=("periodogram", "segment_average"))
        q.add_argument("--channel", choices=("mix_mean", "left", "right"))
        q.add_argument("--column", help="CSV column to analyse")
        q.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)

    a = sub.add_parser("analyze", parents=[common], help="PSD slope of a recording or series")
    analysis_flags(a)
    a.add_argument("--segments", type=int, help="segments for segment_average")
    a.add_argument("--window", choices=("rect", "hann"), help="spectral taper")
    a.set_defaults(func=cmd_analyze, key="analyze")

    sl = sub.add_parser("slopes", parents=[common], help="sliding-window slope timeline")
    analysis_flags(sl)
    sl.add_argument("--window", type=float, help="window length [s]")
    sl.add_argument("--hop", type=float, help="hop [s]")
    sl.add_argument("--taper", dest="spectral_window", choices=("rect", "hann"))
    sl.set_defaults(func=cmd_slopes, key="slopes")

    w = sub.add_parser("sweep", parents=[common], help="(N, K) slope map from a JSON spec")
    w.add_argument("specfile")
    w.add_argument("--workers", type=int)
    w.set_defaults(func=cmd_sweep, key="sweep")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.format = args.format or ["csv"]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.key if args.key != "synth" else f"synth {args.kind}"
    try:
        cfg = _resolve(command, args, _load_config(args.config))
        run = Run(command, Path(args.out), cfg, argv)
        args.func(args, cfg, run)
        run.finish()
    except UsageError as exc:
        print(f"amdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, AudioFormatError, SimulationError, OSError, RuntimeError) as exc:
        print(f"amdm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
