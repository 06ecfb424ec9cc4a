"""Time the compiled and pure-numpy integrator backends on the same ensemble.

    python3 benchmarks/bench_kernels.py [--duration 10] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from amdm import _backend
from amdm.kuramoto import EnsembleConfig, simulate


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--duration", type=float, default=10.0, help="simulated seconds per run")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--n", type=int, default=20, help="oscillator count")
    args = p.parse_args()

    backends = sorted(_backend.BACKENDS)
    print(f"default backend: {_backend.BACKEND}; available: {', '.join(backends)}")
    results = {}
    for model in ("first_order", "second_order"):
        cfg = EnsembleConfig(N=args.n, K=20.0 if model == "first_order" else 50.0, model=model,
                             duration=args.duration, seed=0)
        steps = round(cfg.duration / cfg.dt)
        outputs = {}
        for name in backends:
            times = timeit.repeat(lambda: simulate(cfg, backend=name), number=1, repeat=args.repeat)
            best = min(times)
            results[(model, name)] = best
            outputs[name] = simulate(cfg, backend=name).x.samples
            print(f"{model:13s} {name:7s} {best:8.3f} s  ({steps / best / 1e6:6.2f} M steps/s)")
        if len(outputs) == 2:
            diff = np.max(np.abs(outputs["cython"] - outputs["python"]))
            speedup = results[(model, "python")] / results[(model, "cython")]
            print(f"{model:13s} speedup {speedup:6.1f}x, max |x| difference {diff:.2e}")


if __name__ == "__main__":
    main()
