"""Throughput of the compiled and the vectorised numpy trajectory kernels.

Runs the same short ensemble through both backends and reports integration
steps per second per trajectory. The numpy path batches trajectories, so it is
timed on a full batch.

    python3 benchmarks/bench_kernels.py --levels 3 --classes 1 --trajectories 16
"""

import argparse
import time

import numpy as np

from eitnoise.model import (
    AtomConfig,
    DopplerSpec,
    LaserField,
    Model,
    analysis_grid_mhz,
    mhz_to_rad,
)
from eitnoise.oracle import TrajectoryConfig, build_system, use_numba
from eitnoise.oracle.simulate import _simulate
from eitnoise.quadrature import make_grid


def make_model(levels: int, classes: int) -> Model:
    g = mhz_to_rad(6.0)
    doppler = DopplerSpec(classes > 1, 20 * g, max(classes, 1), "tangent", 5 * g)
    atom = AtomConfig(levels, g, 0.02 * g, mhz_to_rad(-63.4) if levels == 4 else 0.0)
    return Model(
        LaserField(1, 0.5 * g, 0.0, 0.08 * g),
        LaserField(2, 0.56 * g, 0.0, 0.08 * g),
        atom,
        analysis_grid_mhz([1.0]),
        doppler,
    )


def time_backend(model, cfg, backend, repeats):
    system = build_system(model, make_grid(model.doppler))
    indices = list(range(cfg.n_trajectories))
    _simulate(model, system, cfg, indices[:1], backend)  # warm-up / JIT compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        _simulate(model, system, cfg, indices, backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=3, choices=(3, 4))
    ap.add_argument("--classes", type=int, default=1, help="velocity classes (odd)")
    ap.add_argument("--trajectories", type=int, default=16)
    ap.add_argument("--steps", type=int, default=20000, help="integration steps per trajectory")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    model = make_model(args.levels, args.classes)
    g = model.atom.gamma_exc
    dt = 0.02
    burn = 60.0
    total = (args.steps - burn / dt) * dt
    cfg = TrajectoryConfig.from_gamma_units(g, dt=dt, total_time=total, burn_in=burn,
                                            n_trajectories=args.trajectories, seed=1, segment_length=256)
    backends = ["numpy"] + (["numba"] if use_numba() else [])
    print(f"{args.levels}-level, {args.classes} class(es), {args.trajectories} trajectories x {cfg.n_steps} steps")
    results = {}
    for b in backends:
        sec = time_backend(model, cfg, b, args.repeats)
        results[b] = sec
        rate = cfg.n_steps * args.trajectories / sec
        print(f"  {b:6s} {sec:8.3f} s   {rate:12.0f} steps/s   {1e6 / rate:7.2f} us/step")
    if len(results) == 2:
        print(f"  numba speed-up: {results['numpy'] / results['numba']:.1f}x")
    else:
        print("  numba unavailable or disabled (EITNOISE_DISABLE_NUMBA); numpy only")


if __name__ == "__main__":
    main()
