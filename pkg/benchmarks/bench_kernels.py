"""Time the numba and numpy ensemble kernels on the catalog models.

    python3 benchmarks/bench_kernels.py --trajectories 1000 --steps 1000
"""
import argparse
import time

import numpy as np

from sme_entropy import kernels
from sme_entropy.integrators import TimeGrid, simulate_ensemble
from sme_entropy.models import build_model, model_names


def bench(name, backend, n, steps, repeat):
    e = build_model(name)
    grid = TimeGrid(dt=1e-3, steps=steps)
    # warm-up compiles the numba kernel outside the timed region
    simulate_ensemble(e.spec, TimeGrid(dt=1e-3, steps=2), e.default_initial_state, 2,
                      backend=backend)
    best, ens = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        ens = simulate_ensemble(e.spec, grid, e.default_initial_state, n, stride=10,
                                backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, ens


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trajectories", type=int, default=1000)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--models", nargs="*", default=model_names())
    args = p.parse_args(argv)

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"{'model':24s} {'backend':8s} {'seconds':>9s} {'traj*step/s':>12s} {'auto':>6s}")
    for name in args.models:
        dim = build_model(name).spec.dim
        results = {}
        for b in backends:
            secs, ens = bench(name, b, args.trajectories, args.steps, args.repeat)
            results[b] = ens
            rate = args.trajectories * args.steps / secs
            auto = "*" if kernels.resolve_backend("auto", dim) == b else ""
            print(f"{name:24s} {b:8s} {secs:9.2f} {rate:12.3g} {auto:>6s}")
        if len(results) == 2:
            diff = np.nanmax(np.abs(results["numpy"].entropy - results["numba"].entropy))
            print(f"{'':24s} max entropy difference between backends {diff:.1e}")


if __name__ == "__main__":
    main()
