"""Time the RK4 kernel on each available backend.

    python3 benchmarks/bench_kernels.py --steps 2000 --repeat 3
"""
import argparse
import timeit

import numpy as np

from phonon_laser import kernels, preset
from phonon_laser.dynamics import initial_state
from phonon_laser.kernels import compile_generator


def bench(name, p, steps, repeat):
    be = kernels.get_backend(name)
    s = initial_state(p)
    tables = compile_generator(p).tables()
    be.rk4_advance(s.rho, s.B, *tables, 0.001, 10)  # warm-up
    times = timeit.repeat(lambda: be.rk4_advance(s.rho, s.B, *tables, 0.001, steps), number=1, repeat=repeat)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--preset", default="results-phonon")
    args = ap.parse_args(argv)

    p = preset(args.preset)
    results = {name: bench(name, p, args.steps, args.repeat) for name in kernels.available_backends()}
    print(f"preset {args.preset}, {args.steps} RK4 steps (dt = 1 fs), best of {args.repeat}")
    for name, t in results.items():
        print(f"  {name:9s} {t:8.3f} s  {1e6 * t / args.steps:9.1f} us/step  "
              f"{t / args.steps * 1e6 / 60:7.2f} min per ns simulated")
    if len(results) == 2:
        print(f"  speedup   {results['python'] / results['compiled']:.1f}x")
    # parity on the benchmarked trajectory
    if len(results) == 2:
        s = initial_state(p)
        tables = compile_generator(p).tables()
        a = kernels.get_backend("compiled").rk4_advance(s.rho, s.B, *tables, 0.001, 500)
        b = kernels.get_backend("python").rk4_advance(s.rho, s.B, *tables, 0.001, 500)
        print(f"  max |rho_compiled - rho_python| after 500 steps: {np.max(np.abs(a[0] - b[0])):.1e}")


if __name__ == "__main__":
    main()
