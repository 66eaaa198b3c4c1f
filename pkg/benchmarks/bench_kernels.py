"""Time the relaxed rigid body integrator on each backend.

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 5]

Compares the compiled kernel, the pure-Python kernel and the generic numpy
integrator on the shipped preset, and checks that all three agree.
"""
import argparse
import time

import numpy as np

from metriplectic import IntegratorConfig, integrate, rigid_body_system
from metriplectic import _kernels_py

try:
    from metriplectic import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

INERTIA = (10.0, 5.0, 1.0)
X0 = np.array([0.001, -1.0, 0.001])


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--h", type=float, default=0.1)
    args = ap.parse_args()

    system = rigid_body_system(INERTIA)
    cfg = IntegratorConfig(step_h=args.h, use_kernel=False)
    rows = []
    t, ref = best_of(lambda: integrate(system, cfg, X0, args.steps).states, max(1, args.repeat // 2))
    rows.append(("generic numpy", t, 0.0))
    t, out = best_of(lambda: _kernels_py.rigid_body_run(INERTIA, X0, args.h, args.steps)[0], args.repeat)
    rows.append(("pure-python kernel", t, float(np.max(np.abs(out - ref)))))
    if _kernels_c is not None:
        t, out = best_of(lambda: _kernels_c.rigid_body_run(INERTIA, X0, args.h, args.steps)[0], args.repeat)
        rows.append(("compiled kernel", t, float(np.max(np.abs(out - ref)))))
    else:
        print("compiled kernel not built; skipping")

    base = rows[0][1]
    print(f"{args.steps} steps, h={args.h}, best of {args.repeat}")
    print(f"{'backend':<20}{'seconds':>10}{'us/step':>10}{'speedup':>10}{'max |dx|':>12}")
    for name, t, gap in rows:
        print(f"{name:<20}{t:>10.4f}{1e6 * t / args.steps:>10.2f}{base / t:>10.1f}{gap:>12.1e}")


if __name__ == "__main__":
    main()
