"""Compiled kernels against the pure-Python fallback.

Times the right-hand side and a short adaptive integration on both
backends and checks that they agree.

    python3 benchmarks/bench_kernels.py [--t-end 200] [--repeat 3]
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from nrdicke import ModelParams, _core
from nrdicke.integrate import np_seed_state


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--calls", type=int, default=20000, help="rhs evaluations per timing")
    args = ap.parse_args()

    p = ModelParams.homogeneous(lam=35.0, phi=2 * math.pi / 3, gamma=0.05)
    par = _core.pack_params(p)
    y0 = np_seed_state(1e-3, 0).to_vector(with_cavity=False)
    backends = ["python"] + (["cython"] if _core._kernels is not None else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the fallback only")

    results = {}
    for b in backends:
        def rhs_loop():
            for _ in range(args.calls):
                _core.rhs_packed(_core.ADIABATIC, par, y0, backend=b)

        def run():
            return _core.dopri5(_core.ADIABATIC, par, y0, 0.0, args.t_end, 0.5, 1e-9, 1e-12, 0.5, backend=b)

        t_rhs = best_of(rhs_loop, args.repeat)
        t_int = best_of(run, args.repeat)
        results[b] = run()
        print(f"{b:7s} rhs {1e6 * t_rhs / args.calls:8.2f} us/call   integrate(T={args.t_end:g}) {t_int:8.3f} s")
        results[b + "_t"] = (t_rhs, t_int)

    if "cython" in backends:
        yp, yc = results["python"][0], results["cython"][0]
        (rp, ip), (rc, ic) = results["python_t"], results["cython_t"]
        # lambda = 35 is chaotic, so rounding differences grow; compare the first 50 time units
        k = int(50.0 / 0.5) + 1
        print(f"speedup: rhs x{rp / rc:.1f}, integrate x{ip / ic:.1f}; "
              f"max sample difference (t <= 50) {np.max(np.abs(yp[:k] - yc[:k])):.2e}")


if __name__ == "__main__":
    main()
