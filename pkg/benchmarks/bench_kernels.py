"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--steps 4000]
"""
import argparse
import time

import numpy as np

from fonbw import _backend
from fonbw.fixtures import COMPENSATION_FONBW, FIG1_CBW, TABLE1_FONBW
from fonbw.fracdiff import _weights
from fonbw.models import rate
from fonbw.signals import gen_sine_offset, gen_sweep_eq19


def cases(steps):
    dt = 10.0 / steps
    u = gen_sweep_eq19(10.0, dt)
    ud = rate(u)
    w1 = _weights(TABLE1_FONBW.lambda1, len(u))
    w2 = _weights(TABLE1_FONBW.lambda2, len(u))
    v = np.random.default_rng(0).standard_normal(len(u))
    p = FIG1_CBW
    c = COMPENSATION_FONBW
    Hd = gen_sine_offset(5, 5, steps * 1e-4, 1e-4).values
    return {
        "gl_filter": lambda k: k.gl_filter(w1, u.values, -1),
        "bw_rk4": lambda k: k.bw_rk4(ud, dt, p.A / p.D, p.beta / p.D, p.gamma / p.D, p.n, 0.0, 1e12),
        "fonbw_hbar (n=1)": lambda k: k.fonbw_hbar(v, dt ** -0.622, w2, 0.1, 0.6, 1.0, 0.0, -1, 1e12, True),
        "fonbw_hbar (Newton)": lambda k: k.fonbw_hbar(v, dt ** -0.622, w2, 0.1, 0.6, 1.7, 0.0, -1, 1e12, False),
        "fonbw_compensate": lambda k: k.fonbw_compensate(
            Hd, 1e-4 ** -c.lambda1, _weights(c.lambda1, len(Hd)), 1e-4 ** -c.lambda2, _weights(c.lambda2, len(Hd)),
            np.array(c.poly.coeffs), c.k_h, c.rho, c.sigma, c.n, 0.0, -1, 1e12, 0,
        ),
    }


def best_of(fn, kernels, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(kernels)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args()
    compiled = _backend.get("cython")
    python = _backend.get("python")
    print(f"{'kernel':<22}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}   ({args.steps} steps)")
    for name, fn in cases(args.steps).items():
        a = best_of(fn, compiled, args.repeat)
        b = best_of(fn, python, args.repeat)
        print(f"{name:<22}{a:>12.4f}{b:>12.4f}{b / a:>9.0f}x")


if __name__ == "__main__":
    main()
