"""Time the compiled kernel loops against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--points N] [--repeat R]

Both variants are imported from the same module: the ``*_loop`` functions are
numba-compiled when acceleration is on, the ``*_numpy`` ones never are.
"""
import argparse
import timeit

import numpy as np

from bergman_kit import _kernels as K
from bergman_kit import kernel, make_weight, WeightSpec
from bergman_kit.quadrature import build_radial_rule


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not K.USE_NUMBA:
        print("numba disabled (BERGMAN_KIT_NUMBA=0 or not installed); timing numpy only")
    w = make_weight(WeightSpec())
    t = kernel.build_moments(w, 20_000)
    rng = np.random.default_rng(0)
    r = 0.97 * np.sqrt(rng.random(args.points))
    th = 2 * np.pi * rng.random(args.points)
    z = r * np.exp(1j * th)
    v = z + 0.01 * (1 - r) * np.exp(2j * np.pi * rng.random(args.points))
    rule = build_radial_rule()
    logr = np.log1p(-rule.gaps)
    m2eta = -2.0 * w.eta_from_gap(rule.gaps)

    cases = {
        "log_moments": (lambda: K._log_moments_loop(logr, m2eta, rule.weights, 20_000),
                        lambda: K.log_moments_numpy(logr, m2eta, rule.weights, 20_000)),
        "kernel_diag": (lambda: K._diag_loop(np.log(r), t.log_mu),
                        lambda: K.diag_numpy(np.log(r), t.log_mu)),
        "kernel_cross": (lambda: K._cross_loop(np.log(r), np.log(np.abs(v)), th - np.angle(v), t.log_mu),
                         lambda: K.cross_numpy(np.log(r), np.log(np.abs(v)), th - np.angle(v), t.log_mu)),
        "kernel_diff": (lambda: K._diff_loop(z, v, t.log_mu),
                        lambda: K.diff_numpy(z, v, t.log_mu)),
    }
    print(f"{'kernel':14s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, (fast, slow) in cases.items():
        if K.USE_NUMBA:
            fast()  # compile
            tf = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        else:
            tf = float("nan")
        ts = min(timeit.repeat(slow, number=1, repeat=args.repeat))
        print(f"{name:14s} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f}")


if __name__ == "__main__":
    main()
