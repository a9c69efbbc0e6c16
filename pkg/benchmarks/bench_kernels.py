"""Benchmark the propagation backends against each other.

Usage: python benchmarks/bench_kernels.py [--samples N] [--repeats R]
"""

import argparse
import time

import numpy as np

from gyrocal.kernels import KernelParams, available_backends


def make_inputs(n, rng):
    pos = np.array([0.89, -1.99, 1045.0])
    vel = rng.uniform(-1.5, 1.5, 3)
    quat = rng.standard_normal(4)
    quat /= np.linalg.norm(quat)
    x = np.zeros(21)
    A = rng.standard_normal((21, 21))
    P = A @ A.T * 1e-4 + np.eye(21) * 1e-3
    errs = np.zeros(12)
    gyro = rng.uniform(-3.0, 3.0, (n, 3))
    accel = rng.uniform(-12.0, 12.0, (n, 3))
    params = KernelParams(
        gm_tau=np.array([3600.0, 3600.0, 7200.0, 7200.0]),
        gm_qd=np.array([1e-10, 1e-8, 1e-12, 1e-12]),
        q_vel=2e-8,
        q_att=6e-10,
    )
    return (pos, vel, quat, x, P, errs, gyro, accel, 0.02, params)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    inputs = make_inputs(args.samples, rng)
    results = {}
    for name, fn in available_backends().items():
        best = np.inf
        for _ in range(args.repeats):
            work = tuple(np.array(a, copy=True) if isinstance(a, np.ndarray) else a for a in inputs)
            t0 = time.perf_counter()
            fn(*work)
            best = min(best, time.perf_counter() - t0)
        rate = args.samples / best
        results[name] = rate
        print(f"{name:5s}: {best * 1e3:8.2f} ms for {args.samples} samples "
              f"({rate / 1e3:7.1f} ksamples/s)")
    if {"pure", "fast"} <= results.keys():
        print(f"speedup fast/pure: {results['fast'] / results['pure']:.1f}x")


if __name__ == "__main__":
    main()
