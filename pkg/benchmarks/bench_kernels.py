"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Shapes follow the default vocoder configuration (1 s of audio at 22.05 kHz,
hop 256, d = 64). Results are checked for agreement before timing.
"""
import argparse
import time

import numpy as np

from harmovoc import kernels
from harmovoc._accel import HAVE_NUMBA


def _time(fn, args, repeat):
    fn(*args)  # warm-up, triggers compilation
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    T, d, k = 87, 64, 5
    frames = rng.standard_normal((T, 1024))
    nccf_frames = rng.standard_normal((T, 2048))
    h = rng.standard_normal((T, d))
    w = rng.standard_normal((k, d, d)) * 0.1
    b = rng.standard_normal(d)
    g = rng.standard_normal((T, d))
    h8, w8, b8 = h[:, :8], w[:, :8, :8], b[:8]
    return [
        ("overlap_add 87x1024", kernels.overlap_add_np, kernels.overlap_add_nb,
         (frames, 256, 1024 + 86 * 256)),
        ("nccf 87x2048 lags 44..367", kernels.nccf_np, kernels.nccf_nb, (nccf_frames, 44, 367)),
        ("conv_time d=64", kernels.conv_time_np, kernels.conv_time_nb, (h, w, b)),
        ("conv_time d=8", kernels.conv_time_np, kernels.conv_time_nb, (h8, w8, b8)),
        ("conv_backward d=64", kernels.conv_time_backward_np, kernels.conv_time_backward_nb, (h, w, g)),
        ("conv_backward d=8", kernels.conv_time_backward_np, kernels.conv_time_backward_nb,
         (h8, w8, g[:, :8])),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba unavailable (or HARMOVOC_DISABLE_NUMBA set); nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, f_np, f_nb, a in cases(rng):
        r_np, r_nb = f_np(*a), f_nb(*a)
        for x, y in zip(np.atleast_1d(r_np) if not isinstance(r_np, tuple) else r_np,
                        np.atleast_1d(r_nb) if not isinstance(r_nb, tuple) else r_nb):
            np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-9)
        t_np = _time(f_np, a, args.repeat) * 1e3
        t_nb = _time(f_nb, a, args.repeat) * 1e3
        print(f"{name:<28}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
