#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths on representative workloads: spike encoding of a
full 16-channel trace and co-occurrence counting over the 52 standard
offsets. Run directly:

    python benchmarks/bench_kernels.py [--repeats N]

Setting TACTEX_DISABLE_NUMBA=1 disables the numba path entirely, in which
case only the fallback is timed.
"""

import argparse
import time

import numpy as np

from tactex import _kernels
from tactex.glcm import standard_offsets


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def encode_workload():
    rng = np.random.default_rng(0)
    channels = rng.uniform(0.0, 1.0, (16, 18_000))  # 18 s trace at 1 kHz
    return (channels, 1.0, 0.02, 0.2, -65.0, 8.0, 30.0, 8.0)


def glcm_workload():
    rng = np.random.default_rng(1)
    volumes = [rng.integers(0, 8, (4, 4, 90)).astype(np.int32) for _ in range(100)]
    offsets = [(o.dx, o.dy, o.dz) for o in standard_offsets()]
    return volumes, offsets


def run_glcm(counts_fn, volumes, offsets):
    for levels in volumes:
        for dx, dy, dz in offsets:
            counts_fn(levels, dx, dy, dz, 8)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"numba active: {_kernels.using_numba}")
    enc_args = encode_workload()
    volumes, offsets = glcm_workload()

    rows = []
    t_np_enc = time_call(
        _kernels.izhikevich_raster_numpy, *enc_args, repeats=args.repeats
    )
    rows.append(("spike encoding (16 x 18k samples)", "numpy", t_np_enc))
    t_np_glcm = time_call(
        run_glcm, _kernels.glcm_counts_numpy, volumes, offsets, repeats=args.repeats
    )
    rows.append(("co-occurrence (100 vols x 52 offsets)", "numpy", t_np_glcm))

    if _kernels.using_numba:
        _kernels.izhikevich_raster_numba(*enc_args)  # trigger JIT
        _kernels.glcm_counts_numba(volumes[0], 0, 1, 0, 8)
        t_nb_enc = time_call(
            _kernels.izhikevich_raster_numba, *enc_args, repeats=args.repeats
        )
        rows.append(("spike encoding (16 x 18k samples)", "numba", t_nb_enc))
        t_nb_glcm = time_call(
            run_glcm,
            _kernels.glcm_counts_numba,
            volumes,
            offsets,
            repeats=args.repeats,
        )
        rows.append(("co-occurrence (100 vols x 52 offsets)", "numba", t_nb_glcm))

        r_np, _, _ = _kernels.izhikevich_raster_numpy(*enc_args)
        r_nb, _, _ = _kernels.izhikevich_raster_numba(*enc_args)
        assert np.array_equal(r_np, r_nb), "kernel outputs diverged"

    print(f"\n{'workload':42s} {'path':6s} {'best (ms)':>10s}")
    for name, path, seconds in rows:
        print(f"{name:42s} {path:6s} {seconds * 1e3:10.2f}")

    if _kernels.using_numba:
        print(
            f"\nspeedup: encoding x{t_np_enc / t_nb_enc:.1f}, "
            f"co-occurrence x{t_np_glcm / t_nb_glcm:.1f}"
        )


if __name__ == "__main__":
    main()
