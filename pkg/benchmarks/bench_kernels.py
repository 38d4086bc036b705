"""Benchmark the numba kernels against the pure-numpy fallback.

Times the conv/pool primitives and a full small_conv loss_and_grad on
both backends. Numba JIT compilation is excluded by a warmup call.

Usage: python3 benchmarks/bench_kernels.py [--batch 64] [--repeats 30]
"""

import argparse
import time

import numpy as np

from currlab import nn
from currlab.nn import backend, kernels_numpy

try:
    from currlab.nn import kernels_numba
except ImportError:
    kernels_numba = None


def timeit(fn, repeats):
    fn()  # warmup (and JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(batch, repeats):
    r = np.random.default_rng(0)
    x = r.normal(size=(batch, 8, 16, 16))
    w = r.normal(size=(16, 8, 3, 3))
    b = r.normal(size=16)
    dy = r.normal(size=(batch, 16, 16, 16))
    px = r.normal(size=(batch, 16, 16, 16))
    pdy = r.normal(size=(batch, 16, 8, 8))

    mods = [("numpy", kernels_numpy)]
    if kernels_numba is not None:
        mods.append(("numba", kernels_numba))
    rows = []
    for name, mod in mods:
        arg = mod.maxpool2_forward(px)[1]
        rows.append((name, "conv2d_forward",
                     timeit(lambda: mod.conv2d_forward(x, w, b), repeats)))
        rows.append((name, "conv2d_backward",
                     timeit(lambda: mod.conv2d_backward(x, w, dy), repeats)))
        rows.append((name, "maxpool2_forward",
                     timeit(lambda: mod.maxpool2_forward(px), repeats)))
        rows.append((name, "maxpool2_backward",
                     timeit(lambda: mod.maxpool2_backward(arg, pdy, 16, 16),
                            repeats)))
    return rows


def bench_full_model(batch, repeats):
    """Full small_conv training step at two scales.

    The 8x8 single-channel case is the shape the curriculum experiments
    actually train; the 16x16 case shows where the einsum path starts
    winning on raw conv throughput.
    """
    cases = [
        ("small_conv 8x8 step", nn.ArchSpec(
            "small_conv", 10, conv_channels=(8,), kernel_size=3,
            pool=(True,), in_shape=(1, 8, 8)), 32),
        ("small_conv 16x16 step", nn.ArchSpec(
            "small_conv", 10, conv_channels=(8, 16), kernel_size=3,
            pool=(True, True), in_shape=(1, 16, 16)), batch),
    ]
    rows = []
    names = ["numpy"] + (["numba"] if kernels_numba is not None else [])
    r = np.random.default_rng(1)
    for label, arch, bsz in cases:
        model = nn.init_model(arch, 0)
        dim = int(np.prod(arch.in_shape))
        bt = nn.Batch(np.arange(bsz), r.normal(size=(bsz, dim)),
                      r.integers(0, 10, size=bsz))
        for name in names:
            backend.set_backend(name)
            rows.append((name, label,
                         timeit(lambda: nn.loss_and_grad(model, bt), repeats)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    rows = bench_kernels(args.batch, args.repeats)
    rows += bench_full_model(args.batch, args.repeats)
    print(f"{'backend':8s} {'op':26s} {'best ms':>10s}")
    baseline = {}
    for name, op, secs in rows:
        if name == "numpy":
            baseline[op] = secs
        speed = (f"  ({baseline[op] / secs:4.1f}x vs numpy)"
                 if name != "numpy" and op in baseline else "")
        print(f"{name:8s} {op:26s} {secs * 1e3:10.3f}{speed}")


if __name__ == "__main__":
    main()
