"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the tap-gather kernel on a City100-sized resize, im2col/col2im on a
training-sized activation, and one full training step under each backend.
Matrix products go to BLAS in both cases, so the training-step ratio is
smaller than the kernel ratios.
"""
import argparse
import time

import numpy as np

from camlens import kernels
from camlens.resample import cubic_taps


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def use_backend(name):
    b = kernels.get_backend(name)
    for attr in ("apply_taps", "im2col3x3", "col2im3x3"):
        setattr(kernels, attr, getattr(b, attr))
    return b


def cases(rng):
    img = rng.random((870, 1218 * 3))  # one horizontal pass of a 1218x870 RGB resize
    coords = (np.arange(420) + 0.5) * 1218 / 420 - 0.5
    idx, w = cubic_taps(coords, 1218)
    src = np.ascontiguousarray(img.reshape(870, 1218, 3))
    act = rng.random((32, 16, 64, 64)).astype(np.float32)
    cols = rng.random((32, 9, 16, 64, 64)).astype(np.float32)

    from camlens.dataset import PairedScene
    from camlens.resample import degrade_bicubic
    from camlens.srnet import SrModel, TrainConfig, train
    hr = rng.random((96, 96, 3))
    scenes = [PairedScene("b", degrade_bicubic(hr, 2.0), hr, 2.0)]
    cfg = TrainConfig(batch_size=16, patch=64, steps=1, learning_rate=1e-4)

    return {
        "apply_taps 1218->420 x870 rows": lambda b: b.apply_taps(src, idx, w),
        "im2col3x3 (32,16,64,64) f32": lambda b: b.im2col3x3(act),
        "col2im3x3 (32,9,16,64,64) f32": lambda b: b.col2im3x3(cols),
        "train step D8/F32 16x64^2": lambda b: train(scenes, "bicubic", cfg, model=SrModel.init()),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_available():
        raise SystemExit("compiled extension not built; nothing to compare")
    rng = np.random.default_rng(0)
    table = cases(rng)
    print(f"{'case':34s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, fn in table.items():
        t = {}
        for backend in ("compiled", "python"):
            b = use_backend(backend)
            fn(b)  # warm-up
            t[backend] = best_of(lambda: fn(b), args.repeat)
        print(f"{name:34s} {t['compiled'] * 1e3:9.2f}ms {t['python'] * 1e3:9.2f}ms {t['python'] / t['compiled']:7.1f}x")
    use_backend(kernels.BACKEND)


if __name__ == "__main__":
    main()
