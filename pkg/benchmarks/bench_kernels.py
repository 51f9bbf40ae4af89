"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs each hot kernel on representative sizes with both backends imported
side by side and prints a per-kernel speedup table. Usage:

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from privdist import _kernels_py as pure

try:
    from privdist import _kernels as compiled
except ImportError:
    compiled = None


def _workloads(rng):
    pts = np.ascontiguousarray(rng.random((100_000, 4)))
    xs = np.ascontiguousarray(rng.random(100_000))
    ts = np.ascontiguousarray(rng.random(256))
    y = np.ascontiguousarray(rng.random(4))
    a = rng.uniform(-1, 1, 64)
    b = rng.uniform(-1, 1, 64)
    grid = np.linspace(0, 1, 10_000)
    out1 = np.empty(256)
    out2 = np.empty(10_000)
    dists = np.ascontiguousarray(rng.random((120, 4096)))
    counts = rng.integers(1, 64, 2048)
    offsets = np.zeros(2049, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    idx = rng.integers(0, 4096, offsets[-1]).astype(np.int64)
    out3 = np.empty((120, 2048))
    return [
        ("avg_l1 100k x 4", lambda k: k.avg_l1(pts, y, 0.25)),
        ("avg_l2 100k x 4", lambda k: k.avg_l2(pts, y, 0.25)),
        ("coord_value 100k", lambda k: k.coord_value(xs, 0.4, 1.0)),
        ("coord_value_batch 100k x 256",
         lambda k: k.coord_value_batch(xs, ts, 1.0, out1)),
        ("coord_subgrad 100k", lambda k: k.coord_subgrad(xs, 0.4, 1.0)),
        ("pwl_eval_batch 64 x 10k",
         lambda k: k.pwl_eval_batch(a, b, grid, out2)),
        ("subset_min 120 x 2048",
         lambda k: k.subset_min(dists, idx, offsets, 1.0, 0.01, out3)),
    ]


def bench(repeat: int) -> None:
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in _workloads(rng):
        t_pure = min(timeit.repeat(lambda: fn(pure), number=1, repeat=repeat))
        if compiled is None:
            rows.append((name, t_pure, None, None))
            continue
        t_comp = min(timeit.repeat(lambda: fn(compiled), number=1,
                                   repeat=repeat))
        rows.append((name, t_pure, t_comp, t_pure / t_comp))
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, tp, tc, ratio in rows:
        comp = f"{tc * 1e3:9.3f}ms" if tc is not None else "       n/a"
        speed = f"{ratio:7.1f}x" if ratio is not None else "     n/a"
        print(f"{name:<{width}}  {tp * 1e3:9.3f}ms  {comp}  {speed}")
    if compiled is None:
        print("\ncompiled extension not built; showing fallback only")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    bench(parser.parse_args().repeat)
