"""Time the compiled kernels against the numpy fallback on identical inputs.

Run with ``python3 benchmarks/compare_backends.py [--repeats N]``. Also times
one full edge-set build per backend, which is dominated by these kernels.
"""
import argparse
import time

import numpy as np

from lanegraph import kernels, topology
from lanegraph.synth import SynthConfig, gen_scene


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def random_csr(rng, n_rows, n_cols, density):
    dense = rng.random((n_rows, n_cols)) < density
    rows, cols = np.nonzero(dense)
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(ptr, rows + 1, 1)
    return np.cumsum(ptr), cols.astype(np.int64)


def cases(rng):
    a = random_csr(rng, 2000, 2000, 0.002)
    b = random_csr(rng, 2000, 2000, 0.002)
    vals = rng.normal(size=(20000, 64))
    ids = np.sort(rng.integers(0, 3000, 20000))
    scatter_idx = rng.integers(0, 3000, 20000)
    pts = rng.uniform(0, 500, (400, 2))
    lines = [rng.uniform(0, 500, (12, 2)) for _ in range(800)]
    verts = np.concatenate(lines)
    ptr = np.cumsum([0] + [len(v) for v in lines])
    return {
        "bool_spgemm 2000x2000": lambda k: k.bool_spgemm(*a, *b, 2000),
        "segment_sum 20000x64": lambda k: k.segment_sum(vals, ids, 3000),
        "segment_max 20000x64": lambda k: k.segment_max(vals, ids, 3000),
        "scatter_add_rows 20000x64": lambda k: k.scatter_add_rows(vals, scatter_idx, 3000),
        "polyline_min_dist 400x800": lambda k: k.polyline_min_dist(pts, verts, ptr),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; only the numpy fallback is available")
        return
    py = kernels.get_backend("python")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        tp = best_of(lambda: fn(py), args.repeats) * 1e3
        tc = best_of(lambda: fn(cy), args.repeats) * 1e3
        print(f"{name:<28}{tp:>12.3f}{tc:>12.3f}{tp / tc:>9.1f}x")

    from lanegraph.scene import batch_scenes

    scene = batch_scenes([gen_scene(SynthConfig(), s)[0] for s in range(16)])[0]
    orig = {n: getattr(topology.kernels, n) for n in ("bool_spgemm", "polyline_min_dist")}
    times = {}
    for label, mod in (("numpy", py), ("cython", cy)):
        for n in orig:
            setattr(topology.kernels, n, getattr(mod, n))
        times[label] = best_of(lambda: topology.build_edge_sets(scene, 30.0, "OFF"), args.repeats) * 1e3
    for n, f in orig.items():
        setattr(topology.kernels, n, f)
    print(
        f"{'edge sets, 16 scenes':<28}{times['numpy']:>12.3f}{times['cython']:>12.3f}"
        f"{times['numpy'] / times['cython']:>9.1f}x"
    )


if __name__ == "__main__":
    main()
