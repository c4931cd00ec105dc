"""Time the numba kernels against their numpy twins on the test mesh pair.

    python3 benchmarks/bench_kernels.py [--max-level 4] [--repeat 3]

The first numba call of a session compiles (or loads the on-disk cache);
that warm-up is reported separately and excluded from the timings.
"""
import argparse
import time

import numpy as np

from bcmortar import _kernels
from bcmortar.experiments import gen_test_meshes
from bcmortar.overlay import _grid, intersect_meshes


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-level", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.use_numba():
        raise SystemExit("numba is switched off (BCMORTAR_NUMBA); nothing to compare")

    t = time.perf_counter()
    a, b = gen_test_meshes(0)
    intersect_meshes(a, b, method="front")
    _kernels.locate_points_jit(*_grid(a).args(), np.full((1, 2), 0.5), 1e-10)
    _kernels.clip_segments_jit(*_grid(a).args(), np.zeros((1, 2)), np.ones((1, 2)) * 0.9, 1e-12)
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t:.2f} s\n")

    print(f"{'kernel':10s} {'level':>5s} {'size':>8s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    rng = np.random.default_rng(0)
    for level in range(args.max_level + 1):
        mi, mj = gen_test_meshes(level)
        rows = []
        rows.append(("overlay", mi.n_facets + mj.n_facets,
                     lambda: intersect_meshes(mi, mj, method="front"),
                     lambda: intersect_meshes(mi, mj, method="batch")))
        pts = rng.uniform(0, 1, (mj.n_nodes, 2))
        g = _grid(mi).args()
        rows.append(("locate", len(pts),
                     lambda: _kernels.locate_points_jit(*g, pts, 1e-10),
                     lambda: _kernels.locate_points_numpy(*g, pts, 1e-10)))
        x = mj.node_coords
        p0, p1 = x[mj.edges[:, 0]].copy(), x[mj.edges[:, 1]].copy()
        rows.append(("clip", len(p0),
                     lambda: _kernels.clip_segments_jit(*g, p0, p1, 1e-12),
                     lambda: _kernels.clip_segments_numpy(*g, p0, p1, 1e-12)))
        for name, size, fast, slow in rows:
            tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
            print(f"{name:10s} {level:5d} {size:8d} {1e3 * tf:11.2f} {1e3 * ts:11.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
