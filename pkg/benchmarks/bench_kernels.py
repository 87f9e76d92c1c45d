"""Benchmark: compiled vs. pure-python ray/grid interval kernel.

Run: python3 benchmarks/bench_kernels.py [--rays N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fvvren import make_rig, scenes
from fvvren.cameras import orbit_camera, pixel_rays
from fvvren.hull import carve
from fvvren.kernels import _pykernels

try:
    from fvvren.kernels import _core
except ImportError:
    _core = None


def build_case(n_rays: int):
    scene = scenes.sphere_checker_scene()
    rig = make_rig(6, 3.0)
    masks = scenes.gt_masks(scene, rig)
    hull = carve(rig, masks, scene.aabb())
    side = int(np.ceil(np.sqrt(n_rays)))
    cam = orbit_camera(rig, 30.0, 10.0, 3.0, (side, side))
    uu, vv = np.meshgrid(np.arange(side, dtype=np.float64), np.arange(side, dtype=np.float64))
    pixels = np.stack([uu.ravel(), vv.ravel()], axis=1)[:n_rays]
    origin, dirs, _ = pixel_rays(cam, pixels)
    origins = np.broadcast_to(origin, dirs.shape).copy()
    return origins, dirs, hull


def bench(fn, args, repeats: int) -> float:
    fn(*args)  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rays", type=int, default=262144)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    origins, dirs, hull = build_case(args.rays)
    call = (origins, dirs, hull.origin, hull.spacing, hull.dims, hull.occupancy.astype(np.uint8))

    t_py = bench(_pykernels.ray_grid_intervals, call, args.repeats)
    print(f"python fallback : {t_py * 1e3:9.2f} ms  ({args.rays / t_py / 1e6:6.2f} Mrays/s)")

    if _core is None:
        print("compiled kernel : not built (pip install -e . to compile)")
        return

    t_c = bench(_core.ray_grid_intervals, call, args.repeats)
    print(f"compiled kernel : {t_c * 1e3:9.2f} ms  ({args.rays / t_c / 1e6:6.2f} Mrays/s)")
    print(f"speedup         : {t_py / t_c:9.2f}x")

    h_py, tn_py, tf_py = _pykernels.ray_grid_intervals(*call)
    h_c, tn_c, tf_c = _core.ray_grid_intervals(*call)
    identical = (
        np.array_equal(h_py, h_c)
        and np.array_equal(tn_py, tn_c)
        and np.array_equal(tf_py, tf_c)
    )
    print(f"bit-identical   : {identical}")


if __name__ == "__main__":
    main()
