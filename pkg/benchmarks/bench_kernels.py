"""Time the numba and numpy kernel backends on a rendered suite scene.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--scene PATH]

Both backends are imported directly, so the ``EDGEGRASP_NUMBA`` switch is not
needed here. Outputs of the two are compared before timing.
"""

import argparse
import time

import numpy as np

from edgegrasp.evaluation import default_suite
from edgegrasp.imaging import compute_gradients, fill_shadows
from edgegrasp.kernels import _numba, _numpy
from edgegrasp.scenegen import SceneSpec, _primitive_arrays, render


def _best(fn, args, repeat):
    fn(*args)   # warm-up (and numba compile)
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        ts.append(time.perf_counter() - t)
    return min(ts)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b, equal_nan=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scene", default=str(default_suite() / "08_mixed_high.ini"))
    args = ap.parse_args()

    spec = SceneSpec.load(args.scene).with_noise(0.002, 0)
    img, _ = render(spec)
    g = compute_gradients(fill_shadows(img), "central", 1.0)
    strong = g.magnitude > 0.015
    weak = g.magnitude > 0.005
    # punch holes so the median fill has work to do
    rng = np.random.default_rng(0)
    valid = img.valid & (rng.random(img.valid.shape) > 0.05)
    depth = np.where(valid, img.depth, 0.0)
    rays = spec.camera.rays(spec.height, spec.width).reshape(-1, 3) @ spec.rotation.T
    arrays, _ = _primitive_arrays(spec)
    origin = np.asarray(spec.position, dtype=np.float64)

    cases = {
        "nms": (g.magnitude, g.gx, g.gy),
        "hysteresis": (strong, weak),
        "median_fill_pass": (depth, valid, 2),
        "raycast": (np.ascontiguousarray(rays), origin, *arrays, float(spec.table_z)),
    }
    print(f"{'kernel':<18}{'numba (ms)':>12}{'numpy (ms)':>12}{'speed-up':>10}  outputs")
    for name, a in cases.items():
        fa, fb = getattr(_numba, name), getattr(_numpy, name)
        same = _same(fa(*a), fb(*a))
        ta, tb = _best(fa, a, args.repeat), _best(fb, a, args.repeat)
        print(f"{name:<18}{1e3 * ta:>12.2f}{1e3 * tb:>12.2f}{tb / ta:>9.1f}x  {'equal' if same else 'DIFFER'}")


if __name__ == "__main__":
    main()
