"""Regenerate the shipped scene suite (src/edgegrasp/scenes/*.ini).

Objects sit on a jittered grid; boxes are yawed relative to the direction
toward the camera so that either two or three faces are clearly visible.
"""

import math
from pathlib import Path

import numpy as np

from edgegrasp.scenegen import Box, Cylinder, SceneSpec

OUT = Path(__file__).resolve().parents[1] / "src" / "edgegrasp" / "scenes"
CAMERA = dict(position=(0.0, -0.3, 0.6), target=(0.0, 0.22, 0.0))

# (name, number of boxes, number of cylinders, grid pitch, three-face boxes)
SUITE = [
    ("01_boxes", 3, 0, 0.17, False),
    ("02_boxes", 3, 0, 0.17, True),
    ("03_cylinders", 0, 3, 0.17, False),
    ("04_cylinders", 0, 5, 0.15, False),
    ("05_mixed_low", 3, 3, 0.16, False),
    ("06_mixed_low", 4, 3, 0.16, True),
    ("07_mixed_high", 6, 5, 0.14, True),
    ("08_mixed_high", 6, 6, 0.14, False),
]


def grid(n, pitch):
    cols = min(n, 4)
    rows = math.ceil(n / cols)
    xs = (np.arange(cols) - (cols - 1) / 2) * pitch
    ys = 0.20 + (np.arange(rows) - (rows - 1) / 2) * pitch
    return [(float(x), float(y)) for y in ys for x in xs][:n]


def facing_yaw(x, y):
    cx, cy = CAMERA["position"][:2]
    return math.degrees(math.atan2(cx - x, -(cy - y)))


def build(name, nb, nc, pitch, three, seed):
    rng = np.random.default_rng(seed)
    cells = grid(nb + nc, pitch)
    order = rng.permutation(len(cells))
    boxes, cyls = [], []
    for k, idx in enumerate(order):
        x, y = cells[idx]
        x += float(rng.uniform(-0.01, 0.01))
        y += float(rng.uniform(-0.01, 0.01))
        if k < nb:
            size = (float(rng.uniform(0.04, 0.06)), float(rng.uniform(0.04, 0.06)), float(rng.uniform(0.06, 0.11)))
            yaw = facing_yaw(x, y)
            if three:
                yaw += float(rng.choice([-1, 1]) * rng.uniform(35, 45))
            boxes.append(Box((round(x, 4), round(y, 4)), tuple(round(s, 4) for s in size), round(yaw, 2)))
        else:
            cyls.append(Cylinder((round(x, 4), round(y, 4)), round(float(rng.uniform(0.022, 0.03)), 4),
                                 round(float(rng.uniform(0.07, 0.13)), 4)))
    return SceneSpec(boxes=boxes, cylinders=cyls, name=name, **CAMERA).validate()


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for i, (name, nb, nc, pitch, three) in enumerate(SUITE):
        spec = build(name, nb, nc, pitch, three, seed=100 + i)
        (OUT / f"{name}.ini").write_text(spec.to_ini())
        print(name, len(spec.boxes), len(spec.cylinders))
    names = [f"{name}.ini" for name, *_ in SUITE]
    (OUT / "suite.txt").write_text("# standard suite, in table order\n" + "\n".join(names) + "\n")


if __name__ == "__main__":
    main()
