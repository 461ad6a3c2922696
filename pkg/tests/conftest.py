import functools
import math

import numpy as np
import pytest

from edgegrasp.evaluation import default_suite, suite_files
from edgegrasp.imaging import DepthImage
from edgegrasp.scenegen import Box, Cylinder, SceneSpec, render

SUITE = default_suite()


def suite_paths():
    return suite_files(SUITE)


@functools.lru_cache(maxsize=None)
def rendered(name: str, sigma: float = 0.0, seed: int = 7):
    spec = SceneSpec.load(SUITE / f"{name}.ini").with_noise(sigma, seed)
    return render(spec)


def box_scene(**kw) -> SceneSpec:
    """One box in front of the camera, one face roughly facing it."""
    base = dict(position=(0.0, -0.3, 0.6), target=(0.0, 0.22, 0.0), name="one_box",
                boxes=[Box((0.0, 0.2), (0.05, 0.05, 0.09), 0.0)])
    base.update(kw)
    return SceneSpec(**base)


def cylinder_scene(**kw) -> SceneSpec:
    base = dict(position=(0.0, -0.3, 0.6), target=(0.0, 0.22, 0.0), name="one_cyl",
                cylinders=[Cylinder((0.0, 0.2), 0.025, 0.1)])
    base.update(kw)
    return SceneSpec(**base)


def flat(depth) -> DepthImage:
    return DepthImage.from_array(np.asarray(depth, dtype=float))


@pytest.fixture(scope="session")
def box_render():
    return render(box_scene())


@pytest.fixture(scope="session")
def cylinder_render():
    return render(cylinder_scene())


def step_image(h=40, w=40, near=0.5, far=0.8, col=20):
    d = np.full((h, w), far)
    d[:, :col] = near
    return flat(d)


def roof_image(h=60, w=60, angle_deg=90.0, base=0.8, col=30, ridge=True):
    """Two planar ramps meeting along a vertical line; ``angle_deg`` is the dihedral angle."""
    slope = math.tan(math.radians((180.0 - angle_deg) / 2.0)) * 0.001
    c = np.arange(w) - col
    prof = base + (slope * np.abs(c) if ridge else -slope * np.abs(c))
    return flat(np.tile(prof, (h, 1)))


@functools.lru_cache(maxsize=None)
def pipeline_on(name: str, unconstrained: bool = False, stop_after=None):
    from edgegrasp.pipeline import run_pipeline
    img, truth = rendered(name)
    return run_pipeline(img, stop_after=stop_after, unconstrained=unconstrained), truth


def region_object(region, object_map):
    """Majority object id a few pixels into the region's wrench side, or None."""
    ids = []
    for k in (1, 2, 3, 4):
        x, y = region.center + k * region.normal
        r, c = int(round(-y)), int(round(x))
        if 0 <= r < object_map.shape[0] and 0 <= c < object_map.shape[1] and object_map[r, c] >= 0:
            ids.append(int(object_map[r, c]))
    return max(set(ids), key=ids.count) if ids else None


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
