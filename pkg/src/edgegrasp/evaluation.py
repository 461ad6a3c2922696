"""Detection-rate evaluation over a suite of synthetic scenes."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .config import PipelineConfig
from .metrics import DetectionReport, average_rates, evaluate_detection, format_table
from .pipeline import run_pipeline
from .scenegen import SceneError, SceneSpec, render

log = logging.getLogger(__name__)

MANIFEST = "suite.txt"


def default_suite() -> Path:
    return Path(str(resources.files("edgegrasp") / "scenes"))


def suite_files(suite) -> list[Path]:
    """Scene files of a suite directory.

    A ``suite.txt`` manifest (one file name per line, ``#`` comments) fixes
    the list and order; without one every ``*.ini`` is used in name order.
    Listed files need not exist; those are reported as skipped later.
    """
    d = Path(suite)
    man = d / MANIFEST
    if man.is_file():
        names = [ln.split("#", 1)[0].strip() for ln in man.read_text().splitlines()]
        return [d / n for n in names if n]
    return sorted(d.glob("*.ini"))


@dataclass
class EvalResult:
    reports: list[DetectionReport] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def average(self) -> dict:
        return average_rates(self.reports)

    def table(self) -> str:
        txt = format_table(self.reports)
        for name, why in self.skipped:
            txt += f"\nskipped {name}: {why}"
        return txt

    def to_json(self) -> dict:
        return {"scenes": [r.row() for r in self.reports], "average": self.average,
                "skipped": [{"scene": n, "reason": w} for n, w in self.skipped]}


def run_eval(suite=None, cfg: PipelineConfig | None = None, noise_sigma: float = 0.0,
             seed: int | None = None) -> EvalResult:
    """Render each scene, run the unconstrained pipeline, and score detections.

    ``noise_sigma`` (meters) overrides the scene files' noise; ``seed`` sets the
    noise seed of every scene and the RANSAC seed.
    """
    cfg = (cfg or PipelineConfig()).validate()
    files = suite if isinstance(suite, (list, tuple)) else suite_files(suite or default_suite())
    out = EvalResult()
    for f in files:
        f = Path(f)
        try:
            spec = SceneSpec.load(f)
        except (OSError, SceneError) as exc:
            log.warning("skipping %s: %s", f, exc)
            out.skipped.append((f.stem, str(exc) if not isinstance(exc, OSError) else "missing or unreadable"))
            continue
        spec = spec.with_noise(noise_sigma if noise_sigma else spec.noise_sigma, seed)
        t0 = time.perf_counter()
        img, truth = render(spec)
        t1 = time.perf_counter()
        res = run_pipeline(img, cfg, seed=seed, unconstrained=True)
        t2 = time.perf_counter()
        out.reports.append(evaluate_detection(res.features, res.pairs, truth, name=spec.name))
        out.timings[spec.name] = {"render": t1 - t0, "pipeline": t2 - t1}
    return out
