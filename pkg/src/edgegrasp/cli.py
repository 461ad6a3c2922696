"""Command-line entry point.

Subcommands: ``plan`` (one depth image to grasp JSON), ``eval`` (detection
rates over a scene suite), ``render`` (scene file to 16-bit depth raster) and
``debug-stage`` (dump one intermediate stage).

Exit codes: 0 success (including zero grasps), 1 input error, 2 config
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .config import ConfigError, PipelineConfig
from .imaging import DepthFormatError, DepthImage, DepthInputError, load_depth, save_depth_pgm
from .pipeline import STAGES, PipelineError, dumps, report, run_pipeline

log = logging.getLogger("edgegrasp")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


# ------------------------------------------------------------------------
# helpers

def _load_config(path) -> PipelineConfig:
    return PipelineConfig.load(path)


def _load_input(path, cfg: PipelineConfig, seed=None, noise_mm=None):
    """Depth raster, or a scene file rendered on the fly. Returns (image, truth or None)."""
    if path is None:
        raise InputError("--input is required")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such input file: {p}")
    if p.suffix.lower() == ".ini":
        from .scenegen import SceneError, SceneSpec, render
        try:
            spec = SceneSpec.load(p)
            if noise_mm is not None or seed is not None:
                spec = spec.with_noise(spec.noise_sigma if noise_mm is None else noise_mm * 1e-3, seed)
            return render(spec)
        except SceneError as exc:
            raise InputError(f"bad scene file {p}: {exc}") from exc
    try:
        return load_depth(p, cfg.imaging.depth_scale), None
    except (DepthFormatError, DepthInputError, OSError) as exc:
        raise InputError(f"cannot read depth image {p}: {exc}") from exc


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def save_depth_png(img: DepthImage, path, scale: float = 0.001) -> None:
    raw = np.rint(img.depth / scale)
    if np.any(raw[img.valid] > 65535):
        raise DepthInputError("depth exceeds the 16-bit range at this scale")
    raw = np.where(img.valid, np.clip(raw, 1, 65535), 0).astype(np.uint16)
    Image.fromarray(raw).save(path)


def save_depth(img: DepthImage, path, scale: float = 0.001) -> None:
    if str(path).lower().endswith(".png"):
        save_depth_png(img, path, scale)
    else:
        save_depth_pgm(img, path, scale)


def _segment_json(L) -> dict:
    return {"start": [float(v) for v in L.p_start], "end": [float(v) for v in L.p_end],
            "length": float(L.length), "pixels": int(len(L.member_pixels))}


def _feature_json(fs) -> dict:
    return dict(_segment_json(fs.segment), id=fs.id, label=fs.label.value, angle=float(fs.angle),
                depth_pos=float(fs.mean_depth_pos), depth_neg=float(fs.mean_depth_neg))


def _pair_json(p) -> dict:
    return {"segments": [p.a.parent.id, p.b.parent.id], "beta": float(p.beta),
            "p_f": [float(v) for v in p.p_f], "w_dir": [float(v) for v in p.w_dir],
            "regions": [_segment_json(p.a.sub_segment), _segment_json(p.b.sub_segment)],
            "overlap": [[float(x), float(y)] for x, y in np.asarray(p.overlap.exterior.coords)[:-1]]}


def _scaled8(a: np.ndarray, valid=None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    m = np.isfinite(a) if valid is None else (valid & np.isfinite(a))
    out = np.zeros(a.shape, np.uint8)
    if m.any():
        hi = float(np.percentile(a[m], 99.5)) or 1.0
        out[m] = np.clip(255 * a[m] / hi, 0, 255).astype(np.uint8)
    return out


def dump_stage(res, stage: str, path) -> None:
    """Write one stage of a pipeline result: rasters as PNG, lists as JSON."""
    if stage in ("depth", "filled"):
        img = res.depth if stage == "depth" else res.filled
        save_depth_png(img, path, res.config.imaging.depth_scale)
        return
    if stage == "gradient":
        Image.fromarray(_scaled8(res.grad_raw.magnitude, res.grad_raw.valid)).save(path)
        return
    if stage in ("dd", "cd", "edges"):
        m = getattr(res, stage)
        Image.fromarray(np.where(m, 255, 0).astype(np.uint8)).convert("1").save(path)
        return
    if stage == "segments":
        doc = [_segment_json(L) for L in res.segments]
    elif stage == "features":
        doc = [_feature_json(f) for f in res.features]
    elif stage == "pairs":
        doc = [_pair_json(p) for p in res.pairs]
    else:
        doc = report(res)["candidates"]
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------------
# subcommands

def cmd_plan(args) -> int:
    cfg = _load_config(args.config)
    img, _ = _load_input(args.input, cfg)
    res = run_pipeline(img, cfg, seed=args.seed)
    _write_text(args.output, dumps(report(res, source=Path(args.input).name)))
    if args.overlay_dir:
        from .overlay import write_overlays
        write_overlays(args.overlay_dir, img, res, Path(args.input).stem)
    log.info("%d candidates", len(res.candidates))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import default_suite, run_eval, suite_files
    cfg = _load_config(args.config)
    suite = Path(args.suite) if args.suite else default_suite()
    if not suite.is_dir():
        raise InputError(f"suite directory not found: {suite}")
    files = suite_files(suite)
    if not files:
        raise InputError(f"no scenes in {suite}")
    res = run_eval(files, cfg, noise_sigma=(args.noise_mm or 0.0) * 1e-3, seed=args.seed)
    print(res.table())
    if args.output:
        _write_text(args.output, json.dumps(res.to_json(), indent=2, sort_keys=True) + "\n")
    if args.overlay_dir:
        log.info("eval writes no overlays; use plan on a scene file")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _load_config(args.config)
    if args.input is None or not str(args.input).lower().endswith(".ini"):
        raise InputError("render needs a scene file (.ini) as --input")
    if args.output is None:
        raise InputError("render needs --output (.pgm or .png)")
    img, truth = _load_input(args.input, cfg, args.seed, args.noise_mm)
    try:
        save_depth(img, args.output, cfg.imaging.depth_scale)
    except DepthInputError as exc:
        raise InputError(str(exc)) from exc
    if args.overlay_dir:
        from .overlay import truth_image
        d = Path(args.overlay_dir)
        d.mkdir(parents=True, exist_ok=True)
        truth_image(img, truth).save(d / f"{Path(args.input).stem}_truth.png")
    return EXIT_OK


def cmd_debug_stage(args) -> int:
    cfg = _load_config(args.config)
    if args.debug_stage is None:
        raise InputError("debug-stage needs --debug-stage NAME")
    if args.output is None:
        raise InputError("debug-stage needs --output")
    img, _ = _load_input(args.input, cfg)
    res = run_pipeline(img, cfg, seed=args.seed, stop_after=args.debug_stage)
    dump_stage(res, args.debug_stage, args.output)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "eval": cmd_eval, "render": cmd_render, "debug-stage": cmd_debug_stage}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgegrasp", description="Edge-based parallel-jaw grasp planning on depth images.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("plan", "plan grasps on one depth image (or scene file)"),
                      ("eval", "detection rates over a scene suite"),
                      ("render", "render a scene file to a 16-bit depth image"),
                      ("debug-stage", "dump one intermediate pipeline stage")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--input", help="16-bit PGM/PNG depth image, or a scene .ini")
        p.add_argument("--config", help="INI pipeline configuration")
        p.add_argument("--output", help="output path (JSON, image); stdout if omitted where allowed")
        p.add_argument("--overlay-dir", help="directory for debug overlay images")
        p.add_argument("--seed", type=int, help="RANSAC seed (and noise seed for scenes)")
        p.add_argument("--debug-stage", choices=STAGES, help="stage to dump")
        p.add_argument("--suite", help="directory of scene files")
        p.add_argument("--noise-mm", type=float, help="Gaussian depth noise for rendered scenes, in mm")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:   # argparse usage errors are input errors
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.noise_mm is not None and args.noise_mm < 0:
        print("error: --noise-mm must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        if isinstance(exc.cause, (DepthInputError, DepthFormatError)):
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        log.exception("pipeline failed")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:    # noqa: BLE001 - last-resort exit code
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
