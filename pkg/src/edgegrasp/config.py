"""Pipeline configuration: nested dataclasses backed by an INI file.

Every default here is the shipped default. Unknown keys are rejected so a typo
in a config file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent configuration."""


@dataclass
class CameraConfig:
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5


@dataclass
class ImagingConfig:
    depth_scale: float = 0.001        # raw units -> meters
    shadow_window: int = 5
    shadow_max_passes: int = 16
    smooth_sigma: float = 1.0         # Gaussian pre-smoothing for edge detection (pixels)
    gradient_stencil: str = "central"  # or "sobel"


@dataclass
class EdgesConfig:
    dd_low: float = 0.005             # meters of depth step
    dd_high: float = 0.015
    cd_low: float = 0.12              # radians of direction change
    cd_high: float = 0.35
    cd_smooth_sigma: float = 2.0
    cd_min_gradient: float = 2e-4     # m/px; below this the direction is undefined
    close_size: int = 3
    min_speck: int = 5


@dataclass
class SegmentsConfig:
    dev_tol: float = 1.5
    min_len: float = 8.0


@dataclass
class FeaturesConfig:
    w0: int = 5
    relocation_width: int = 7
    relocation_margin: float = 2.0
    min_valid_fraction: float = 0.3


@dataclass
class FrictionConfig:
    mu: float = 0.4

    @property
    def alpha_f(self) -> float:
        return math.atan(self.mu)


@dataclass
class PairingConfig:
    gate: bool = True
    gate_factor: float = 1.5


@dataclass
class GripperConfig:
    eps_min: float = 0.02
    eps_max: float = 0.07
    eps_d: float = 0.08


@dataclass
class RansacConfig:
    t_max: float = 0.008
    iterations: int = 256
    seed: int = 0
    min_inliers: int = 10
    min_side_fraction: float = 0.5


@dataclass
class RankingConfig:
    w_length: float = 1.0
    w_inlier: float = 10.0
    w_rms: float = 1000.0
    dedup_distance: float = 0.01
    dedup_angle_deg: float = 10.0


@dataclass
class DebugConfig:
    overlays: bool = False
    dump_stages: bool = False


_SECTIONS = {
    "camera": CameraConfig,
    "imaging": ImagingConfig,
    "edges": EdgesConfig,
    "segments": SegmentsConfig,
    "features": FeaturesConfig,
    "friction": FrictionConfig,
    "pairing": PairingConfig,
    "gripper": GripperConfig,
    "ransac": RansacConfig,
    "ranking": RankingConfig,
    "debug": DebugConfig,
}


@dataclass
class PipelineConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    edges: EdgesConfig = field(default_factory=EdgesConfig)
    segments: SegmentsConfig = field(default_factory=SegmentsConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    friction: FrictionConfig = field(default_factory=FrictionConfig)
    pairing: PairingConfig = field(default_factory=PairingConfig)
    gripper: GripperConfig = field(default_factory=GripperConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    debug: DebugConfig = field(default_factory=DebugConfig)

    def validate(self) -> "PipelineConfig":
        for name in _SECTIONS:
            for f in fields(getattr(self, name)):
                v = getattr(getattr(self, name), f.name)
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    if not math.isfinite(v) or v < 0:
                        raise ConfigError(f"{name}.{f.name} must be a finite non-negative number, got {v}")
        c = self.camera
        if c.fx <= 0 or c.fy <= 0:
            raise ConfigError("camera focal lengths must be positive")
        g = self.gripper
        if not 0 < g.eps_min < g.eps_max:
            raise ConfigError(f"need 0 < eps_min < eps_max, got {g.eps_min}, {g.eps_max}")
        e = self.edges
        if not e.dd_low < e.dd_high:
            raise ConfigError("edges.dd_low must be below edges.dd_high")
        if not e.cd_low < e.cd_high:
            raise ConfigError("edges.cd_low must be below edges.cd_high")
        if self.imaging.shadow_window < 3 or self.imaging.shadow_window % 2 == 0:
            raise ConfigError("imaging.shadow_window must be odd and >= 3")
        if self.imaging.gradient_stencil not in ("central", "sobel"):
            raise ConfigError("imaging.gradient_stencil must be 'central' or 'sobel'")
        if self.segments.dev_tol <= 0:
            raise ConfigError("segments.dev_tol must be positive")
        if self.features.w0 < 1:
            raise ConfigError("features.w0 must be >= 1")
        if not 0 < self.friction.mu:
            raise ConfigError("friction.mu must be positive")
        if self.ransac.iterations < 1:
            raise ConfigError("ransac.iterations must be >= 1")
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for name in _SECTIONS:
            cp[name] = {k: _fmt(v) for k, v in asdict(getattr(self, name)).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]

    @classmethod
    def from_ini(cls, text: str) -> "PipelineConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls()
        for sec in cp.sections():
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown config section [{sec}]")
            target = getattr(cfg, sec)
            known = {f.name: f for f in fields(target)}
            for key, raw in cp[sec].items():
                if key not in known:
                    raise ConfigError(f"unknown key {sec}.{key}")
                setattr(target, key, _parse(raw, type(getattr(target, key)), f"{sec}.{key}"))
        return cfg.validate()

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        if path is None:
            return cls().validate()
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse(raw: str, typ: type, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
