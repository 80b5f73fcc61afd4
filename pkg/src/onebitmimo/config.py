"""Scenario configuration: flat key/value text files with dotted sections.

Example::

    geometry.n_rrh = 4
    geometry.ants_per_rrh = 32
    geometry.n_ue = 4
    noise.sigma_min_dbm = -95
    experiment.sweep = rho_ue_dbm
    experiment.start = -5
    experiment.stop = 25
    experiment.step = 5

All powers in config files are dBm; everything becomes linear watts inside.
Unknown keys and malformed values raise ConfigError with the line number.
"""

import hashlib
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .geometry import build_geometry
from .power_control import OptimizerConfig
from .units import dbm_to_watt

SWEEP_VARIABLES = ("rho_dbm", "rho_ue_dbm", "gamma_target", "d_ref_m",
                   "b_cluster_m", "n_ue", "ants_per_rrh")


@dataclass
class GeometryConfig:
    n_rrh: int = 4
    ants_per_rrh: int = 32
    n_ue: int = 4
    layout: str = "square_grid"
    spacing_m: float = 100.0
    d_ref_m: float = 0.0
    b_cluster_m: float = 10.0
    rrh_height_m: float = 5.0
    ue_height_m: float = 0.0


@dataclass
class CsiConfig:
    mode: str = "perfect"        # "perfect" or "synthetic"
    epsilon: float = 0.0
    pilot_length: int = 128      # informational only


@dataclass
class ExperimentConfig:
    sweep: str = "rho_ue_dbm"
    start: float = -5.0
    stop: float = 25.0
    step: float = 5.0
    seed: int = 0
    n_seeds: int = 1
    n_symbols: int = 100_000
    receivers: tuple = ("bmrc", "bmmse")
    dithering: tuple = ("off", "on")
    gamma_target: float = 2.0        # per-UE target for min-power sweeps
    rho_ue_dbm: float = 25.0         # per-UE cap outside rho_ue sweeps
    rho_dbm: float = 0.0             # fixed power for non-power sweeps


@dataclass
class ScenarioConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    csi: CsiConfig = field(default_factory=CsiConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    sigma_min_dbm: float = -95.0

    @property
    def sigma_min(self):
        """Noise floor standard deviation in sqrt-watts."""
        return float(np.sqrt(dbm_to_watt(self.sigma_min_dbm)))

    def build_geometry(self):
        g = self.geometry
        return build_geometry(g.n_rrh, g.ants_per_rrh, g.n_ue,
                              layout=g.layout, spacing=g.spacing_m,
                              d_ref=g.d_ref_m, b_cluster=g.b_cluster_m,
                              rrh_height=g.rrh_height_m,
                              ue_height=g.ue_height_m)

    def to_text(self):
        """Canonical serialization; stable across runs for hashing."""
        lines = []
        for section, obj in (("geometry", self.geometry), ("csi", self.csi),
                             ("optimizer", self.optimizer),
                             ("experiment", self.experiment)):
            for f in fields(obj):
                value = getattr(obj, f.name)
                lines.append(f"{section}.{f.name} = {_format_value(value)}")
        lines.append(f"noise.sigma_min_dbm = {_format_value(self.sigma_min_dbm)}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _format_value(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


_SECTIONS = {
    "geometry": GeometryConfig,
    "csi": CsiConfig,
    "optimizer": OptimizerConfig,
    "experiment": ExperimentConfig,
}

_LIST_KEYS = {"receivers", "dithering"}
_TUPLE_KEYS = {"rho_init_range_dbm"}


def _coerce(dataclass_type, name, raw, location):
    spec = {f.name: f for f in fields(dataclass_type)}
    if name not in spec:
        raise ConfigError(f"{location}: unknown key {name!r}")
    current_type = type(getattr(dataclass_type(), name))
    try:
        if name in _LIST_KEYS:
            return tuple(part.strip() for part in raw.split(",") if part.strip())
        if name in _TUPLE_KEYS:
            return tuple(float(part) for part in raw.split(","))
        if current_type is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if current_type is int:
            return int(raw)
        if current_type is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{location}: bad value {raw!r} for {name}") from exc


def parse_config(text, source="<config>") -> ScenarioConfig:
    """Parse config text (or a file path via :func:`load_config`)."""
    cfg = ScenarioConfig()
    sections = {"geometry": cfg.geometry, "csi": cfg.csi,
                "optimizer": cfg.optimizer, "experiment": cfg.experiment}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        location = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{location}: expected 'section.key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key == "noise.sigma_min_dbm":
            try:
                cfg.sigma_min_dbm = float(raw)
            except ValueError as exc:
                raise ConfigError(f"{location}: bad value {raw!r}") from exc
            continue
        if "." not in key:
            raise ConfigError(f"{location}: key {key!r} has no section")
        section, name = key.split(".", 1)
        if section not in sections:
            raise ConfigError(f"{location}: unknown section {section!r}")
        value = _coerce(_SECTIONS[section], name, raw, location)
        setattr(sections[section], name, value)
    _validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def apply_overrides(cfg: ScenarioConfig, overrides):
    """Apply ``section.key=value`` strings on top of a parsed config."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key == "noise.sigma_min_dbm":
            try:
                cfg.sigma_min_dbm = float(raw)
            except ValueError as exc:
                raise ConfigError(f"override: bad value {raw!r}") from exc
            continue
        if "." not in key:
            raise ConfigError(f"override key {key!r} has no section")
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"override: unknown section {section!r}")
        value = _coerce(_SECTIONS[section], name, raw, "override")
        setattr(getattr(cfg, section), name, value)
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig):
    g = cfg.geometry
    if g.n_rrh < 1 or g.ants_per_rrh < 1 or g.n_ue < 1:
        raise ConfigError("geometry counts must be >= 1")
    for name in ("spacing_m", "b_cluster_m"):
        if getattr(g, name) < 0:
            raise ConfigError(f"geometry.{name} must be nonnegative")
    e = cfg.experiment
    if e.sweep not in SWEEP_VARIABLES:
        raise ConfigError(f"experiment.sweep must be one of {SWEEP_VARIABLES}")
    if e.step <= 0 or e.stop < e.start:
        raise ConfigError("experiment range must be non-empty with step > 0")
    if e.n_seeds < 1 or e.n_symbols < 1:
        raise ConfigError("experiment.n_seeds and n_symbols must be >= 1")
    for r in e.receivers:
        if r not in ("bmrc", "bmmse"):
            raise ConfigError(f"unknown receiver {r!r}")
    for d in e.dithering:
        if d not in ("on", "off"):
            raise ConfigError(f"dithering mode must be on/off, got {d!r}")
    if cfg.csi.mode not in ("perfect", "synthetic"):
        raise ConfigError(f"unknown CSI mode {cfg.csi.mode!r}")
    if not 0.0 <= cfg.csi.epsilon < 1.0:
        raise ConfigError("csi.epsilon must lie in [0, 1)")


def sweep_grid(cfg: ScenarioConfig):
    """Inclusive sweep values start, start+step, ..., stop."""
    e = cfg.experiment
    count = int(round((e.stop - e.start) / e.step)) + 1
    return e.start + e.step * np.arange(count)
