"""Toolkit configuration: YAML file, EVB_* environment and CLI overrides.

Precedence: built-in defaults < config file < environment < CLI flags.
Every key is section.name; unknown keys and uncoercible values raise
ConfigError naming the offending key (YAML syntax errors carry the parser's
line/column). load -> dump -> load is the identity.
"""

from __future__ import annotations

import hashlib
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .curation import CurationConfig
from .recon import IcpParams

ENV_PREFIX = "EVB_"


class ConfigError(ValueError):
    pass


@dataclass
class PoseEvalConfig:
    thresholds: list[float] = field(default_factory=lambda: [15.0, 30.0])
    auc_max: int = 30
    strict: bool = True
    workers: int = 1


@dataclass
class ReconConfig:
    max_iters: int = 50
    rmse_tol: float = 1e-6
    gate_multiplier: float = 10.0
    with_scale: bool = True
    subsample_cap: int = 1_000_000
    seed: int = 0

    def icp_params(self) -> IcpParams:
        return IcpParams(
            max_iters=self.max_iters,
            rmse_tol=self.rmse_tol,
            gate_multiplier=self.gate_multiplier,
            with_scale=self.with_scale,
        )


@dataclass
class DepthConfig:
    apply_median_scaling: bool = True


@dataclass
class SamplerConfig:
    min_shared: int = 30
    min_trans_m: float = 5.0
    n_images: int = 10
    w_conn: float = 0.8
    w_div: float = 0.2
    seed: int = 0


@dataclass
class LayersConfig:
    delta: int = 2


@dataclass
class ServiceConfig:
    max_points: int = 100_000
    downsample_seed: int = 0


@dataclass
class ToolConfig:
    curation: CurationConfig = field(default_factory=CurationConfig)
    pose: PoseEvalConfig = field(default_factory=PoseEvalConfig)
    recon: ReconConfig = field(default_factory=ReconConfig)
    depth: DepthConfig = field(default_factory=DepthConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    layers: LayersConfig = field(default_factory=LayersConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


def _coerce(raw, target_type, key: str):
    if target_type is bool:
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "1", "yes"):
            return True
        if isinstance(raw, str) and raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if target_type is int:
        if isinstance(raw, bool):
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}")
        try:
            out = int(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}") from None
        if isinstance(raw, (str, int)) or float(raw).is_integer():
            return out
        raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}")
    if target_type is float:
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r}: expected a number, got {raw!r}") from None
    if target_type is str:
        return str(raw)
    if target_type is list:
        if isinstance(raw, str):
            return [float(x) for x in raw.split(",") if x.strip()]
        if isinstance(raw, (list, tuple)):
            return [float(x) for x in raw]
        raise ConfigError(f"config key {key!r}: expected a list, got {raw!r}")
    raise ConfigError(f"config key {key!r}: unsupported type {target_type}")


_FIELD_TYPES_CACHE: dict[type, dict[str, type]] = {}


def _field_types(cls) -> dict[str, type]:
    if cls not in _FIELD_TYPES_CACHE:
        out = {}
        for f in fields(cls):
            default = f.default if f.default_factory is MISSING else f.default_factory()
            out[f.name] = list if isinstance(default, list) else type(default)
        _FIELD_TYPES_CACHE[cls] = out
    return _FIELD_TYPES_CACHE[cls]


def set_key(cfg: ToolConfig, dotted: str, value) -> None:
    """Assign one `section.key` (coerced to the field's type)."""
    parts = dotted.split(".")
    if len(parts) != 2:
        raise ConfigError(f"config key {dotted!r}: expected section.name")
    section_name, key = parts
    if not hasattr(cfg, section_name):
        raise ConfigError(f"unknown config section {section_name!r}")
    section = getattr(cfg, section_name)
    types = _field_types(type(section))
    if key not in types:
        raise ConfigError(f"unknown config key {dotted!r}")
    setattr(section, key, _coerce(value, types[key], dotted))


def flat_keys(cfg: ToolConfig) -> dict[str, object]:
    out = {}
    for section_name, section_dict in asdict(cfg).items():
        for key, value in section_dict.items():
            out[f"{section_name}.{key}"] = value
    return out


def load_config(path: str | Path | None = None) -> ToolConfig:
    """Defaults, then the YAML file's section.key values when given."""
    cfg = ToolConfig()
    if path is None:
        return cfg
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    if data is None:
        return cfg
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping of sections")
    for section_name, section in data.items():
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: section {section_name!r} must be a mapping")
        for key, value in section.items():
            set_key(cfg, f"{section_name}.{key}", value)
    return cfg


def apply_env_overrides(cfg: ToolConfig, environ: dict[str, str]) -> None:
    """EVB_SECTION_KEY=value overrides (e.g. EVB_CURATION_K=10)."""
    known = {k.replace(".", "_").upper(): k for k in flat_keys(cfg)}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        suffix = name[len(ENV_PREFIX) :]
        if suffix not in known:
            raise ConfigError(f"environment variable {name} matches no config key")
        set_key(cfg, known[suffix], value)


def dump_config(cfg: ToolConfig) -> str:
    return yaml.safe_dump(asdict(cfg), sort_keys=True)


def config_hash(cfg: ToolConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()
