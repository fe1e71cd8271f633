"""Pipeline configuration loaded from a single TOML file.

Every key is optional; missing keys fall back to the defaults below. See
``configs/default.toml`` for the full key list.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dqn import TrainConfig
from .errors import ConfigError
from .exploration import DEFAULT_FEATURES, FILTERS
from .gng import GngParams
from .stairworld import OBS_NAMES, SimConfig, StairGeometry


@dataclass(frozen=True)
class ExplorationConfig:
    n_samples: int = 2000
    seed: int = 0
    feature_subset: tuple[str, ...] = DEFAULT_FEATURES
    overshoot_filter: str = "overshoot"

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("exploration.n_samples must be >= 1")
        if not self.feature_subset or any(f not in OBS_NAMES for f in self.feature_subset):
            raise ConfigError(f"exploration.feature_subset must be a non-empty subset of {OBS_NAMES}")
        if self.overshoot_filter not in FILTERS:
            raise ConfigError(f"exploration.overshoot_filter must be one of {sorted(FILTERS)}")


@dataclass(frozen=True)
class ClusteringConfig:
    max_clusters: int = 10
    seed: int = 0
    bin_rule: str = "64"
    standardize: bool = False
    noise_scale: float = 5.0

    def __post_init__(self):
        if self.max_clusters < 2:
            raise ConfigError("clustering.max_clusters must be >= 2")


@dataclass(frozen=True)
class PrototypeConfig:
    seed: int = 0
    fixed_per_class: int = 5
    # 0 means "match the effect-based prototype count"
    random_count: int = 0
    uniform_rows: int = 0
    uniform_cols: int = 0
    max_per_class: int = 0
    # move each prototype onto its nearest member motion of the class
    snap_to_members: bool = True
    gng: GngParams = field(default_factory=GngParams)


@dataclass(frozen=True)
class RLConfig:
    num_steps: int = 15
    exploration_offset: int = 2000
    train: TrainConfig = field(default_factory=TrainConfig)


@dataclass(frozen=True)
class PipelineConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    prototypes: PrototypeConfig = field(default_factory=PrototypeConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    out: str = "out"

    @property
    def rl_sim(self) -> SimConfig:
        return self.sim.with_steps(self.rl.num_steps)


def _build(cls, data: dict, section: str, nested: dict | None = None):
    nested = nested or {}
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if k in nested:
            kwargs[k] = nested[k](v)
        elif isinstance(v, list):
            kwargs[k] = tuple(v)
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def from_dict(data: dict) -> PipelineConfig:
    data = dict(data)
    sim = _build(SimConfig, data.pop("sim", {}), "sim",
                 {"geometry": lambda d: _build(StairGeometry, d, "sim.geometry")})
    exploration = _build(ExplorationConfig, data.pop("exploration", {}), "exploration")
    clustering = _build(ClusteringConfig, data.pop("clustering", {}), "clustering")
    prototypes = _build(PrototypeConfig, data.pop("prototypes", {}), "prototypes",
                        {"gng": lambda d: _build(GngParams, d, "prototypes.gng")})
    rl = _build(RLConfig, data.pop("rl", {}), "rl",
                {"train": lambda d: _build(TrainConfig, d, "rl.train")})
    paths = data.pop("paths", {})
    if data:
        raise ConfigError(f"unknown config sections: {sorted(data)}")
    try:
        out = paths.get("out", "out")
        return PipelineConfig(sim, exploration, clustering, prototypes, rl, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if v is None:
        raise ValueError("None has no TOML form")
    return repr(v)


def _section(name: str, d: dict) -> list[str]:
    lines = [f"[{name}]"]
    subs = []
    for k, v in d.items():
        if isinstance(v, dict):
            subs.append((f"{name}.{k}", v))
        elif v is not None:
            lines.append(f"{k} = {_toml_value(v)}")
    out = lines + [""]
    for sub_name, sub in subs:
        out += _section(sub_name, sub)
    return out


def dumps_toml(cfg: PipelineConfig) -> str:
    """Serialise a config in the layout :func:`load_config` reads."""
    lines: list[str] = []
    for name in ("sim", "exploration", "clustering", "prototypes", "rl"):
        lines += _section(name, asdict(getattr(cfg, name)))
    lines += _section("paths", {"out": cfg.out})
    return "\n".join(lines)


def with_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Override every stage seed (``--seed`` on the command line)."""
    return replace(
        cfg,
        exploration=replace(cfg.exploration, seed=seed),
        clustering=replace(cfg.clustering, seed=seed),
        prototypes=replace(cfg.prototypes, seed=seed),
    )
