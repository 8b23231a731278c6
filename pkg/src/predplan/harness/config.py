"""The run configuration file: one YAML document, every tunable in one place.

Unknown keys are rejected so that typos fail loudly instead of silently
falling back to defaults. ``dump_config`` writes the fully resolved
configuration that accompanies every run's outputs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..agentnet import NetConfig
from ..errors import ConfigError
from ..ppotrain import ObsConfig, PPOConfig, RunConfig
from ..simworld import EpisodeConfig
from ..simworld.traffic import BEHAVIOR_TIERS
from ..simworld.town import PRESETS as TOWN_PRESETS
from ..stgraph import PredictorConfig
from .metrics import DEFAULT_PENALTIES

# (background vehicles, pedestrians); the dense tier doubles the regular one
DENSITY_TIERS = {"empty": (0, 0), "regular": (12, 8), "dense": (24, 16)}


@dataclass
class BenchmarkPreset:
    name: str
    town: str = "urban"
    density: str = "regular"
    behavior: str = "normal"
    obs_noise: float = 0.0
    episodes: int = 10
    seeds: tuple = (0, 1, 2, 3, 4)
    max_steps: int = 1500
    town_seed: int = 0

    def validate(self) -> "BenchmarkPreset":
        if self.episodes < 1:
            raise ConfigError(f"preset {self.name!r}: episode count must be >= 1")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"preset {self.name!r}: seeds must be a nonempty list of distinct values")
        if self.density not in DENSITY_TIERS:
            raise ConfigError(f"preset {self.name!r}: unknown density {self.density!r}; expected one of {sorted(DENSITY_TIERS)}")
        if self.behavior not in BEHAVIOR_TIERS:
            raise ConfigError(f"preset {self.name!r}: unknown behavior {self.behavior!r}")
        if self.town not in TOWN_PRESETS:
            raise ConfigError(f"preset {self.name!r}: unknown town {self.town!r}")
        if self.obs_noise < 0:
            raise ConfigError(f"preset {self.name!r}: observation noise must be >= 0")
        return self

    def episode_config(self, seed: int) -> EpisodeConfig:
        vehicles, pedestrians = DENSITY_TIERS[self.density]
        return EpisodeConfig(
            seed=int(seed),
            town=self.town,
            town_seed=self.town_seed,
            vehicles=vehicles,
            pedestrians=pedestrians,
            obs_noise=self.obs_noise,
            behavior=self.behavior,
            max_steps=self.max_steps,
        ).validate()


BUILTIN_PRESETS = {
    p.name: p
    for p in (
        BenchmarkPreset("lane-keeping", town="straight", density="empty", episodes=50, seeds=(0, 1, 2), max_steps=400),
        BenchmarkPreset("intersection", town="intersection", density="regular", episodes=100),
        BenchmarkPreset("urban-empty", town="urban", density="empty"),
        BenchmarkPreset("urban-regular", town="urban", density="regular"),
        BenchmarkPreset("urban-dense", town="urban", density="dense"),
        BenchmarkPreset("highway-regular", town="highway", density="regular"),
        # non-stationarity analogs of unseen weather: perception noise and driver aggressiveness
        BenchmarkPreset("shift-noise", town="urban", density="regular", obs_noise=0.5),
        BenchmarkPreset("shift-aggressive", town="urban", density="dense", behavior="aggressive"),
    )
}


@dataclass
class TrainingBudget:
    total_steps: int = 200_000
    eval_rounds: int = 10
    eval_episodes: int = 10


@dataclass
class PredictorTraining:
    steps: int = 3000
    eval_every: int = 500
    val_fraction: float = 0.2
    synthetic_scenes: int = 2000
    window_stride: int = 2


@dataclass
class CollectConfig:
    vehicles: int = 12
    pedestrians: int = 8
    max_steps: int = 1500
    sensor_range: float = 50.0


@dataclass
class Config:
    seed: int = 0
    episode: EpisodeConfig = field(default_factory=lambda: EpisodeConfig(town="intersection", vehicles=12, pedestrians=8))
    observation: ObsConfig = field(default_factory=ObsConfig)
    network: NetConfig = field(default_factory=NetConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    training: TrainingBudget = field(default_factory=TrainingBudget)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    predictor_training: PredictorTraining = field(default_factory=PredictorTraining)
    collect: CollectConfig = field(default_factory=CollectConfig)
    penalties: dict = field(default_factory=lambda: dict(DEFAULT_PENALTIES))
    presets: dict = field(default_factory=lambda: dict(BUILTIN_PRESETS))

    def run_config(self, use_prediction: bool = True) -> RunConfig:
        obs = dataclasses.replace(self.observation, use_prediction=use_prediction)
        return RunConfig(
            episode=self.episode,
            net=self.network,
            obs=obs,
            ppo=self.ppo,
            total_steps=self.training.total_steps,
            eval_rounds=self.training.eval_rounds,
            eval_episodes=self.training.eval_episodes,
            seed=self.seed,
        )

    def preset(self, name: str) -> BenchmarkPreset:
        if name not in self.presets:
            raise ConfigError(f"unknown benchmark preset {name!r}; known: {sorted(self.presets)}")
        return self.presets[name]

    def validate(self) -> "Config":
        if self.network.raster != self.observation.raster:
            raise ConfigError(f"network.raster {self.network.raster} != observation.raster {self.observation.raster}")
        self.episode.validate()
        self.ppo.validate()
        for name, value in self.penalties.items():
            if name not in DEFAULT_PENALTIES:
                raise ConfigError(f"unknown penalty key {name!r}; expected {sorted(DEFAULT_PENALTIES)}")
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigError(f"penalty multiplier {name} must lie in [0, 1], got {value}")
        for p in self.presets.values():
            p.validate()
        if not 0.0 < self.predictor_training.val_fraction < 1.0:
            raise ConfigError("predictor_training.val_fraction must lie in (0, 1)")
        return self


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; expected a subset of {sorted(known)}")
    kw = {}
    for k, v in data.items():
        default = cls().__dict__[k] if _has_defaults(cls) else None
        kw[k] = tuple(v) if isinstance(default, tuple) and isinstance(v, list) else v
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


def _has_defaults(cls) -> bool:
    return all(f.default is not dataclasses.MISSING or f.default_factory is not dataclasses.MISSING for f in dataclasses.fields(cls))


_SECTIONS = {
    "episode": EpisodeConfig,
    "observation": ObsConfig,
    "network": NetConfig,
    "ppo": PPOConfig,
    "training": TrainingBudget,
    "predictor": PredictorConfig,
    "predictor_training": PredictorTraining,
    "collect": CollectConfig,
}


def config_from_dict(data: dict | None) -> Config:
    data = dict(data or {})
    known = set(_SECTIONS) | {"seed", "penalties", "presets"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}; expected a subset of {sorted(known)}")
    cfg = Config()
    if "seed" in data:
        cfg.seed = int(data["seed"])
    for name, cls in _SECTIONS.items():
        if name in data:
            setattr(cfg, name, _build(cls, data[name], name))
    if "network" not in data or "raster" not in (data.get("network") or {}):
        cfg.network = dataclasses.replace(cfg.network, raster=cfg.observation.raster)
    if "penalties" in data:
        pen = dict(DEFAULT_PENALTIES)
        pen.update(data["penalties"] or {})
        cfg.penalties = pen
    if "presets" in data:
        presets = dict(BUILTIN_PRESETS)
        for name, body in (data["presets"] or {}).items():
            body = dict(body or {})
            body.pop("name", None)
            presets[name] = _build(BenchmarkPreset, {"name": name, **body}, f"presets.{name}")
        cfg.presets = presets
    return cfg.validate()


def load_config(path) -> Config:
    if path is None:
        return Config().validate()
    try:
        text = Path(path).read_text()
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    return config_from_dict(data)


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_to_dict(cfg: Config) -> dict:
    out = {"seed": cfg.seed}
    for name in _SECTIONS:
        out[name] = _plain(getattr(cfg, name))
    out["penalties"] = dict(cfg.penalties)
    out["presets"] = {name: {k: v for k, v in _plain(p).items() if k != "name"} for name, p in cfg.presets.items()}
    return out


def dump_config(cfg: Config, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
