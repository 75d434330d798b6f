"""
Run configuration. Every parameter set is a frozen dataclass holding the published defaults; a YAML
file overrides the defaults and command-line flags override the file.
"""
import os
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Mapping
from typing import Optional
from typing import Tuple
from typing import Union

import yaml
from loguru import logger

from humanseek.distill import DistillParams
from humanseek.exceptions import ConfigError
from humanseek.kdmrl import KdmrlParams
from humanseek.perception import SensorModel
from humanseek.planner import PlannerParams
from humanseek.search import SearchConfig

__all__ = [
    "DATA_ENV",
    "data_dir",
    "data_path",
    "Paths",
    "RunConfig",
    "load_config",
    "resolve_config",
]

DATA_ENV = "HUMANSEEK_DATA"


def data_dir() -> Path:
    """Packaged fixtures, unless HUMANSEEK_DATA points elsewhere."""
    return Path(os.environ.get(DATA_ENV, Path(__file__).parent / "data"))


def data_path(*parts: str) -> str:
    return str(data_dir().joinpath(*parts))


@dataclass(frozen=True)
class Paths:
    out: str = "out"
    world: Optional[str] = None
    suite: Optional[str] = None
    map: Optional[str] = None
    embeddings: Optional[str] = None
    sentences: Optional[str] = None
    sentences_g0: Optional[str] = None
    sentences_g1: Optional[str] = None
    captions: Optional[str] = None
    demos: Optional[str] = None
    reward_lfd: Optional[str] = None
    reward_kd: Optional[str] = None
    results: Optional[str] = None
    log: Optional[str] = None
    reward_field: Optional[str] = None

    def with_defaults(self, world: str = "lab.json") -> "Paths":
        """Unset fixture paths point at the packaged data."""
        defaults = dict(
            world=data_path("worlds", world),
            embeddings=data_path("embeddings.txt"),
            sentences_g0=data_path("sentences", "kd_gaze0.txt"),
            sentences_g1=data_path("sentences", "kd_gaze1.txt"),
            demos=data_path("demos", "demos.jsonl"),
        )
        values = asdict(self)
        for key, value in defaults.items():
            if values[key] is None:
                values[key] = value
        return Paths(**values)


_SECTIONS = dict(
    search=SearchConfig,
    sensor=SensorModel,
    kdmrl=KdmrlParams,
    distill=DistillParams,
    planner=PlannerParams,
    paths=Paths,
)


@dataclass(frozen=True)
class RunConfig:
    search: SearchConfig = field(default_factory=SearchConfig)
    sensor: SensorModel = field(default_factory=SensorModel)
    kdmrl: KdmrlParams = field(default_factory=KdmrlParams)
    distill: DistillParams = field(default_factory=DistillParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    paths: Paths = field(default_factory=Paths)
    seed: int = 0
    jobs: int = 1
    methods: Tuple[str, ...] = ("proposed",)
    approach: str = "hybrid"
    format: str = "csv"
    llm_url: Optional[str] = None
    plots: bool = True
    theory: bool = False
    theory_trials: int = 10000

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"Unknown output format '{self.format}' (expected csv or json)")
        if self.jobs == 0:
            raise ConfigError("jobs must be a positive number or negative (all cores)")
        object.__setattr__(self, "methods", tuple(self.methods))

    def to_dict(self) -> Dict[str, Any]:
        out = dict()
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = asdict(value) if f.name in _SECTIONS else value
        out["methods"] = list(self.methods)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        kwargs = dict()
        for key, value in data.items():
            if key in _SECTIONS:
                kwargs[key] = _section(key, value)
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as ex:
            raise ConfigError(f"Invalid configuration: {ex}")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _section(name: str, value: Any):
    section = _SECTIONS[name]
    if value is None:
        return section()
    if not isinstance(value, Mapping):
        raise ConfigError(f"Configuration section '{name}' must be a mapping")
    allowed = {f.name for f in fields(section)}
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"Unknown keys in section '{name}': {sorted(unknown)}")
    try:
        return section(**value)
    except (TypeError, ValueError) as ex:
        raise ConfigError(f"Invalid '{name}' section: {ex}")


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file {path} does not exist")
    try:
        with open(path, "r") as fil:
            data = yaml.safe_load(fil) or dict()
    except yaml.YAMLError as ex:
        raise ConfigError(f"Cannot parse {path}: {ex}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(config_file: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Defaults, then the YAML file, then `overrides`. Override keys are dotted ("search.max_path") or
    top-level ("seed"); None values mean "flag not given" and are skipped.
    """
    data = RunConfig().to_dict()
    if config_file is not None:
        data = _merge(data, load_config(config_file))
        logger.debug(f"Loaded configuration from {config_file}")
    for key, value in (overrides or dict()).items():
        if value is None:
            continue
        *parents, leaf = key.split(".")
        target = data
        for parent in parents:
            target = target.setdefault(parent, dict())
        target[leaf] = value
    return RunConfig.from_dict(data)
