"""Configuration: dataclasses, YAML loading with key diagnostics, and serialization.

A config file has nested sections; every key is optional except
``topology.road_length``. Example::

    topology:
      road_length: 1200.0
      n_rsus: 6
      slot_duration: 0.5
      slots_per_epoch: 10
      compute_rate: 0.1        # Gbit/s, scalar or one value per RSU
      uplink_rate: 0.4
      wired_rate: 1.0
    task:
      input_size: 0.2          # Gbit
      output_size: 0.05
      deadline: 3.0
      e1: 1.0
      e2: 0.5
      weight: 10.0
      gen_period: 32           # slots between tasks of one vehicle
    mobility:
      kind: synthetic          # or: trace (then set `trace: path.csv`)
      arrival_rate: 0.1
      ...
    twin: {window: 10, n_x: 5, n_v: 5, offload_window: 10}
    ddpg: {actor_lr: 0.001, ...}
    engine: {scheme: dt_matching, epochs: 100, seed: 1}
    experiment: {train_epochs: 300, eval_epochs: 100, sweep: none, sweep_values: [], seeds: [1]}
"""

from __future__ import annotations

import copy
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import warnings

import yaml

from .ddpg import DDPGConfig
from .mobility import SyntheticConfig
from .schemes import SchemeConfig
from .topology import Topology, TopologyError, uniform_topology


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key (and line when known)."""


@dataclass
class TopologyConfig:
    road_length: float = 1200.0
    n_rsus: int = 6
    slot_duration: float = 0.5
    slots_per_epoch: int = 10
    compute_rate: Any = 0.1
    uplink_rate: Any = 0.4
    wired_rate: float = 1.0

    def build(self) -> Topology:
        return uniform_topology(self.n_rsus, self.road_length, self.compute_rate, self.uplink_rate,
                                self.wired_rate, self.slot_duration, self.slots_per_epoch)


@dataclass
class TaskConfig:
    input_size: float = 0.2
    output_size: float = 0.05
    deadline: float = 3.0
    e1: float = 1.0
    e2: float = 0.5
    weight: float = 10.0
    gen_period: int = 32


@dataclass
class MobilityConfig(SyntheticConfig):
    kind: str = "synthetic"
    trace: Optional[str] = None


@dataclass
class TwinConfig:
    window: int = 10
    n_x: int = 5
    n_v: int = 5
    offload_window: int = 10
    distance_scale: Tuple[float, float] = (1.0, 1.0)
    q_max_factor: float = 5.0
    initial_line_offset: float = 0.5
    rate_scale: float = 1.0
    count_scale: float = 5.0


@dataclass
class EngineSection:
    scheme: str = "dt_matching"
    epochs: int = 100
    seed: int = 1


@dataclass
class ExperimentConfig:
    train_epochs: int = 300
    eval_epochs: int = 100
    eval_warmup: int = 10
    sweep: str = "none"
    sweep_values: List[float] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: [1])
    schemes: List[str] = field(default_factory=lambda: ["dt_matching", "dt_only", "migrate_50", "no_coop"])
    checkpoint_every: int = 50
    out: str = "out"


@dataclass
class Config:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    twin: TwinConfig = field(default_factory=TwinConfig)
    ddpg: DDPGConfig = field(default_factory=DDPGConfig)
    engine: EngineSection = field(default_factory=EngineSection)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def validate(self) -> "Config":
        try:
            topo = self.topology.build()
            topo.check_deadline(self.task.deadline)
        except (TopologyError, ValueError) as exc:
            raise ConfigError(f"topology: {exc}") from None
        t = self.task
        for key in ("input_size", "output_size", "deadline"):
            if not getattr(t, key) > 0:
                raise ConfigError(f"task.{key} must be positive")
        for key in ("e1", "e2", "weight"):
            if getattr(t, key) < 0:
                raise ConfigError(f"task.{key} must be non-negative")
        if t.gen_period < 1:
            raise ConfigError("task.gen_period must be >= 1")
        if t.output_size > t.input_size:
            warnings.warn("task.output_size exceeds task.input_size; RSU preference tiers assume the opposite")
        cell = min(hi - lo for lo, hi in (r.coverage for r in topo.rsus))
        for key, names in (("engine.scheme", [self.engine.scheme]), ("experiment.schemes", self.experiment.schemes)):
            for name in names:
                try:
                    scheme = SchemeConfig.parse(name)
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}") from None
                if scheme.threshold > cell:
                    raise ConfigError(f"{key}: migrate threshold {scheme.threshold:g} m exceeds the cell length {cell:g} m")
        if self.engine.epochs < 1:
            raise ConfigError("engine.epochs must be >= 1")
        if self.mobility.kind not in ("synthetic", "trace"):
            raise ConfigError("mobility.kind must be 'synthetic' or 'trace'")
        if self.mobility.kind == "trace" and not self.mobility.trace:
            raise ConfigError("mobility.trace is required when mobility.kind is 'trace'")
        if not 0 < self.mobility.v_min < self.mobility.v_max:
            raise ConfigError("mobility.v_min/v_max must satisfy 0 < v_min < v_max")
        tw = self.twin
        if tw.window < 1 or tw.n_x < 1 or tw.n_v < 1 or tw.offload_window < 1:
            raise ConfigError("twin.window, n_x, n_v and offload_window must be >= 1")
        if not 0.0 <= tw.initial_line_offset < 1.0:
            raise ConfigError("twin.initial_line_offset must lie in [0, 1)")
        ex = self.experiment
        if ex.sweep not in ("none", "compute_rate", "E2"):
            raise ConfigError("experiment.sweep must be none, compute_rate or E2")
        if ex.sweep != "none" and not ex.sweep_values:
            raise ConfigError("experiment.sweep_values must be non-empty when sweeping")
        if ex.eval_warmup < 0 or ex.eval_warmup >= ex.eval_epochs:
            raise ConfigError("experiment.eval_warmup must lie in [0, eval_epochs)")
        if not ex.seeds:
            raise ConfigError("experiment.seeds must be non-empty")
        _check_arrival_order(topo, t.input_size)
        return self

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dump())

    def replace(self, **sections) -> "Config":
        new = copy.deepcopy(self)
        for name, values in sections.items():
            sec = getattr(new, name)
            for k, v in values.items():
                if not hasattr(sec, k):
                    raise ConfigError(f"unknown key {name}.{k}")
                setattr(sec, k, v)
        return new


def _check_arrival_order(topo: Topology, input_size: float) -> None:
    """Tasks from one slot must reach any queue before tasks of the next slot."""
    uplink = [input_size / r.uplink_rate for r in topo.rsus]
    wired = [input_size / w for r in topo.rsus for w in r.wired_rates if w != float("inf")]
    spread = max(uplink) + max(wired, default=0.0) - min(uplink)
    if spread > topo.slot_duration:
        raise ConfigError(
            f"offload delays spread over more than one slot ({spread:.3f} s > "
            f"{topo.slot_duration} s); raise wired/uplink rates"
        )


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "topology": TopologyConfig,
    "task": TaskConfig,
    "mobility": MobilityConfig,
    "twin": TwinConfig,
    "ddpg": DDPGConfig,
    "engine": EngineSection,
    "experiment": ExperimentConfig,
}
_REQUIRED = (("topology", "road_length"),)
_PER_RSU_KEYS = {("topology", "compute_rate"), ("topology", "uplink_rate")}
_TUPLE_KEYS = {("twin", "distance_scale"), ("ddpg", "actor_hidden"), ("ddpg", "critic_hidden")}


class _LineLoader(yaml.SafeLoader):
    pass


def _mapping_with_lines(loader, node):
    mapping = loader.construct_mapping(node, deep=True)
    lines = {}
    for key_node, _ in node.value:
        lines[loader.construct_object(key_node)] = key_node.start_mark.line + 1
    return _LinedDict(mapping, lines)


class _LinedDict(dict):
    def __init__(self, data, lines):
        super().__init__(data)
        self.lines = lines


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _mapping_with_lines)


def parse_config(text: str, source: str = "<config>") -> Config:
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    for section, key in _REQUIRED:
        sec = raw.get(section)
        if not isinstance(sec, dict) or key not in sec:
            raise ConfigError(f"{source}: missing required key '{section}.{key}'")
    cfg = Config()
    for name, values in raw.items():
        where = f"{source}:{_line(raw, name)}"
        if name not in _SECTIONS:
            raise ConfigError(f"{where}: unknown section '{name}'")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"{where}: section '{name}' must be a mapping")
        sec = getattr(cfg, name)
        fields = {f.name: f for f in dataclasses.fields(sec)}
        for key, value in values.items():
            kwhere = f"{source}:{_line(values, key)}"
            if key not in fields:
                raise ConfigError(f"{kwhere}: unknown key '{name}.{key}'")
            try:
                value = _coerce(getattr(sec, key), value, (name, key))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{kwhere}: bad value for '{name}.{key}': {exc}") from None
            setattr(sec, key, value)
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _line(mapping, key):
    return getattr(mapping, "lines", {}).get(key, "?")


def _coerce(default, value, key):
    if key in _PER_RSU_KEYS and isinstance(value, list):
        return [float(v) for v in value]
    if key in _TUPLE_KEYS:
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError("expected true/false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise TypeError("expected a list")
        return list(value)
    if isinstance(value, dict):
        return dict(value)
    return value


def load_config(path) -> Config:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def default_config() -> Config:
    return Config().validate()


def output_dir(cli_value: Optional[str], cfg: Config) -> str:
    """``VECDT_OUT`` in the environment overrides both the flag and the config."""
    env = os.environ.get("VECDT_OUT")
    if env:
        return env
    return cli_value or cfg.experiment.out
