"""Distributions over network environments, and curriculum sequencing.

An EnvironmentDistribution declares ranges for scenario parameters;
sampling it (deterministically in a seed) yields a concrete
ScenarioConfig.  Discrete supports are drawn through generative-program
choice points; interval parameters are drawn uniformly from the same
seeded stream.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import numpy as np

from .config import (
    RED_VARIANTS,
    ConfigError,
    GrayProfile,
    NetworkConfig,
    RewardConfig,
    ScenarioConfig,
    TTPParams,
)
from .genprog import GenerativeProgram, ProgramNode, sample_trace

_GRAY_RATE_FIELDS = tuple(f.name for f in fields(GrayProfile))
_TTP_PROB_FIELDS = ("p_aggr", "p_lateral", "p_find", "deception_rate")


@dataclass(frozen=True)
class EnvironmentDistribution:
    """Independent per-parameter distribution over ScenarioConfigs.

    ``host_count`` is a discrete support with optional weights;
    ``gray_ranges`` / ``ttp_ranges`` hold [lo, hi] intervals for the
    corresponding rate fields (missing fields keep their defaults);
    ``variant_mix`` weights the faithful/deceptive red variants.
    """

    host_count: tuple[int, ...] = (10,)
    host_weights: tuple[float, ...] | None = None
    gray_ranges: dict = field(default_factory=dict)
    variant_mix: dict = field(
        default_factory=lambda: {"faithful": 1.0, "deceptive": 0.0}
    )
    ttp_ranges: dict = field(default_factory=dict)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    horizon: int = 100

    def validate(self) -> None:
        if not self.host_count or min(self.host_count) < 2:
            raise ConfigError("host_count support must be non-empty with values >= 2")
        if self.host_weights is not None:
            if len(self.host_weights) != len(self.host_count):
                raise ConfigError("host_weights length must match host_count")
            if any(w < 0 for w in self.host_weights) or sum(self.host_weights) <= 0:
                raise ConfigError("host_weights must be non-negative, not all zero")
        for name, rng_ in {**self.gray_ranges, **self.ttp_ranges}.items():
            lo, hi = rng_
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigError(f"range for {name} must satisfy 0 <= lo <= hi <= 1")
        for name in self.gray_ranges:
            if name not in _GRAY_RATE_FIELDS:
                raise ConfigError(f"unknown gray rate {name!r}")
        for name in self.ttp_ranges:
            if name not in _TTP_PROB_FIELDS:
                raise ConfigError(f"unknown ttp probability {name!r}")
        unknown = set(self.variant_mix) - set(RED_VARIANTS)
        if unknown:
            raise ConfigError(f"unknown red variants {sorted(unknown)}")
        total = sum(self.variant_mix.values())
        if abs(total - 1.0) > 1e-9 or any(v < 0 for v in self.variant_mix.values()):
            raise ConfigError("variant_mix must be a probability vector summing to 1")
        self.reward.validate()
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "EnvironmentDistribution":
        if not isinstance(data, dict):
            raise ConfigError("distribution must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys in distribution: {sorted(unknown)}")
        kwargs = dict(data)
        if "host_count" in kwargs:
            kwargs["host_count"] = tuple(kwargs["host_count"])
        if kwargs.get("host_weights") is not None:
            kwargs["host_weights"] = tuple(kwargs["host_weights"])
        if "network" in kwargs:
            kwargs["network"] = NetworkConfig.from_dict(kwargs["network"])
        if "reward" in kwargs:
            kwargs["reward"] = RewardConfig.from_dict(kwargs["reward"])
        dist = cls(**kwargs)
        dist.validate()
        return dist

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _discrete_program(dist: EnvironmentDistribution) -> GenerativeProgram:
    """Generative program over the distribution's discrete choice points:
    one choice for the host count, one for the red variant."""

    hosts = dist.host_count
    weights = dist.host_weights or tuple(1.0 for _ in hosts)
    total = sum(weights)
    nodes: dict[str, ProgramNode] = {"halt": ProgramNode(id="halt", kind="halt")}
    host_branches = []
    for n in hosts:
        nid = f"e_n{n}"
        nodes[nid] = ProgramNode(id=nid, kind="emit", label=f"n={n}", next="c_variant")
        host_branches.append(nid)
    nodes["c_hosts"] = ProgramNode(
        id="c_hosts", kind="choice", choice_id="host_count",
        branches=tuple(host_branches),
    )
    variant_branches = []
    for variant in RED_VARIANTS:
        nid = f"e_{variant}"
        nodes[nid] = ProgramNode(
            id=nid, kind="emit", label=f"variant={variant}", next="halt"
        )
        variant_branches.append(nid)
    nodes["c_variant"] = ProgramNode(
        id="c_variant", kind="choice", choice_id="variant",
        branches=tuple(variant_branches),
    )
    params = {
        "host_count": tuple(w / total for w in weights),
        "variant": tuple(dist.variant_mix.get(v, 0.0) for v in RED_VARIANTS),
    }
    return GenerativeProgram(nodes=nodes, entry="c_hosts", params=params)


def sample_env(dist: EnvironmentDistribution, seed) -> ScenarioConfig:
    """Draw one concrete ScenarioConfig; deterministic in the seed."""

    dist.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    trace = sample_trace(_discrete_program(dist), rng, max_steps=16)
    drawn = dict(label.split("=", 1) for label in trace.labels)
    n_hosts = int(drawn["n"])
    variant = drawn["variant"]

    gray_kwargs = {}
    for name in _GRAY_RATE_FIELDS:  # fixed order keeps the draw deterministic
        if name in dist.gray_ranges:
            lo, hi = dist.gray_ranges[name]
            gray_kwargs[name] = float(rng.uniform(lo, hi))
    ttp_kwargs = {}
    for name in _TTP_PROB_FIELDS:
        if name in dist.ttp_ranges:
            lo, hi = dist.ttp_ranges[name]
            ttp_kwargs[name] = float(rng.uniform(lo, hi))

    return ScenarioConfig(
        network=dataclasses.replace(dist.network, n_hosts=n_hosts),
        gray=dataclasses.replace(GrayProfile(), **gray_kwargs),
        red_variant=variant,
        ttp=dataclasses.replace(TTPParams(), **ttp_kwargs),
        reward=dist.reward,
        horizon=dist.horizon,
    )


@dataclass(frozen=True)
class CurriculumStage:
    distribution: EnvironmentDistribution
    threshold: float = 0.0
    window: int = 100

    @classmethod
    def from_dict(cls, data: dict) -> "CurriculumStage":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys in curriculum stage: {sorted(unknown)}")
        kwargs = dict(data)
        kwargs["distribution"] = EnvironmentDistribution.from_dict(
            kwargs.get("distribution", {})
        )
        stage = cls(**kwargs)
        if not np.isfinite(stage.threshold) or stage.window < 1:
            raise ConfigError("curriculum stage needs a finite threshold, window >= 1")
        return stage


@dataclass(frozen=True)
class Curriculum:
    stages: tuple[CurriculumStage, ...]

    def validate(self) -> None:
        if not self.stages:
            raise ConfigError("curriculum must have at least one stage")

    @classmethod
    def from_list(cls, data: list) -> "Curriculum":
        cur = cls(stages=tuple(CurriculumStage.from_dict(d) for d in data))
        cur.validate()
        return cur


def advance(curriculum: Curriculum, history: list[float]) -> int:
    """Highest stage (0-based) whose prior promotion criteria are all met.

    A stage's criterion is met when the trailing-window mean of episode
    returns reaches its threshold; stages are never skipped, and the index
    is monotone in any pointwise improvement of the history.
    """

    curriculum.validate()
    stage = 0
    while stage < len(curriculum.stages) - 1:
        crit = curriculum.stages[stage]
        if len(history) < crit.window:
            break
        trailing = history[-crit.window:]
        if sum(trailing) / crit.window < crit.threshold:
            break
        stage += 1
    return stage
