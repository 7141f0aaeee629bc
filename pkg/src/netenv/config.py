"""Scenario configuration dataclasses shared across modules.

Configs are plain frozen dataclasses with strict ``from_dict`` parsers:
unknown keys are rejected so a typo in a config file fails loudly instead
of silently running with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

SERVICE_TAGS = ("scp", "http", "amq", "ssh")


class ConfigError(ValueError):
    """Raised for invalid or malformed configuration values."""


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got {value!r}")


def _from_dict(cls, data: dict, context: str):
    """Strict dataclass constructor: rejects unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{context} must be a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class GrayProfile:
    """Per-host per-step Bernoulli rates for benign events and failures."""

    p_http: float = 0.3
    p_amq: float = 0.2
    p_ssh: float = 0.2
    p_scp: float = 0.1
    p_rest_fail: float = 0.05
    p_amqp_fail: float = 0.05
    p_ssh_fail: float = 0.05
    p_scp_fail: float = 0.05

    def validate(self) -> None:
        for f in fields(self):
            _check_prob(f"gray.{f.name}", getattr(self, f.name))

    @classmethod
    def from_dict(cls, data: dict) -> "GrayProfile":
        profile = _from_dict(cls, data, "gray profile")
        profile.validate()
        return profile


@dataclass(frozen=True)
class TTPParams:
    """Probabilities and thresholds of the red exfiltration chain."""

    p_aggr: float = 0.5
    p_lateral: float = 0.7
    p_find: float = 0.8
    k_discovery: int = 3
    deception_rate: float = 0.5

    def validate(self) -> None:
        for name in ("p_aggr", "p_lateral", "p_find", "deception_rate"):
            _check_prob(f"ttp.{name}", getattr(self, name))
        if self.k_discovery < 1:
            raise ConfigError(f"ttp.k_discovery must be >= 1, got {self.k_discovery}")

    @classmethod
    def from_dict(cls, data: dict) -> "TTPParams":
        params = _from_dict(cls, data, "ttp params")
        params.validate()
        return params


@dataclass(frozen=True)
class RewardConfig:
    """Reward components for the blue agent.

    The defaults encode the required preference ordering: trapping the
    attacker in a honey network beats isolating it, and disrupting benign
    hosts is penalized.
    """

    r_trap_fake_exfil: float = 1.0
    r_real_exfil: float = -1.0
    c_isolate_benign: float = -0.1
    c_migrate_benign: float = -0.05
    c_action: float = -0.01
    r_isolate_red: float = 0.5

    def validate(self) -> None:
        if not self.r_trap_fake_exfil > self.r_isolate_red > 0:
            raise ConfigError(
                "require r_trap_fake_exfil > r_isolate_red > 0, got "
                f"{self.r_trap_fake_exfil} and {self.r_isolate_red}"
            )
        for name in ("c_isolate_benign", "c_migrate_benign", "c_action"):
            if getattr(self, name) > 0:
                raise ConfigError(f"reward.{name} must be <= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "RewardConfig":
        cfg = _from_dict(cls, data, "reward config")
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class NetworkConfig:
    """Static network layout parameters."""

    n_hosts: int = 10
    service_rates: dict = field(
        default_factory=lambda: {tag: 0.5 for tag in SERVICE_TAGS}
    )
    decoy_count: int = 2
    jewel_placement: int | str = "uniform"

    def validate(self) -> None:
        if self.n_hosts < 2:
            raise ConfigError(f"network.n_hosts must be >= 2, got {self.n_hosts}")
        if not self.service_rates:
            raise ConfigError("network.service_rates must not be empty")
        for tag, rate in self.service_rates.items():
            if tag not in SERVICE_TAGS:
                raise ConfigError(f"unknown service tag {tag!r}")
            _check_prob(f"network.service_rates[{tag}]", rate)
        if self.decoy_count < 1:
            raise ConfigError("network.decoy_count must be >= 1")
        if isinstance(self.jewel_placement, str):
            if self.jewel_placement != "uniform":
                raise ConfigError(
                    f"jewel_placement must be 'uniform' or a host index, "
                    f"got {self.jewel_placement!r}"
                )
        elif not 0 <= self.jewel_placement < self.n_hosts:
            raise ConfigError(
                f"jewel_placement index {self.jewel_placement} out of range"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        cfg = _from_dict(cls, data, "network config")
        cfg.validate()
        return cfg


RED_VARIANTS = ("faithful", "deceptive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one concrete environment instance."""

    network: NetworkConfig = field(default_factory=NetworkConfig)
    gray: GrayProfile = field(default_factory=GrayProfile)
    red_variant: str = "faithful"
    ttp: TTPParams = field(default_factory=TTPParams)
    reward: RewardConfig = field(default_factory=RewardConfig)
    horizon: int = 100

    def validate(self) -> None:
        self.network.validate()
        self.gray.validate()
        self.ttp.validate()
        self.reward.validate()
        if self.red_variant not in RED_VARIANTS:
            raise ConfigError(f"red_variant must be one of {RED_VARIANTS}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys in scenario: {sorted(unknown)}")
        kwargs: dict = {}
        if "network" in data:
            kwargs["network"] = NetworkConfig.from_dict(data["network"])
        if "gray" in data:
            kwargs["gray"] = GrayProfile.from_dict(data["gray"])
        if "ttp" in data:
            kwargs["ttp"] = TTPParams.from_dict(data["ttp"])
        if "reward" in data:
            kwargs["reward"] = RewardConfig.from_dict(data["reward"])
        for key in ("red_variant", "horizon"):
            if key in data:
                kwargs[key] = data[key]
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
