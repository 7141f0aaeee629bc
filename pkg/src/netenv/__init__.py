"""netenv: seeded network-defense simulation with a POMDP blue-agent interface.

A small enterprise network is modeled as a graph of hosts and subnets.
Benign (gray) and adversarial (red) traffic is produced by generative
programs -- probabilistic state machines whose executions are weighted
traces.  The defender (blue) observes per-host event counts, acts by
isolating hosts or migrating them between real and honey subnets, and can
be trained with the built-in DQN learner.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    GrayProfile,
    NetworkConfig,
    RewardConfig,
    ScenarioConfig,
    TTPParams,
)
from .environment import CyberDefenseEnv, StepResult, reset, step
from .genprog import GenerativeProgram, ProgramNode, Trace

__all__ = [
    "ConfigError",
    "CyberDefenseEnv",
    "GenerativeProgram",
    "GrayProfile",
    "NetworkConfig",
    "ProgramNode",
    "RewardConfig",
    "ScenarioConfig",
    "StepResult",
    "TTPParams",
    "Trace",
    "reset",
    "step",
]
