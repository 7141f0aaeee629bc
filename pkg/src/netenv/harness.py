"""Experiment orchestration: config files, train/eval/sample subcommands.

Config files are JSON documents with up to four top-level sections:

    scenario      one concrete environment (point mass)
    distribution  an EnvironmentDistribution to sample environments from
    curriculum    list of {distribution, threshold, window} stages
    train         TrainConfig fields

Exactly one of scenario/distribution/curriculum drives training and
evaluation.  Exit codes: 0 ok, 2 usage/config error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, envdist, learner
from .config import ConfigError, ScenarioConfig
from .envdist import Curriculum, EnvironmentDistribution
from .environment import CyberDefenseEnv
from .learner import OBS_SCALE, QNetwork, TrainConfig

log = logging.getLogger("netenv")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

CURVE_HEADER = ["episode", "return", "length", "cause"]
EVAL_HEADER = ["episode", "seed", "return", "length", "cause", "variant"]

_TOP_LEVEL_KEYS = {"scenario", "distribution", "curriculum", "train"}


def _setup_logging() -> None:
    level = os.environ.get("NETENV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def load_config_file(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a JSON object")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return data


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply repeatable KEY=VAL overrides.

    Keys are dotted paths into the raw config ('train.learning_rate');
    bare keys are applied to the train section.  Values parse as JSON
    literals, falling back to strings.
    """

    data = json.loads(json.dumps(data))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like KEY=VAL")
        key, raw_value = item.split("=", 1)
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        path = key.split(".") if "." in key else ["train", key]
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        node[path[-1]] = value
    return data


def _config_hash(data: dict) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_env_factory(data: dict):
    """Return (factory, description).  The factory signature matches
    learner.train: factory(episode_index, episode_seed, history) -> env."""

    sources = [k for k in ("scenario", "distribution", "curriculum") if k in data]
    if len(sources) != 1:
        raise ConfigError(
            "config must define exactly one of scenario/distribution/curriculum, "
            f"found {sources or 'none'}"
        )
    source = sources[0]
    if source == "scenario":
        scenario = ScenarioConfig.from_dict(data["scenario"])

        def factory(index: int, seed: int, history: list[float]) -> CyberDefenseEnv:
            return CyberDefenseEnv(scenario, seed)

    elif source == "distribution":
        dist = EnvironmentDistribution.from_dict(data["distribution"])

        def factory(index: int, seed: int, history: list[float]) -> CyberDefenseEnv:
            ss = np.random.SeedSequence(seed)
            sample_ss, env_ss = ss.spawn(2)
            config = envdist.sample_env(dist, np.random.default_rng(sample_ss))
            return CyberDefenseEnv(config, int(env_ss.generate_state(1)[0]))

    else:
        curriculum = Curriculum.from_list(data["curriculum"])

        def factory(index: int, seed: int, history: list[float]) -> CyberDefenseEnv:
            stage = envdist.advance(curriculum, history)
            dist = curriculum.stages[stage].distribution
            ss = np.random.SeedSequence(seed)
            sample_ss, env_ss = ss.spawn(2)
            config = envdist.sample_env(dist, np.random.default_rng(sample_ss))
            env = CyberDefenseEnv(config, int(env_ss.generate_state(1)[0]))
            env.curriculum_stage = stage
            return env

    return factory, source


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_train(args) -> int:
    try:
        data = apply_overrides(load_config_file(args.config), args.override)
        factory, source = build_env_factory(data)
        train_cfg = TrainConfig.from_dict(data.get("train", {}))
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("training for %d steps on %s config", train_cfg.total_steps, source)
    try:
        result = learner.train(factory, train_cfg, args.seed)
    except learner.DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    _write_csv(
        out / "curve.csv",
        CURVE_HEADER,
        [[r.episode, repr(r.ret), r.length, r.cause] for r in result.episodes],
    )
    result.network.save(out / "weights.bin")
    run_meta = {
        "command": "train",
        "config_path": str(args.config),
        "config_hash": _config_hash(data),
        "overrides": list(args.override),
        "seed": args.seed,
        "code_version": __version__,
        "episodes": len(result.episodes),
        "total_steps": train_cfg.total_steps,
        "train_config": dataclasses.asdict(train_cfg),
    }
    (out / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True) + "\n")
    if result.episodes:
        tail = [r.ret for r in result.episodes[-100:]]
        print(
            f"trained {len(result.episodes)} episodes; "
            f"trailing-100 mean return {sum(tail) / len(tail):.3f}"
        )
    return EXIT_OK


def make_policy(weights_path: str | None, baseline: str | None, rng: np.random.Generator):
    """Return policy(obs, env) -> action for evaluation (greedy, epsilon=0)."""

    if baseline == "random":
        return lambda obs, env: int(rng.integers(env.n_actions))
    if baseline == "heuristic":
        return lambda obs, env: learner.heuristic_policy(obs)
    net = QNetwork.load(weights_path)
    return lambda obs, env: learner.act(net, obs * OBS_SCALE, 0.0, rng)


def run_episodes(factory, policy, episodes: int, seed: int) -> list[learner.EpisodeRecord]:
    seeds = np.random.default_rng(np.random.SeedSequence(seed))
    records = []
    for index in range(episodes):
        ep_seed = int(seeds.integers(2**63 - 1))
        env = factory(index, ep_seed, [r.ret for r in records])
        obs = env.reset()
        total, length, done = 0.0, 0, False
        while not done:
            result = env.step(policy(obs, env))
            obs = result.observation
            total += result.reward
            length += 1
            done = result.done
        records.append(
            learner.EpisodeRecord(
                episode=index, ret=total, length=length,
                cause=result.info["termination_cause"],
                seed=ep_seed, variant=env.config.red_variant,
            )
        )
    return records


def mean_and_ci95(values: list[float]) -> tuple[float, float]:
    """Mean and normal-approximation 95% confidence half-width."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, float("inf")
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, 1.96 * math.sqrt(var / n)


def diff_ci95(a: list[float], b: list[float]) -> tuple[float, float]:
    """Mean difference (a - b) and Welch 95% confidence half-width."""
    mean_a, mean_b = sum(a) / len(a), sum(b) / len(b)
    var_a = sum((v - mean_a) ** 2 for v in a) / (len(a) - 1)
    var_b = sum((v - mean_b) ** 2 for v in b) / (len(b) - 1)
    half = 1.96 * math.sqrt(var_a / len(a) + var_b / len(b))
    return mean_a - mean_b, half


def cmd_eval(args) -> int:
    if args.episodes < 1:
        print("nothing to evaluate: --episodes must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if bool(args.weights) == bool(args.baseline):
        print("provide exactly one of --weights or --baseline", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data = apply_overrides(load_config_file(args.config), args.override)
        factory, _ = build_env_factory(data)
        rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(1)[0])
        policy = make_policy(args.weights, args.baseline, rng)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    records = run_episodes(factory, policy, args.episodes, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "eval.csv",
        EVAL_HEADER,
        [[r.episode, r.seed, repr(r.ret), r.length, r.cause, r.variant] for r in records],
    )
    run_meta = {
        "command": "eval",
        "config_path": str(args.config),
        "config_hash": _config_hash(data),
        "overrides": list(args.override),
        "seed": args.seed,
        "episodes": args.episodes,
        "weights": args.weights,
        "baseline": args.baseline,
        "code_version": __version__,
    }
    (out / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True) + "\n")
    mean, half = mean_and_ci95([r.ret for r in records])
    print(f"mean return {mean:.4f} +/- {half:.4f} (95% CI, n={args.episodes})")
    return EXIT_OK


def cmd_sample(args) -> int:
    try:
        data = load_config_file(args.config)
        if "distribution" not in data:
            raise ConfigError("sample requires a 'distribution' section")
        dist = EnvironmentDistribution.from_dict(data["distribution"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed)
    for _ in range(args.count):
        config = envdist.sample_env(dist, rng)
        print(json.dumps({"scenario": config.to_dict()}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netenv",
        description="Seeded network-defense simulation: train, evaluate, sample.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, episodes=False):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VAL",
            help="config override, repeatable (dotted path or train-section key)",
        )
        if episodes:
            p.add_argument("--episodes", type=int, default=100)

    p_train = sub.add_parser("train", help="train the DQN blue agent")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a frozen policy")
    common(p_eval, episodes=True)
    p_eval.add_argument("--weights", help="weights.bin from a training run")
    p_eval.add_argument("--baseline", choices=["random", "heuristic"])
    p_eval.set_defaults(func=cmd_eval)

    p_sample = sub.add_parser("sample", help="sample scenario configs")
    p_sample.add_argument("--config", required=True)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--count", type=int, default=1)
    p_sample.set_defaults(func=cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
