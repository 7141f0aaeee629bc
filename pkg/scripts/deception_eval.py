#!/usr/bin/env python3
"""Evaluate a frozen policy against the faithful and the deceptive red.

Runs the same weights on both red variants, prints per-variant mean
returns, the Welch 95% confidence interval of the difference, and the
termination-cause breakdown. A policy trained only against the faithful
red is expected to lose return under deception, with real-jewel
exfiltration becoming the dominant outcome.

Usage: python3 scripts/deception_eval.py --weights runs/faithful_seed0/weights.bin
"""

import argparse
import collections

import numpy as np

from netenv.harness import (
    apply_overrides,
    build_env_factory,
    diff_ci95,
    load_config_file,
    make_policy,
    run_episodes,
)


def evaluate(config_path, weights, variant, episodes, seed):
    data = apply_overrides(
        load_config_file(config_path), [f"scenario.red_variant={variant}"]
    )
    factory, _ = build_env_factory(data)
    rng = np.random.default_rng(seed)
    policy = make_policy(weights, None, rng)
    return run_episodes(factory, policy, episodes, seed)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/faithful_10node.json")
    parser.add_argument("--weights", required=True)
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    results = {}
    for variant in ("faithful", "deceptive"):
        records = evaluate(args.config, args.weights, variant, args.episodes, args.seed)
        returns = [r.ret for r in records]
        causes = collections.Counter(r.cause for r in records)
        results[variant] = returns
        print(f"{variant:9s} mean return {np.mean(returns):+.4f}   causes {dict(causes)}")

    diff, half = diff_ci95(results["faithful"], results["deceptive"])
    print(f"faithful - deceptive = {diff:+.4f} +/- {half:.4f} (Welch 95% CI)")


if __name__ == "__main__":
    main()
