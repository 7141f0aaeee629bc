#!/usr/bin/env python3
"""Report mean returns of the random and scripted-heuristic baselines.

Usage: python3 scripts/baselines.py [--config CONFIG] [--episodes N]
"""

import argparse
import collections

import numpy as np

from netenv.harness import (
    build_env_factory,
    load_config_file,
    make_policy,
    mean_and_ci95,
    run_episodes,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/faithful_10node.json")
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = load_config_file(args.config)
    for baseline in ("random", "heuristic"):
        factory, _ = build_env_factory(data)
        policy = make_policy(None, baseline, np.random.default_rng(args.seed))
        records = run_episodes(factory, policy, args.episodes, args.seed)
        mean, half = mean_and_ci95([r.ret for r in records])
        causes = collections.Counter(r.cause for r in records)
        print(f"{baseline:9s} mean return {mean:+.4f} +/- {half:.4f}   causes {dict(causes)}")


if __name__ == "__main__":
    main()
