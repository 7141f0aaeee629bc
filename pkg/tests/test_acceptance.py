"""End-to-end acceptance gate.

Seven independently timed criteria covering the full stack: generative
program semantics, gradient correctness, bit-level training determinism,
learnability of the trap-the-attacker policy on the shipped 10-node
scenario, collapse of that policy against the deceptive attacker,
environment invariants under random play, and distribution sampling
statistics.  Each test prints a single "criterion N: PASS/FAIL" line.

Criteria 4 and 5 share one trained policy through a module-scoped
fixture, so this module trains exactly once (about seven minutes on one
CPU).  Run it alone with `pytest tests/test_acceptance.py -v -s`.
"""

import collections
import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

from netenv import harness
from netenv.config import NetworkConfig, ScenarioConfig
from netenv.environment import FEATURES, N_FEATURES, CyberDefenseEnv
from netenv.envdist import EnvironmentDistribution, sample_env
from netenv.genprog import (
    GenerativeProgram,
    ProgramNode,
    enumerate_traces,
    sample_trace,
)
from netenv.learner import QNetwork, grad_check

CONFIG_PATH = str(Path(__file__).resolve().parents[1] / "configs" / "faithful_10node.json")


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"\ncriterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


# -- criterion 1: generative program correctness ---------------------------


def random_program(rng: np.random.Generator) -> GenerativeProgram:
    """A random finite DAG of 1..6 binary choice points.

    Each choice emits a branch label then jumps forward to a strictly
    later choice point or to halt, so every trace terminates.
    """

    n_choices = int(rng.integers(1, 7))
    nodes = {"halt": ProgramNode(id="halt", kind="halt")}
    params = {}
    for i in range(n_choices):
        branches = []
        for side in ("a", "b"):
            if side == "a":
                # Keep every choice point reachable via the "a" chain.
                target = f"c{i + 1}" if i + 1 < n_choices else "halt"
            else:
                later = [f"c{j}" for j in range(i + 1, n_choices)] + ["halt"]
                target = later[int(rng.integers(len(later)))]
            emit = f"e{i}{side}"
            nodes[emit] = ProgramNode(
                id=emit, kind="emit", label=f"{side}{i}", next=target
            )
            branches.append(emit)
        nodes[f"c{i}"] = ProgramNode(
            id=f"c{i}", kind="choice", choice_id=f"p{i}", branches=tuple(branches)
        )
        p = float(rng.uniform(0.1, 0.9))
        params[f"p{i}"] = (p, 1.0 - p)
    return GenerativeProgram(nodes=nodes, entry="c0", params=params)


def test_criterion_1_generative_programs():
    start = time.time()
    rng = np.random.default_rng(101)
    draws = 10_000
    worst_mass_err = 0.0
    worst_sigma = 0.0
    for _ in range(20):
        program = random_program(rng)
        traces = enumerate_traces(program)
        total = sum(t.weight for t in traces)
        worst_mass_err = max(worst_mass_err, abs(total - 1.0))
        counts = collections.Counter(
            sample_trace(program, rng).decisions for _ in range(draws)
        )
        for trace in traces:
            sigma = (trace.weight * (1.0 - trace.weight) / draws) ** 0.5
            err = abs(counts[trace.decisions] / draws - trace.weight)
            if sigma > 0:
                worst_sigma = max(worst_sigma, err / sigma)
            else:
                assert err == 0.0
    elapsed = time.time() - start
    ok = worst_mass_err <= 1e-9 and worst_sigma <= 4.0 and elapsed < 30
    report(
        1,
        ok,
        f"max |sum(weight)-1| {worst_mass_err:.2e}, worst freq dev "
        f"{worst_sigma:.2f} sigma, {elapsed:.1f}s",
    )


# -- criterion 2: gradient check --------------------------------------------


def test_criterion_2_gradient_check():
    start = time.time()
    rng = np.random.default_rng(202)
    worst = 0.0
    for trial in range(10):
        in_dim = int(rng.integers(11, 133))
        out_dim = int(rng.integers(3, 34))
        q = QNetwork(in_dim, out_dim, seed=int(rng.integers(2**31)))
        batch = (
            rng.normal(size=(16, in_dim)),
            rng.integers(out_dim, size=16),
            rng.normal(size=16),
            rng.normal(size=(16, in_dim)),
            rng.integers(0, 2, size=16).astype(float),
        )
        worst = max(worst, grad_check(q, batch, seed=rng))
    elapsed = time.time() - start
    ok = worst < 1e-4 and elapsed < 10
    report(2, ok, f"max relative error {worst:.2e} over 10 trials, {elapsed:.1f}s")


# -- criterion 3: bit-level training determinism -----------------------------


def test_criterion_3_train_determinism(tmp_path):
    start = time.time()
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "scenario": {"network": {"n_hosts": 6}},
                "train": {
                    "total_steps": 3000,
                    "warmup": 200,
                    "learning_rate": 0.001,
                },
            }
        )
    )
    outputs = []
    for run in ("one", "two"):
        out = tmp_path / run
        rc = harness.main(
            ["train", "--config", str(config), "--seed", "7", "--out", str(out)]
        )
        assert rc == harness.EXIT_OK
        outputs.append(out)
    same_curve = (
        (outputs[0] / "curve.csv").read_bytes() == (outputs[1] / "curve.csv").read_bytes()
    )
    same_weights = (
        (outputs[0] / "weights.bin").read_bytes()
        == (outputs[1] / "weights.bin").read_bytes()
    )
    elapsed = time.time() - start
    ok = same_curve and same_weights and elapsed < 300
    report(
        3,
        ok,
        f"curve identical {same_curve}, weights identical {same_weights}, "
        f"{elapsed:.0f}s",
    )


# -- criteria 4 and 5: learnability, then collapse under deception -----------


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    start = time.time()
    rc = harness.main(
        ["train", "--config", CONFIG_PATH, "--seed", "1", "--out", str(out)]
    )
    assert rc == harness.EXIT_OK
    return out, time.time() - start


def read_curve(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion_4_learnability(trained_run):
    out, train_seconds = trained_run
    rows = read_curve(out / "curve.csv")
    tail = rows[-1000:]
    trained_mean = float(np.mean([float(r["return"]) for r in tail]))
    contained = sum(1 for r in tail if r["cause"] in ("fake_exfil", "red_isolated"))
    fraction = contained / len(tail)

    data = harness.load_config_file(CONFIG_PATH)
    factory, _ = harness.build_env_factory(data)
    policy = harness.make_policy(None, "random", np.random.default_rng(404))
    records = harness.run_episodes(factory, policy, episodes=500, seed=404)
    random_mean = float(np.mean([r.ret for r in records]))

    ok = (
        trained_mean >= random_mean + 0.5
        and fraction > 0.60
        and train_seconds < 1200
    )
    report(
        4,
        ok,
        f"trained trailing-1000 mean {trained_mean:+.3f} vs random "
        f"{random_mean:+.3f} (bar {random_mean + 0.5:+.3f}), contained "
        f"fraction {fraction:.1%}, train {train_seconds:.0f}s",
    )


def test_criterion_5_deception_collapse(trained_run):
    out, _ = trained_run
    start = time.time()
    data = harness.load_config_file(CONFIG_PATH)
    weights = str(out / "weights.bin")

    returns, causes = {}, {}
    for variant in ("faithful", "deceptive"):
        variant_data = json.loads(json.dumps(data))
        variant_data["scenario"]["red_variant"] = variant
        factory, _ = harness.build_env_factory(variant_data)
        policy = harness.make_policy(weights, None, np.random.default_rng(505))
        records = harness.run_episodes(factory, policy, episodes=500, seed=505)
        returns[variant] = [r.ret for r in records]
        causes[variant] = collections.Counter(r.cause for r in records)

    diff, half = harness.diff_ci95(returns["faithful"], returns["deceptive"])
    modal = causes["deceptive"].most_common(1)[0][0]
    elapsed = time.time() - start
    ok = diff > 0 and diff - half > 0 and modal == "real_exfil" and elapsed < 300
    report(
        5,
        ok,
        f"faithful mean {np.mean(returns['faithful']):+.3f}, deceptive mean "
        f"{np.mean(returns['deceptive']):+.3f}, difference {diff:.3f} +/- "
        f"{half:.3f}, deceptive modal cause {modal}, {elapsed:.0f}s",
    )


# -- criterion 6: environment invariants under random play -------------------


def independent_counts(events, n_hosts, anchors):
    counts = np.zeros((n_hosts, N_FEATURES))
    for ev in events:
        origin = ev.origin
        if origin >= n_hosts:
            origin = anchors.get(origin, -1)
        if origin < 0:
            continue
        counts[origin, FEATURES.index(ev.kind)] += 1
    return counts.reshape(-1)


def test_criterion_6_environment_invariants():
    start = time.time()
    rng = np.random.default_rng(606)
    episodes = 10_000
    for episode in range(episodes):
        n_hosts = int(rng.integers(4, 11))
        cfg = ScenarioConfig(network=NetworkConfig(n_hosts=n_hosts))
        env = CyberDefenseEnv(cfg, seed=episode)
        obs = env.reset()
        assert obs.shape == (N_FEATURES * n_hosts,)
        done, steps = False, 0
        while not done:
            result = env.step(int(rng.integers(env.n_actions)))
            steps += 1
            obs = result.observation
            assert obs.shape == (N_FEATURES * n_hosts,)
            anchors = env._decoy_anchors()
            assert np.array_equal(
                obs, independent_counts(env.last_events, n_hosts, anchors)
            )
            terms = result.info["reward_terms"]
            assert abs(result.reward - sum(terms.values())) < 1e-12
            done = result.done
            cause = result.info["termination_cause"]
            assert done == (cause is not None)
            if done:
                assert cause in ("real_exfil", "fake_exfil", "horizon", "red_isolated")
        assert steps <= cfg.horizon
        if result.info["termination_cause"] in ("horizon", "red_isolated"):
            assert steps == cfg.horizon
    elapsed = time.time() - start
    ok = elapsed < 120
    report(6, ok, f"{episodes} random-action episodes, no violations, {elapsed:.0f}s")


# -- criterion 7: distribution sampling statistics ----------------------------


def test_criterion_7_distribution_sampling():
    start = time.time()
    dist = EnvironmentDistribution(host_count=(8, 9, 10, 11, 12))
    rng = np.random.default_rng(707)
    sizes = [sample_env(dist, rng).network.n_hosts for _ in range(1000)]
    mean = float(np.mean(sizes))
    elapsed = time.time() - start
    # Uniform on {8..12}: mean 10, sd sqrt(2); 3 sigma of the sample
    # mean over 1000 draws is 3 * sqrt(2/1000) = 0.134.
    ok = abs(mean - 10.0) <= 0.134 and elapsed < 5
    report(7, ok, f"sample mean {mean:.3f} (bound 10 +/- 0.134), {elapsed:.1f}s")
