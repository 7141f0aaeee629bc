import dataclasses

import numpy as np
import pytest

from netenv.agents import (
    DONE,
    RECON,
    ReconOracle,
    gray_step,
    make_red,
    red_step,
)
from netenv.config import ConfigError, GrayProfile, NetworkConfig, ScenarioConfig, TTPParams
from netenv.environment import CyberDefenseEnv
from netenv.netmodel import build_network, isolate_host, red_view

DECEPTION_KINDS = {"http", "amq"}
RED_KINDS = {
    "recon_quiet", "recon_aggressive", "ssh", "ssh_failure", "content_search", "scp",
}


def scenario(n=10, **kwargs):
    return ScenarioConfig(network=NetworkConfig(n_hosts=n), **kwargs)


def make_oracle(state, red):
    return ReconOracle(
        peers={
            h: tuple(state.subnet_peers(h))
            for h in red.controlled
            if not state.hosts[h].isolated
        },
        jewel_hosts=frozenset(
            h for h in red.controlled if state.hosts[h].holds_crown_jewel
        ),
    )


class TestGrayStep:
    def test_all_rates_zero(self):
        state = build_network(scenario(), seed=1)
        zeros = GrayProfile(**{f: 0.0 for f in GrayProfile.__dataclass_fields__})
        assert gray_step(zeros, state, seed=0) == []

    def test_deterministic_rates(self):
        state = build_network(scenario(), seed=1)
        profile = GrayProfile(
            p_http=1.0, p_amq=0.0, p_ssh=0.0, p_scp=0.0,
            p_rest_fail=0.0, p_amqp_fail=0.0, p_ssh_fail=0.0, p_scp_fail=0.0,
        )
        events = gray_step(profile, state, seed=0)
        assert len(events) == 10
        assert all(ev.kind == "http" for ev in events)
        assert sorted(ev.origin for ev in events) == list(range(10))
        # Targets are same-subnet peers.
        for ev in events:
            assert ev.target is not None and ev.target != ev.origin

    def test_event_rate_statistics(self):
        # Binomial oracle: 10 hosts at p_http = 0.3 emit 3 events/step on
        # average; 3 sigma over 10,000 steps is about 0.043.
        state = build_network(scenario(), seed=1)
        profile = GrayProfile(
            p_http=0.3, p_amq=0.0, p_ssh=0.0, p_scp=0.0,
            p_rest_fail=0.0, p_amqp_fail=0.0, p_ssh_fail=0.0, p_scp_fail=0.0,
        )
        rng = np.random.default_rng(5)
        total = sum(len(gray_step(profile, state, rng)) for _ in range(10_000))
        assert abs(total / 10_000 - 3.0) < 0.05

    def test_isolated_hosts_emit_nothing(self):
        state = isolate_host(build_network(scenario(), seed=1), 4)
        profile = GrayProfile(p_http=1.0)
        events = gray_step(profile, state, seed=0)
        assert all(ev.origin != 4 for ev in events)

    def test_deterministic_in_seed(self):
        state = build_network(scenario(), seed=1)
        assert gray_step(GrayProfile(), state, 3) == gray_step(GrayProfile(), state, 3)


class TestMakeRed:
    def test_faithful_has_zero_deception(self):
        red = make_red("faithful", TTPParams(deception_rate=0.9))
        assert red.deception_rate == 0.0

    def test_deceptive_default_rate(self):
        red = make_red("deceptive", TTPParams())
        assert red.deception_rate == 0.5

    def test_invalid_probability(self):
        with pytest.raises(ConfigError):
            make_red("deceptive", TTPParams(deception_rate=1.2))

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            make_red("purple", TTPParams())

    def test_entry_host(self):
        red = make_red("faithful", TTPParams()).with_entry(4)
        assert red.controlled == (4,)
        assert red.discovered == (4,)


class TestRedStep:
    def test_aggressive_recon_discovers_whole_subnet(self):
        state = build_network(scenario(), seed=2)
        red = make_red("faithful", TTPParams(p_aggr=1.0)).with_entry(0)
        view = red_view(state, set(red.discovered))
        red2, events = red_step(red, view, 0, make_oracle(state, red))
        assert [ev.kind for ev in events] == ["recon_aggressive"]
        assert events[0].origin == 0
        assert set(red2.discovered) == set(range(10))

    def test_quiet_recon_discovers_one(self):
        state = build_network(scenario(), seed=2)
        red = make_red("faithful", TTPParams(p_aggr=0.0)).with_entry(0)
        view = red_view(state, set(red.discovered))
        red2, events = red_step(red, view, 0, make_oracle(state, red))
        assert [ev.kind for ev in events] == ["recon_quiet"]
        assert len(red2.discovered) == 2

    def test_full_deception_hides_distinctive_kinds(self):
        # A fully deceptive campaign advances at normal speed but never
        # shows a recon or content-search event.
        state = build_network(scenario(), seed=2)
        red = make_red("deceptive", TTPParams(deception_rate=1.0)).with_entry(0)
        rng = np.random.default_rng(0)
        for _ in range(200):
            if red.phase == DONE:
                break
            view = red_view(state, set(red.discovered))
            red, events = red_step(red, view, rng, make_oracle(state, red))
            for ev in events:
                assert ev.kind not in {"recon_aggressive", "recon_quiet", "content_search"}
        assert red.phase == DONE
        assert len(red.discovered) > 1

    def test_zero_deception_never_disguises(self):
        state = build_network(scenario(), seed=2)
        red = make_red("deceptive", TTPParams(deception_rate=0.0)).with_entry(0)
        rng = np.random.default_rng(0)
        view = red_view(state, set(red.discovered))
        red, events = red_step(red, view, rng, make_oracle(state, red))
        assert red.disguised is False
        assert events[0].kind in {"recon_aggressive", "recon_quiet"}

    def test_red_only_emits_known_kinds(self):
        state = build_network(scenario(), seed=2)
        red = make_red("deceptive", TTPParams()).with_entry(0)
        rng = np.random.default_rng(1)
        for _ in range(200):
            if red.phase == DONE:
                break
            view = red_view(state, set(red.discovered))
            red, events = red_step(red, view, rng, make_oracle(state, red))
            for ev in events:
                assert ev.kind in RED_KINDS | DECEPTION_KINDS
                assert ev.origin in red.discovered  # partial-information rule

    def test_fully_isolated_red_stalls(self):
        state = isolate_host(build_network(scenario(), seed=2), 0)
        red = make_red("faithful", TTPParams()).with_entry(0)
        view = red_view(state, set(red.discovered))
        red2, events = red_step(red, view, 0, make_oracle(state, red))
        assert events == []
        assert red2 == dataclasses.replace(red, disguised=False)

    def test_finished_red_rejects_steps(self):
        import dataclasses

        red = dataclasses.replace(make_red("faithful").with_entry(0), phase=DONE)
        with pytest.raises(ValueError):
            red_step(red, red_view(build_network(scenario(), seed=2), {0}), 0, ReconOracle(peers={}))


class TestTrapInHoneyNetwork:
    def test_trapped_red_exfiltrates_decoy_jewel(self):
        # Blue honey-migrates the entry host on its first move; the red
        # agent, unable to tell the fake subnet apart, works through it
        # and exfiltrates the decoy jewel, ending the episode.
        cfg = ScenarioConfig(
            network=NetworkConfig(n_hosts=10),
            ttp=TTPParams(p_aggr=1.0, p_lateral=1.0, p_find=1.0),
            red_variant="faithful",
        )
        env = CyberDefenseEnv(cfg, seed=5)
        env.reset()
        result = env.step(1 + 3 * env.entry_host + 2)  # migrate_honey(entry)
        while not result.done:
            result = env.step(0)
        assert result.info["termination_cause"] == "fake_exfil"

    def test_minimal_steps_with_certain_probabilities(self):
        # With every success probability at 1 and an all-quiet blue, the
        # phase machine is deterministic: aggressive recon happens in the
        # reset pre-step, then red alternates search (discovery order) and
        # lateral moves until it controls the jewel host, searches it and
        # exfiltrates on the following step.  Episode length is 2 + 2p
        # where p is the jewel's position after the entry host.
        cfg = ScenarioConfig(
            network=NetworkConfig(n_hosts=6, jewel_placement=4),
            ttp=TTPParams(p_aggr=1.0, p_lateral=1.0, p_find=1.0),
            red_variant="faithful",
        )
        env = CyberDefenseEnv(cfg, seed=3)
        env.reset()
        order = [env.entry_host] + sorted(set(range(6)) - {env.entry_host})
        position = order.index(4)
        steps = 0
        done = False
        while not done:
            result = env.step(0)
            steps += 1
            done = result.done
        assert result.info["termination_cause"] == "real_exfil"
        assert steps == 2 + 2 * position
