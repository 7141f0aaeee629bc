"""The POMDP binding: reset/step, observation featurizer, reward, termination.

One step runs in a fixed order: blue action, gray traffic, red TTP step,
reward, observation from this step's event window, termination check.
The observation is a flat vector of 11 per-host event counts over the
scenario's hosts.  Decoy hosts created for honey subnets are not
actionable and have no rows of their own; as defender-owned sensors,
their telemetry is reported against the real host anchoring the subnet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import agents, netmodel
from .agents import ReconOracle, RedState
from .config import RewardConfig, ScenarioConfig
from .netmodel import Event, InvalidAction, NetworkState

# Observation feature order, per host: six originated-event counts, then
# five reported failure/search counts.
FEATURES = (
    "scp",
    "http",
    "amq",
    "ssh",
    "recon_quiet",
    "recon_aggressive",
    "scp_failure",
    "rest_failure",
    "amqp_failure",
    "ssh_failure",
    "content_search",
)
N_FEATURES = len(FEATURES)
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURES)}

NOOP = 0
ISOLATE, MIGRATE_EXISTING, MIGRATE_HONEY = 0, 1, 2
VERB_NAMES = ("isolate", "migrate_existing", "migrate_honey")

CAUSE_REAL = "real_exfil"
CAUSE_FAKE = "fake_exfil"
CAUSE_HORIZON = "horizon"
CAUSE_RED_ISOLATED = "red_isolated"


class EpisodeFinished(RuntimeError):
    """step() was called on a finished episode."""


def action_space_size(n_hosts: int) -> int:
    return 3 * n_hosts + 1


def decode_action(action: int, n_hosts: int) -> tuple[int, int] | None:
    """Map an action code to (host, verb); None for the no-op."""
    if not 0 <= action <= 3 * n_hosts:
        raise ValueError(f"action {action} out of range [0, {3 * n_hosts}]")
    if action == NOOP:
        return None
    return (action - 1) // 3, (action - 1) % 3


def featurize(
    events: list[Event], n_hosts: int, anchors: dict[int, int] | None = None
) -> np.ndarray:
    """Bucket one step window of events into the flat count observation.

    ``anchors`` maps decoy host ids to the real host anchoring their honey
    subnet: decoys are sensors the defender owns, so their telemetry is
    reported against the anchor's row.  Unmapped out-of-range origins are
    dropped.
    """
    counts = np.zeros((n_hosts, N_FEATURES), dtype=np.int64)
    anchors = anchors or {}
    for ev in events:
        origin = ev.origin
        if origin >= n_hosts:
            origin = anchors.get(origin, -1)
        if 0 <= origin < n_hosts:
            counts[origin, _FEATURE_INDEX[ev.kind]] += 1
    return counts.reshape(-1)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def reward_terms(
    before: NetworkState,
    after: NetworkState,
    action: int,
    events: list[Event],
    cfg: RewardConfig,
) -> dict[str, float]:
    """Itemized reward components; the step reward is exactly their sum."""

    terms: dict[str, float] = {}
    n_hosts = sum(1 for h in before.hosts if not h.is_decoy)
    decoded = decode_action(action, n_hosts)
    if decoded is not None:
        terms["action_cost"] = cfg.c_action
        host_id, verb = decoded
        host_before = before.hosts[host_id]
        host_after = after.hosts[host_id]
        if verb == ISOLATE and not host_before.isolated and host_after.isolated:
            if host_before.compromised:
                terms["isolate_red"] = cfg.r_isolate_red
            else:
                terms["isolate_benign"] = cfg.c_isolate_benign
        elif verb in (MIGRATE_EXISTING, MIGRATE_HONEY):
            moved = host_after.subnet_id != host_before.subnet_id
            if moved and not host_before.compromised:
                terms["migrate_benign"] = cfg.c_migrate_benign
    for ev in events:
        if ev.exfil:
            jewel_host = after.hosts[ev.origin]
            if jewel_host.is_decoy_jewel:
                terms["trap_fake_exfil"] = cfg.r_trap_fake_exfil
            else:
                terms["real_exfil"] = cfg.r_real_exfil
    return terms


def compute_reward(
    before: NetworkState,
    after: NetworkState,
    action: int,
    events: list[Event],
    cfg: RewardConfig,
) -> float:
    return float(sum(reward_terms(before, after, action, events, cfg).values()))


class CyberDefenseEnv:
    """One episode-generating environment instance.

    Fully deterministic in (config, seed); independent instances share no
    state.
    """

    def __init__(self, config: ScenarioConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = seed
        self.n_hosts = config.network.n_hosts
        self.n_actions = action_space_size(self.n_hosts)
        self.state: NetworkState | None = None
        self.red: RedState | None = None
        self.done = True
        self.termination_cause: str | None = None
        self.last_events: list[Event] = []

    # -- lifecycle -----------------------------------------------------

    def reset(self) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed)
        build_ss, entry_ss, dyn_ss = ss.spawn(3)
        self.state = netmodel.build_network(self.config, build_ss)
        self._rng = np.random.default_rng(dyn_ss)
        entry = int(np.random.default_rng(entry_ss).integers(self.n_hosts))
        self.red = agents.make_red(self.config.red_variant, self.config.ttp).with_entry(entry)
        self.entry_host = entry
        self.done = False
        self.termination_cause = None
        self._sync_compromised()
        # Pre-step: one gray/red round populates the first observation window.
        events = self._agent_events()
        self._commit_window(events)
        return featurize(events, self.n_hosts, self._decoy_anchors())

    def step(self, action: int) -> StepResult:
        if self.done or self.state is None:
            raise EpisodeFinished("episode is finished; call reset()")
        decoded = decode_action(action, self.n_hosts)

        before = self.state
        self.state = self.state.copy()
        self.state.step_counter += 1
        valid = True
        if decoded is not None:
            host_id, verb = decoded
            try:
                self._apply_blue(host_id, verb)
            except InvalidAction:
                valid = False

        events = self._agent_events()
        self._commit_window(events)
        self._sync_compromised()

        terms = reward_terms(before, self.state, action, events, self.config.reward)
        reward = float(sum(terms.values()))
        obs = featurize(events, self.n_hosts, self._decoy_anchors())

        cause = None
        if self.red.phase == agents.DONE:
            jewel = self.state.hosts[self.red.jewel_located]
            cause = CAUSE_FAKE if jewel.is_decoy_jewel else CAUSE_REAL
        elif self.state.step_counter >= self.config.horizon:
            all_cut = all(
                self.state.hosts[h].isolated for h in self.red.controlled
            )
            cause = CAUSE_RED_ISOLATED if all_cut else CAUSE_HORIZON
        self.done = cause is not None
        self.termination_cause = cause

        info = {
            "phase": self.red.phase,
            "controlled": tuple(self.red.controlled),
            "entry_host": self.entry_host,
            "termination_cause": cause,
            "reward_terms": terms,
            "valid_action": valid,
            "step": self.state.step_counter,
        }
        return StepResult(observation=obs, reward=reward, done=self.done, info=info)

    # -- internals -----------------------------------------------------

    def _decoy_anchors(self) -> dict[int, int]:
        """Map each decoy to the real host sharing its honey subnet."""
        anchors: dict[int, int] = {}
        for subnet in self.state.subnets:
            if subnet.kind != netmodel.HONEY:
                continue
            real = [m for m in sorted(subnet.member_hosts) if not self.state.hosts[m].is_decoy]
            if not real:
                continue
            for m in subnet.member_hosts:
                if self.state.hosts[m].is_decoy:
                    anchors[m] = real[0]
        return anchors

    def _apply_blue(self, host_id: int, verb: int) -> None:
        state = self.state
        host = state.host(host_id)
        # Hosts already inside a honey subnet stay there: the honey subnet
        # is itself an isolation mechanism, so per-host isolation inside it
        # is a non-operation, and re-migrating would either free a trapped
        # attacker or discard the trap.
        in_honey = (
            host.subnet_id is not None
            and state.subnet(host.subnet_id).kind == netmodel.HONEY
        )
        if verb == ISOLATE:
            if host.isolated:
                raise InvalidAction("already isolated")
            if in_honey:
                raise InvalidAction("host is in a honey subnet")
            self.state = netmodel.isolate_host(state, host_id)
            return
        if in_honey:
            raise InvalidAction("host is in a honey subnet")
        if verb == MIGRATE_EXISTING:
            self.state = netmodel.migrate_existing(state, host_id)
        else:
            self.state = netmodel.migrate_honey(
                state, host_id, decoys=self.config.network.decoy_count
            )

    def _agent_events(self) -> list[Event]:
        events = agents.gray_step(self.config.gray, self.state, self._rng)
        if self.red.phase != agents.DONE:
            view = netmodel.red_view(self.state, set(self.red.discovered))
            oracle = ReconOracle(
                peers={
                    h: tuple(self.state.subnet_peers(h))
                    for h in self.red.controlled
                    if not self.state.hosts[h].isolated
                },
                jewel_hosts=frozenset(
                    h for h in self.red.controlled
                    if self.state.hosts[h].holds_crown_jewel
                ),
            )
            self.red, red_events = agents.red_step(self.red, view, self._rng, oracle)
            events.extend(red_events)
        # Honey subnets are instrumented segments: the honeywall logs every
        # in-subnet event a second time, so trapped-host activity shows up
        # with count >= 2 instead of blending into single benign events.
        monitored = {
            m
            for subnet in self.state.subnets
            if subnet.kind == netmodel.HONEY
            for m in subnet.member_hosts
        }
        events.extend([ev for ev in events if ev.origin in monitored])
        step = self.state.step_counter
        return [
            Event(ev.kind, ev.origin, ev.target, step, ev.exfil) for ev in events
        ]

    def _commit_window(self, events: list[Event]) -> None:
        # Snapshot semantics: the window holds exactly this step's events.
        self.state.event_log = list(events)
        self.last_events = events

    def _sync_compromised(self) -> None:
        controlled = set(self.red.controlled)
        for host in self.state.hosts:
            host.compromised = host.id in controlled


def reset(config: ScenarioConfig, seed: int) -> tuple[CyberDefenseEnv, np.ndarray]:
    """Build an environment and return it with the initial observation."""
    env = CyberDefenseEnv(config, seed)
    obs = env.reset()
    return env, obs


def step(env: CyberDefenseEnv, action: int) -> StepResult:
    return env.step(action)
