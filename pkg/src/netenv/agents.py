"""Red and gray agent behavior, driven by generative-program choice points.

The gray agent is a per-host benign traffic generator.  The red agent is
an exfiltration chain: reconnaissance, lateral movement over ssh, content
search, exfiltration.  The deceptive red variant commits, once per
episode and with a configurable probability, to a disguised posture: the
campaign proceeds unchanged, but its distinctive events are logged under
benign-looking kinds (recon as http, content search as amq), blending
into gray traffic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, GrayProfile, TTPParams
from .genprog import GenerativeProgram, ProgramNode, sample_trace
from .netmodel import Event, NetworkState, RedView

RECON, LATERAL, SEARCH, EXFIL, DONE = "recon", "lateral", "search", "exfil", "done"

_GRAY_EVENT_FOR_RATE = (
    ("p_http", "http", True),
    ("p_amq", "amq", True),
    ("p_ssh", "ssh", True),
    ("p_scp", "scp", True),
    ("p_rest_fail", "rest_failure", False),
    ("p_amqp_fail", "amqp_failure", False),
    ("p_ssh_fail", "ssh_failure", False),
    ("p_scp_fail", "scp_failure", False),
)

_TARGETED_KINDS = {name for _, name, targeted in _GRAY_EVENT_FOR_RATE if targeted}


@functools.lru_cache(maxsize=None)
def gray_program(profile: GrayProfile) -> GenerativeProgram:
    """One gray host step as a chain of independent Bernoulli choice points.

    Each sampled trace emits the subset of event kinds the host produces
    this step.
    """

    nodes: dict[str, ProgramNode] = {"halt": ProgramNode(id="halt", kind="halt")}
    params: dict[str, tuple[float, ...]] = {}
    names = [name for _, name, _ in _GRAY_EVENT_FOR_RATE]
    for i, (rate_field, name, _) in enumerate(_GRAY_EVENT_FOR_RATE):
        after = f"c_{names[i + 1]}" if i + 1 < len(names) else "halt"
        nodes[f"c_{name}"] = ProgramNode(
            id=f"c_{name}",
            kind="choice",
            choice_id=name,
            branches=(f"e_{name}", after),
        )
        nodes[f"e_{name}"] = ProgramNode(
            id=f"e_{name}", kind="emit", label=name, next=after
        )
        p = getattr(profile, rate_field)
        params[name] = (p, 1.0 - p)
    return GenerativeProgram(nodes=nodes, entry=f"c_{names[0]}", params=params)


def gray_step(profile: GrayProfile, state: NetworkState, seed) -> list[Event]:
    """Benign events for one step window, deterministic in the seed.

    Every non-isolated real host draws each event kind independently at
    its profile rate; events that need a target pick a uniform same-subnet
    peer (skipped when the host has none).  Decoys emit nothing here:
    legitimate users have no business on a honeypot.
    """

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    program = gray_program(profile)
    events: list[Event] = []
    step = state.step_counter
    for host in state.hosts:
        if host.isolated or host.is_decoy:
            continue
        trace = sample_trace(program, rng, max_steps=64)
        peers = None
        for kind in trace.labels:
            target = None
            if kind in _TARGETED_KINDS:
                if peers is None:
                    peers = state.subnet_peers(host.id)
                if not peers:
                    continue
                target = int(peers[rng.integers(len(peers))])
            events.append(Event(kind=kind, origin=host.id, target=target, step=step))
    return events


@dataclass(frozen=True)
class RedState:
    """Attacker state: current phase and the sets it has built up.

    ``controlled`` and ``discovered`` are insertion-ordered tuples; the
    order doubles as the attacker's preference order (oldest first).
    """

    phase: str = RECON
    controlled: tuple[int, ...] = ()
    discovered: tuple[int, ...] = ()
    searched: frozenset[int] = frozenset()
    jewel_located: int | None = None
    deception_rate: float = 0.0
    disguised: bool | None = None
    params: TTPParams = TTPParams()

    def with_entry(self, host_id: int) -> "RedState":
        return replace(self, controlled=(host_id,), discovered=(host_id,))


@dataclass(frozen=True)
class ReconOracle:
    """Ground-truth answers the environment supplies to red's actions.

    ``peers`` maps each controlled, non-isolated host to its current
    subnet peers (what a scan from that host can reveal); a controlled
    host absent from ``peers`` has lost all connectivity.  ``jewel_hosts``
    restricts to controlled hosts, where red has access to the filesystem.
    """

    peers: dict[int, tuple[int, ...]]
    jewel_hosts: frozenset[int] = frozenset()


def make_red(variant: str, params: TTPParams = TTPParams()) -> RedState:
    """Create the red agent for one episode.

    The entry host is chosen by the environment at reset (uniformly by
    seed) via :meth:`RedState.with_entry`.
    """

    params.validate()
    if variant == "faithful":
        rate = 0.0
    elif variant == "deceptive":
        rate = params.deception_rate
    else:
        raise ConfigError(f"unknown red variant {variant!r}")
    return RedState(deception_rate=rate, params=params)


@functools.lru_cache(maxsize=None)
def _step_program(intent: str, p_intent: float) -> GenerativeProgram:
    """Program for one red step: the intent's binary outcome choice.

    Emits exactly one label, the intent outcome (e.g.
    ``recon:aggressive``/``recon:quiet``).
    """

    nodes: dict[str, ProgramNode] = {"halt": ProgramNode(id="halt", kind="halt")}
    params: dict[str, tuple[float, ...]] = {}
    outcomes = {
        RECON: ("recon:aggressive", "recon:quiet"),
        LATERAL: ("lateral:success", "lateral:fail"),
        SEARCH: ("search:hit", "search:miss"),
    }
    if intent == EXFIL:
        nodes["ttp"] = ProgramNode(id="ttp", kind="emit", label="exfil", next="halt")
    else:
        hit, miss = outcomes[intent]
        nodes["ttp"] = ProgramNode(
            id="ttp", kind="choice", choice_id=intent, branches=("e_hit", "e_miss")
        )
        nodes["e_hit"] = ProgramNode(id="e_hit", kind="emit", label=hit, next="halt")
        nodes["e_miss"] = ProgramNode(id="e_miss", kind="emit", label=miss, next="halt")
        params[intent] = (p_intent, 1.0 - p_intent)
    return GenerativeProgram(nodes=nodes, entry="ttp", params=params)


@functools.lru_cache(maxsize=None)
def _posture_program(deception_rate: float) -> GenerativeProgram:
    """Episode-level posture gate: disguise the whole campaign or not.

    Deception is an operational posture, not a per-packet coin flip: an
    attacker that intends to hide commits to disguised tradecraft for the
    campaign.
    """

    nodes = {
        "halt": ProgramNode(id="halt", kind="halt"),
        "posture": ProgramNode(
            id="posture", kind="choice", choice_id="posture",
            branches=("e_hide", "e_show"),
        ),
        "e_hide": ProgramNode(id="e_hide", kind="emit", label="disguise", next="halt"),
        "e_show": ProgramNode(id="e_show", kind="emit", label="overt", next="halt"),
    }
    params = {"posture": (deception_rate, 1.0 - deception_rate)}
    return GenerativeProgram(nodes=nodes, entry="posture", params=params)


# Disguised tradecraft logs distinctive red activity under benign kinds
# that gray traffic produces anyway; ssh/scp already blend in.
_DISGUISE = {"recon_aggressive": "http", "recon_quiet": "http", "content_search": "amq"}


def _disguise(events: list[Event]) -> list[Event]:
    return [
        Event(kind=_DISGUISE.get(ev.kind, ev.kind), origin=ev.origin,
              target=ev.target, step=ev.step, exfil=ev.exfil)
        for ev in events
    ]


def _intent(red: RedState, view: RedView, oracle: ReconOracle):
    """Pick this step's intent from the phase machine.

    Returns (intent, detail) where detail carries the pre-chosen subject
    of the action, or None when red is fully cut off and stalls.
    """

    active = [h for h in red.controlled if h in oracle.peers]
    if red.jewel_located is not None:
        if red.jewel_located in active:
            return EXFIL, red.jewel_located
        return None, None  # located jewel is unreachable: stall

    recon_candidates = [
        h for h in active
        if any(p not in red.discovered for p in oracle.peers[h])
    ]
    if len(red.discovered) < red.params.k_discovery and recon_candidates:
        return RECON, recon_candidates
    unsearched = [h for h in active if h not in red.searched]
    if unsearched:
        return SEARCH, unsearched[0]
    lateral = [
        t for t in red.discovered
        if t not in red.controlled
        and any(
            (min(c, t), max(c, t)) in view.edges for c in active
        )
    ]
    if lateral:
        return LATERAL, lateral[0]
    if recon_candidates:
        return RECON, recon_candidates
    if active and red.searched:
        # Everything reachable was searched without success (a find can
        # miss); forget the search history and sweep again.
        return "research", active[0]
    return None, None


def red_step(
    red: RedState, view: RedView, seed, oracle: ReconOracle
) -> tuple[RedState, list[Event]]:
    """Advance the red TTP machine by one step.

    Deterministic in the seed.  Returns the updated red state and the
    events emitted this step.  All probabilistic branching happens at
    generative-program choice points.
    """

    if red.phase == DONE:
        raise ValueError("red agent already finished")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    if red.disguised is None:
        posture = sample_trace(_posture_program(red.deception_rate), rng, max_steps=4)
        red = replace(red, disguised=posture.labels[0] == "disguise")

    intent, detail = _intent(red, view, oracle)
    if intent is None:
        return red, []
    searched = red.searched
    if intent == "research":
        searched = frozenset()
        intent = SEARCH
        red = replace(red, searched=searched)

    p_map = {
        RECON: red.params.p_aggr,
        LATERAL: red.params.p_lateral,
        SEARCH: red.params.p_find,
        EXFIL: 1.0,
    }
    program = _step_program(intent, p_map[intent])
    trace = sample_trace(program, rng, max_steps=16)
    label = trace.labels[0]
    step = 0  # environment restamps events with the current step counter

    if intent == RECON:
        candidates = detail
        origin = int(candidates[rng.integers(len(candidates))])
        undiscovered = [p for p in oracle.peers[origin] if p not in red.discovered]
        if label == "recon:aggressive":
            gained = tuple(undiscovered)
            kind = "recon_aggressive"
        else:
            gained = (int(undiscovered[rng.integers(len(undiscovered))]),)
            kind = "recon_quiet"
        events = [Event(kind=kind, origin=origin, step=step)]
        return (
            replace(red, phase=RECON, discovered=red.discovered + gained),
            _disguise(events) if red.disguised else events,
        )

    if intent == SEARCH:
        host = detail
        located = label == "search:hit" and host in oracle.jewel_hosts
        new = replace(
            red,
            phase=SEARCH,
            searched=searched | {host},
            jewel_located=host if located else red.jewel_located,
        )
        events = [Event(kind="content_search", origin=host, step=step)]
        return new, _disguise(events) if red.disguised else events

    if intent == LATERAL:
        target = detail
        active = [h for h in red.controlled if h in oracle.peers]
        origins = [
            c for c in active if (min(c, target), max(c, target)) in view.edges
        ]
        origin = origins[0]
        if label == "lateral:success":
            new = replace(red, phase=LATERAL, controlled=red.controlled + (target,))
            return new, [Event(kind="ssh", origin=origin, target=target, step=step)]
        return (
            replace(red, phase=LATERAL),
            [Event(kind="ssh_failure", origin=target, step=step)],
        )

    # Exfiltration: transfer the jewel out and finish.
    jewel = detail
    new = replace(red, phase=DONE)
    return new, [Event(kind="scp", origin=jewel, step=step, exfil=True)]
