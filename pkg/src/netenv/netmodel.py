"""Ground-truth network state and the blue structural actions on it.

The network is a graph of hosts partitioned into subnets; edges only
connect hosts within the same subnet (flat intra-subnet connectivity).
All operations are pure: they return a new state and never mutate their
argument, so replaying an action log from the same initial state
reproduces the final state exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SERVICE_TAGS, ConfigError, NetworkConfig, ScenarioConfig

EVENT_KINDS = (
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

REAL = "real"
HONEY = "honey"


class UnknownHostError(ValueError):
    """Host id does not exist in the state."""


class InvalidAction(Exception):
    """Structurally inapplicable blue action.

    Not a hard error: the environment converts it into a penalized no-op.
    """


@dataclass(frozen=True)
class Event:
    kind: str
    origin: int
    target: int | None = None
    step: int = 0
    exfil: bool = False  # marks the terminal exfiltration scp transfer


@dataclass
class Host:
    id: int
    subnet_id: int | None
    services: frozenset[str]
    holds_crown_jewel: bool = False
    is_decoy_jewel: bool = False
    compromised: bool = False
    isolated: bool = False
    is_decoy: bool = False  # decoy hosts are created only inside honey subnets

    def copy(self) -> "Host":
        return Host(
            self.id,
            self.subnet_id,
            self.services,
            self.holds_crown_jewel,
            self.is_decoy_jewel,
            self.compromised,
            self.isolated,
            self.is_decoy,
        )


@dataclass
class Subnet:
    id: int
    kind: str
    member_hosts: set[int] = field(default_factory=set)

    def copy(self) -> "Subnet":
        return Subnet(self.id, self.kind, set(self.member_hosts))


@dataclass
class NetworkState:
    hosts: list[Host]
    subnets: list[Subnet]
    edges: set[tuple[int, int]]
    step_counter: int = 0
    event_log: list[Event] = field(default_factory=list)

    def copy(self) -> "NetworkState":
        return NetworkState(
            [h.copy() for h in self.hosts],
            [s.copy() for s in self.subnets],
            set(self.edges),
            self.step_counter,
            list(self.event_log),
        )

    def host(self, host_id: int) -> Host:
        if not 0 <= host_id < len(self.hosts):
            raise UnknownHostError(f"no host with id {host_id}")
        return self.hosts[host_id]

    def subnet(self, subnet_id: int) -> Subnet:
        for subnet in self.subnets:
            if subnet.id == subnet_id:
                return subnet
        raise ValueError(f"no subnet with id {subnet_id}")

    def degree(self, host_id: int) -> int:
        return sum(1 for edge in self.edges if host_id in edge)

    def neighbors(self, host_id: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == host_id:
                out.append(b)
            elif b == host_id:
                out.append(a)
        return sorted(out)

    def subnet_peers(self, host_id: int) -> list[int]:
        """Other members of the host's subnet (empty if isolated)."""
        host = self.host(host_id)
        if host.subnet_id is None:
            return []
        return sorted(self.subnet(host.subnet_id).member_hosts - {host_id})


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def build_network(config: ScenarioConfig, seed) -> NetworkState:
    """Construct the reset-time network: one real subnet, full connectivity,
    exactly one crown jewel.  Deterministic in (config, seed)."""

    config.validate()
    net: NetworkConfig = config.network
    rng = np.random.default_rng(seed)
    n = net.n_hosts

    hosts = []
    for i in range(n):
        services = frozenset(
            tag for tag in SERVICE_TAGS
            if tag in net.service_rates and rng.random() < net.service_rates[tag]
        )
        if not services:
            services = frozenset([str(rng.choice(sorted(net.service_rates)))])
        hosts.append(Host(id=i, subnet_id=0, services=services))

    if net.jewel_placement == "uniform":
        jewel = int(rng.integers(n))
    else:
        jewel = int(net.jewel_placement)
    hosts[jewel].holds_crown_jewel = True

    subnet = Subnet(id=0, kind=REAL, member_hosts=set(range(n)))
    edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    return NetworkState(hosts=hosts, subnets=[subnet], edges=edges)


def isolate_host(state: NetworkState, host_id: int) -> NetworkState:
    """Cut all connectivity of a host and remove it from its subnet.
    Idempotent."""

    state.host(host_id)  # raises UnknownHostError
    new = state.copy()
    host = new.hosts[host_id]
    if host.isolated:
        return new
    new.edges = {e for e in new.edges if host_id not in e}
    if host.subnet_id is not None:
        new.subnet(host.subnet_id).member_hosts.discard(host_id)
    host.subnet_id = None
    host.isolated = True
    return new


def _detach(state: NetworkState, host_id: int) -> None:
    """Remove a host's edges and subnet membership in place."""
    host = state.hosts[host_id]
    state.edges = {e for e in state.edges if host_id not in e}
    if host.subnet_id is not None:
        state.subnet(host.subnet_id).member_hosts.discard(host_id)
    host.subnet_id = None


def _attach(state: NetworkState, host_id: int, subnet: Subnet) -> None:
    """Add a host to a subnet with full intra-subnet connectivity."""
    for member in subnet.member_hosts:
        state.edges.add(_edge(host_id, member))
    subnet.member_hosts.add(host_id)
    state.hosts[host_id].subnet_id = subnet.id


def migrate_existing(state: NetworkState, host_id: int) -> NetworkState:
    """Move a host to the smallest other real subnet (ties: lowest id),
    creating an empty real subnet first when none exists."""

    host = state.host(host_id)
    if host.isolated:
        raise InvalidAction(f"host {host_id} is isolated")
    new = state.copy()
    current = new.hosts[host_id].subnet_id
    candidates = [s for s in new.subnets if s.kind == REAL and s.id != current]
    if not candidates:
        dest = Subnet(id=max(s.id for s in new.subnets) + 1, kind=REAL)
        new.subnets.append(dest)
    else:
        dest = min(candidates, key=lambda s: (len(s.member_hosts), s.id))
    _detach(new, host_id)
    _attach(new, host_id, dest)
    return new


def migrate_honey(state: NetworkState, host_id: int, decoys: int = 2) -> NetworkState:
    """Move a host into a freshly created honey subnet.

    The subnet is populated with ``decoys`` decoy hosts mirroring the
    service tags of real hosts; exactly one decoy carries a fake crown
    jewel.
    """

    host = state.host(host_id)
    if host.isolated:
        raise InvalidAction(f"host {host_id} is isolated")
    if decoys < 1:
        raise ConfigError(f"decoy count must be >= 1, got {decoys}")
    new = state.copy()
    honey = Subnet(id=max(s.id for s in new.subnets) + 1, kind=HONEY)
    new.subnets.append(honey)
    _detach(new, host_id)
    _attach(new, host_id, honey)

    real_ids = sorted(
        h.id for h in new.hosts
        if not h.is_decoy and h.subnet_id is not None
        and new.subnet(h.subnet_id).kind == REAL
    ) or [host_id]
    for k in range(decoys):
        mirror = new.hosts[real_ids[k % len(real_ids)]]
        decoy = Host(
            id=len(new.hosts),
            subnet_id=None,
            services=mirror.services,
            holds_crown_jewel=(k == 0),
            is_decoy_jewel=(k == 0),
            is_decoy=True,
        )
        new.hosts.append(decoy)
        _attach(new, decoy.id, honey)
    return new


@dataclass(frozen=True)
class RedView:
    """The attacker's partial projection of the network.

    Contains only discovered hosts, their services, and edges among
    discovered hosts.  Subnet kinds are withheld: a honey subnet is
    indistinguishable from a real one.
    """

    services: dict[int, frozenset[str]]
    edges: frozenset[tuple[int, int]]

    @property
    def hosts(self) -> frozenset[int]:
        return frozenset(self.services)


def red_view(state: NetworkState, discovered: set[int]) -> RedView:
    for host_id in discovered:
        state.host(host_id)
    services = {h: state.hosts[h].services for h in discovered}
    edges = frozenset(
        e for e in state.edges if e[0] in discovered and e[1] in discovered
    )
    return RedView(services=services, edges=edges)


def check_invariants(state: NetworkState) -> None:
    """Assert the structural invariants; raises AssertionError on violation."""

    ids = {h.id for h in state.hosts}
    for a, b in state.edges:
        assert a in ids and b in ids, f"edge ({a},{b}) references unknown host"
        assert a != b, "self edge"
        sa, sb = state.hosts[a].subnet_id, state.hosts[b].subnet_id
        assert sa is not None and sa == sb, f"edge ({a},{b}) crosses subnets"
    member_union: set[int] = set()
    for subnet in state.subnets:
        assert subnet.kind in (REAL, HONEY)
        assert not (member_union & subnet.member_hosts), "subnets overlap"
        member_union |= subnet.member_hosts
        for m in subnet.member_hosts:
            assert state.hosts[m].subnet_id == subnet.id
    non_isolated = {h.id for h in state.hosts if not h.isolated}
    assert member_union == non_isolated, "subnets must partition non-isolated hosts"
    for host in state.hosts:
        if host.isolated:
            assert state.degree(host.id) == 0, f"isolated host {host.id} has edges"
        if host.is_decoy_jewel and host.subnet_id is not None:
            assert state.subnet(host.subnet_id).kind == HONEY
    real_jewels = [h for h in state.hosts if h.holds_crown_jewel and not h.is_decoy_jewel]
    assert len(real_jewels) == 1, "exactly one real crown jewel required"
    decoy_jewels = sum(1 for h in state.hosts if h.is_decoy_jewel)
    honey_subnets = sum(1 for s in state.subnets if s.kind == HONEY)
    assert decoy_jewels == honey_subnets, "one decoy jewel per honey subnet"
