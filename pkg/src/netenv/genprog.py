"""Generative programs: probabilistic state machines over execution traces.

A program is a finite graph of nodes.  ``emit`` nodes append an action
label and continue, ``choice`` nodes branch according to a named
probability vector, ``halt`` nodes stop.  Running a program yields a
trace: the sequence of branch decisions and emitted labels, together with
a weight equal to the product of the branch probabilities taken.  The
weighted set of all halting traces is the probability distribution the
program denotes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

PROB_TOL = 1e-9
ENUMERATION_CAP = 10**6


class ProgramError(ValueError):
    """Malformed program structure or parameters."""


class TraceError(ValueError):
    """A trace that is not realizable in the given program."""


@dataclass(frozen=True)
class ProgramNode:
    """One node of a generative program.

    kind is one of ``emit`` (carries ``label`` and ``next``), ``choice``
    (carries ``choice_id`` and ``branches``) or ``halt``.
    """

    id: str
    kind: str
    label: str | None = None
    next: str | None = None
    choice_id: str | None = None
    branches: tuple[str, ...] = ()


@dataclass(frozen=True)
class Trace:
    """One weighted execution of a program.

    ``decisions`` records (node id, branch index) pairs in order,
    ``labels`` the emitted action labels, ``weight`` the product of branch
    probabilities along the path.  ``truncated`` marks samples cut off at
    the step budget before reaching a halt node.
    """

    decisions: tuple[tuple[str, int], ...] = ()
    labels: tuple[str, ...] = ()
    weight: float = 1.0
    truncated: bool = False


@dataclass(frozen=True)
class GenerativeProgram:
    nodes: dict[str, ProgramNode] = field(default_factory=dict)
    entry: str = ""
    params: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def node(self, node_id: str) -> ProgramNode:
        return self.nodes[node_id]

    def validate(self) -> None:
        # Validation is structural and programs are immutable, so the
        # result is memoized for the hot per-step sampling path.
        if getattr(self, "_validated", False):
            return
        if self.entry not in self.nodes:
            raise ProgramError(f"entry node {self.entry!r} not defined")
        for node in self.nodes.values():
            if node.kind == "emit":
                if node.label is None or node.next not in self.nodes:
                    raise ProgramError(f"emit node {node.id!r} malformed")
            elif node.kind == "choice":
                if node.choice_id not in self.params:
                    raise ProgramError(
                        f"choice node {node.id!r} has no params for "
                        f"{node.choice_id!r}"
                    )
                probs = self.params[node.choice_id]
                if len(probs) != len(node.branches):
                    raise ProgramError(
                        f"choice {node.choice_id!r}: {len(node.branches)} branches "
                        f"but {len(probs)} probabilities"
                    )
                if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > PROB_TOL:
                    raise ProgramError(
                        f"choice {node.choice_id!r} probabilities must be "
                        f"non-negative and sum to 1, got {probs}"
                    )
                for branch in node.branches:
                    if branch not in self.nodes:
                        raise ProgramError(
                            f"choice node {node.id!r} branch {branch!r} undefined"
                        )
            elif node.kind != "halt":
                raise ProgramError(f"node {node.id!r} has unknown kind {node.kind!r}")
        # Every node must be reachable from the entry.
        seen: set[str] = set()
        frontier = [self.entry]
        while frontier:
            nid = frontier.pop()
            if nid in seen:
                continue
            seen.add(nid)
            node = self.nodes[nid]
            if node.kind == "emit":
                frontier.append(node.next)
            elif node.kind == "choice":
                frontier.extend(node.branches)
        unreachable = set(self.nodes) - seen
        if unreachable:
            raise ProgramError(f"unreachable nodes: {sorted(unreachable)}")
        object.__setattr__(self, "_validated", True)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_trace(program: GenerativeProgram, seed, max_steps: int = 1000) -> Trace:
    """Draw one trace with probability equal to its weight.

    Deterministic in (program, seed).  Walks that exceed ``max_steps``
    node visits without halting are returned with ``truncated=True``.
    """

    if max_steps < 1:
        raise ProgramError(f"max_steps must be >= 1, got {max_steps}")
    program.validate()
    rng = _as_rng(seed)
    decisions: list[tuple[str, int]] = []
    labels: list[str] = []
    weight = 1.0
    node = program.node(program.entry)
    for _ in range(max_steps):
        if node.kind == "halt":
            return Trace(tuple(decisions), tuple(labels), weight)
        if node.kind == "emit":
            labels.append(node.label)
            node = program.node(node.next)
        else:
            probs = program.params[node.choice_id]
            draw = rng.random()
            acc = 0.0
            branch = len(probs) - 1
            for i, p in enumerate(probs):
                acc += p
                if draw < acc:
                    branch = i
                    break
            decisions.append((node.id, branch))
            weight *= probs[branch]
            node = program.node(node.branches[branch])
    return Trace(tuple(decisions), tuple(labels), weight, truncated=True)


def trace_weight(program: GenerativeProgram, trace: Trace) -> float:
    """Product of branch probabilities along ``trace``.

    Replays the trace through the program and raises TraceError on the
    first point where it stops being a valid path.
    """

    program.validate()
    weight = 1.0
    node = program.node(program.entry)
    decisions = iter(trace.decisions)
    labels = iter(trace.labels)
    while node.kind != "halt":
        if node.kind == "emit":
            expected = next(labels, None)
            if expected != node.label:
                raise TraceError(
                    f"trace label {expected!r} does not match emit node "
                    f"{node.id!r} ({node.label!r})"
                )
            node = program.node(node.next)
        else:
            decision = next(decisions, None)
            if decision is None:
                if trace.truncated:
                    break
                raise TraceError(f"trace ends before choice node {node.id!r}")
            node_id, branch = decision
            if node_id != node.id:
                raise TraceError(
                    f"trace decision at {node_id!r} but program is at {node.id!r}"
                )
            if not 0 <= branch < len(node.branches):
                raise TraceError(f"branch {branch} out of range at node {node.id!r}")
            weight *= program.params[node.choice_id][branch]
            node = program.node(node.branches[branch])
    if next(decisions, None) is not None or next(labels, None) is not None:
        raise TraceError("trace continues past the halt node")
    return weight


def enumerate_traces(
    program: GenerativeProgram, max_steps: int = 1000, cap: int = ENUMERATION_CAP
) -> list[Trace]:
    """Exhaustively enumerate every halting trace with its exact weight.

    Serves as the brute-force oracle against which the sampler is tested.
    Paths still running after ``max_steps`` node visits are dropped;
    raising past ``cap`` completed traces is a resource error.
    """

    program.validate()
    results: list[Trace] = []
    # Stack of (node id, decisions, labels, weight, visits).
    stack = [(program.entry, (), (), 1.0, 0)]
    while stack:
        node_id, decisions, labels, weight, visits = stack.pop()
        if visits >= max_steps:
            continue
        node = program.node(node_id)
        if node.kind == "halt":
            results.append(Trace(decisions, labels, weight))
            if len(results) > cap:
                raise ResourceWarning(
                    f"more than {cap} traces; raise the cap or bound the program"
                )
        elif node.kind == "emit":
            stack.append(
                (node.next, decisions, labels + (node.label,), weight, visits + 1)
            )
        else:
            probs = program.params[node.choice_id]
            for branch in reversed(range(len(node.branches))):
                stack.append(
                    (
                        node.branches[branch],
                        decisions + ((node.id, branch),),
                        labels,
                        weight * probs[branch],
                        visits + 1,
                    )
                )
    return results


def fit_params(
    program: GenerativeProgram, data: list[Trace], add_one: bool = False
) -> GenerativeProgram:
    """Maximum-likelihood refit of every choice-point probability vector.

    Branch probabilities become visit-count ratios over ``data``; choice
    points never visited keep their prior parameters.  ``add_one`` enables
    add-one smoothing (off by default so refitting exact frequencies
    reproduces the original parameters exactly).
    """

    program.validate()
    if not data:
        raise TraceError("fit_params requires at least one trace")
    counts: dict[str, np.ndarray] = {
        cid: np.zeros(len(probs)) for cid, probs in program.params.items()
    }
    for index, trace in enumerate(data):
        try:
            trace_weight(program, trace)
        except TraceError as exc:
            raise TraceError(f"trace {index} not realizable: {exc}") from exc
        for node_id, branch in trace.decisions:
            counts[program.node(node_id).choice_id][branch] += 1
    new_params = dict(program.params)
    for cid, vec in counts.items():
        if add_one:
            vec = vec + 1.0
        total = vec.sum()
        if total > 0:
            new_params[cid] = tuple(float(v) for v in vec / total)
    return replace(program, params=new_params)


def bernoulli_choice(
    choice_id: str,
    p: float,
    on_true: str,
    on_false: str,
) -> tuple[list[ProgramNode], dict[str, tuple[float, ...]]]:
    """Helper: nodes/params for a binary choice emitting one of two labels.

    The returned emit nodes point at a node named ``halt`` which the
    caller must provide.
    """

    nodes = [
        ProgramNode(
            id=f"c_{choice_id}",
            kind="choice",
            choice_id=choice_id,
            branches=(f"e_{choice_id}_t", f"e_{choice_id}_f"),
        ),
        ProgramNode(id=f"e_{choice_id}_t", kind="emit", label=on_true, next="halt"),
        ProgramNode(id=f"e_{choice_id}_f", kind="emit", label=on_false, next="halt"),
    ]
    return nodes, {choice_id: (p, 1.0 - p)}
