"""Blue-agent learners: a from-scratch DQN plus random and heuristic baselines.

The Q-network is a single-hidden-layer ReLU MLP implemented directly in
numpy, trained with one-step TD targets, uniform experience replay, a
periodically synchronized target network, and epsilon-greedy exploration.
Gradients are analytic and checked against central finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .environment import FEATURES, N_FEATURES

MAGIC = b"NEFQ1"

# Raw counts are O(10); this keeps network inputs O(1).
OBS_SCALE = 0.1

_RECON_AGGR = FEATURES.index("recon_aggressive")
_CONTENT_SEARCH = FEATURES.index("content_search")


class DivergenceError(RuntimeError):
    """Training aborted because Q-values blew up."""


class QNetwork:
    """Feed-forward action-value network: input -> hidden ReLU -> values."""

    def __init__(self, in_dim: int, out_dim: int, hidden: int = 64, seed=0):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.hidden = hidden
        self.w1 = rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(in_dim, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, out_dim))
        self.b2 = np.zeros(out_dim)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if x.shape[1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {x.shape[1]}")
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.in_dim, clone.out_dim, clone.hidden = self.in_dim, self.out_dim, self.hidden
        clone.w1, clone.b1 = self.w1.copy(), self.b1.copy()
        clone.w2, clone.b2 = self.w2.copy(), self.b2.copy()
        return clone

    def save(self, path) -> None:
        """Versioned flat binary: magic, dimensions, row-major float64 LE."""
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", self.in_dim, self.hidden, self.out_dim))
            for arr in self.params:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "QNetwork":
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise ValueError(f"bad magic {magic!r}; not a weights file")
            in_dim, hidden, out_dim = struct.unpack("<III", fh.read(12))
            net = cls(in_dim, out_dim, hidden=hidden, seed=0)
            for name, shape in (
                ("w1", (in_dim, hidden)),
                ("b1", (hidden,)),
                ("w2", (hidden, out_dim)),
                ("b2", (out_dim,)),
            ):
                count = int(np.prod(shape))
                data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
                setattr(net, name, data.copy())
        return net


@dataclass
class TrainConfig:
    learning_rate: float = 0.0001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05
    epsilon_fraction: float = 0.2  # schedule spans this share of total steps
    target_sync: int = 1000
    batch_size: int = 64
    total_steps: int = 200_000
    buffer_capacity: int = 50_000
    warmup: int = 1000
    hidden: int = 64
    updates_per_step: int = 1

    def validate(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.total_steps < 1 or self.batch_size < 1 or self.target_sync < 1:
            raise ValueError("total_steps, batch_size, target_sync must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        from dataclasses import fields as dc_fields

        known = {f.name for f in dc_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown keys in train config: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def epsilon_at(step: int, cfg: TrainConfig) -> float:
    """Linear decay from epsilon_start to epsilon_final, then flat."""
    span = max(1, int(cfg.total_steps * cfg.epsilon_fraction))
    frac = min(1.0, step / span)
    return cfg.epsilon_start + (cfg.epsilon_final - cfg.epsilon_start) * frac


def act(q: QNetwork, obs: np.ndarray, epsilon: float, seed) -> int:
    """Epsilon-greedy action; greedy ties break toward the lowest code."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    obs = np.asarray(obs, dtype=float).reshape(-1)
    if obs.shape[0] != q.in_dim:
        raise ValueError(f"observation width {obs.shape[0]} != input {q.in_dim}")
    if rng.random() < epsilon:
        return int(rng.integers(q.out_dim))
    values = q.forward(obs)[0]
    return int(np.argmax(values))


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int = 50_000):
        self.capacity = capacity
        self._storage: list[tuple] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._storage)

    def add(self, obs, action, reward, next_obs, done) -> None:
        item = (obs, int(action), float(reward), next_obs, bool(done))
        if len(self._storage) < self.capacity:
            self._storage.append(item)
        else:
            self._storage[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(len(self._storage), size=batch_size)
        obs, actions, rewards, next_obs, dones = zip(*(self._storage[i] for i in idx))
        return (
            np.stack(obs),
            np.asarray(actions),
            np.asarray(rewards),
            np.stack(next_obs),
            np.asarray(dones, dtype=float),
        )


def td_loss_and_grads(
    q: QNetwork,
    target: QNetwork,
    batch,
    gamma: float,
) -> tuple[float, list[np.ndarray]]:
    """Mean squared one-step TD error and its analytic gradients."""

    obs, actions, rewards, next_obs, dones = batch
    next_values = target.forward(next_obs).max(axis=1)
    y = rewards + gamma * next_values * (1.0 - dones)

    x = np.atleast_2d(obs)
    z1 = x @ q.w1 + q.b1
    h = np.maximum(z1, 0.0)
    values = h @ q.w2 + q.b2
    b = x.shape[0]
    selected = values[np.arange(b), actions]
    err = selected - y
    loss = float(np.mean(err**2))

    dvalues = np.zeros_like(values)
    dvalues[np.arange(b), actions] = 2.0 * err / b
    dw2 = h.T @ dvalues
    db2 = dvalues.sum(axis=0)
    dh = dvalues @ q.w2.T
    dz1 = dh * (z1 > 0.0)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, [dw1, db1, dw2, db2]


def grad_check(
    q: QNetwork, batch, n_weights: int = 100, step: float = 1e-5, seed=0
) -> float:
    """Max relative error of analytic vs central-finite-difference gradients
    over randomly chosen individual weights."""

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gamma = 0.99
    target = q.copy()
    _, grads = td_loss_and_grads(q, target, batch, gamma)
    max_err = 0.0
    params = q.params
    for _ in range(n_weights):
        p = int(rng.integers(len(params)))
        flat_index = int(rng.integers(params[p].size))
        original = params[p].flat[flat_index]
        params[p].flat[flat_index] = original + step
        loss_plus, _ = td_loss_and_grads(q, target, batch, gamma)
        params[p].flat[flat_index] = original - step
        loss_minus, _ = td_loss_and_grads(q, target, batch, gamma)
        params[p].flat[flat_index] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        analytic = grads[p].flat[flat_index]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        err = abs(numeric - analytic) / denom
        if numeric == 0.0 and analytic == 0.0:
            err = 0.0
        max_err = max(max_err, err)
    return max_err


class AdamState:
    """Per-parameter Adam accumulators (the standard bias-corrected form)."""

    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.cfg = cfg

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        b1t = 1.0 - cfg.adam_beta1**self.t
        b2t = 1.0 - cfg.adam_beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * g * g
            p -= cfg.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + cfg.adam_eps)


def heuristic_policy(obs: np.ndarray) -> int:
    """Scripted baseline: honey-migrate the host showing the most
    aggressive-recon or content-search activity this window; else no-op."""

    obs = np.asarray(obs).reshape(-1, N_FEATURES)
    scores = obs[:, _RECON_AGGR] + obs[:, _CONTENT_SEARCH]
    if scores.max() < 1:
        return 0
    host = int(np.argmax(scores))  # argmax ties break to the lowest id
    return 1 + 3 * host + 2


@dataclass
class EpisodeRecord:
    episode: int
    ret: float
    length: int
    cause: str
    seed: int
    variant: str


@dataclass
class TrainResult:
    network: QNetwork
    episodes: list[EpisodeRecord] = field(default_factory=list)

    @property
    def curve(self) -> list[tuple[int, float]]:
        return [(rec.episode, rec.ret) for rec in self.episodes]


def train(env_factory, cfg: TrainConfig, seed: int) -> TrainResult:
    """DQN training loop, deterministic in (env_factory, cfg, seed).

    ``env_factory(episode_index, episode_seed, history)`` must return a
    fresh environment exposing reset()/step(); ``history`` is the list of
    episode returns so far (for curriculum-aware factories).
    """

    cfg.validate()
    ss = np.random.SeedSequence(seed)
    net_ss, loop_ss, ep_ss = ss.spawn(3)
    rng = np.random.default_rng(loop_ss)
    episode_seeds = np.random.default_rng(ep_ss)

    history: list[float] = []
    records: list[EpisodeRecord] = []

    def new_episode(index: int):
        ep_seed = int(episode_seeds.integers(2**63 - 1))
        env = env_factory(index, ep_seed, history)
        return env, env.reset(), ep_seed

    env, obs, ep_seed = new_episode(0)
    n_obs = obs.shape[0]
    q = QNetwork(n_obs, env.n_actions, hidden=cfg.hidden,
                 seed=np.random.default_rng(net_ss))
    target = q.copy()
    buffer = ReplayBuffer(cfg.buffer_capacity)
    optim = AdamState(q.params, cfg)

    ep_index = 0
    ep_return = 0.0
    ep_length = 0
    scaled = obs * OBS_SCALE

    for t in range(cfg.total_steps):
        action = act(q, scaled, epsilon_at(t, cfg), rng)
        result = env.step(action)
        next_scaled = result.observation * OBS_SCALE
        buffer.add(scaled, action, result.reward, next_scaled, result.done)
        ep_return += result.reward
        ep_length += 1

        if len(buffer) >= max(cfg.warmup, cfg.batch_size):
            for _ in range(cfg.updates_per_step):
                batch = buffer.sample(cfg.batch_size, rng)
                _, grads = td_loss_and_grads(q, target, batch, cfg.gamma)
                optim.update(q.params, grads)
            q_scale = float(np.mean(np.abs(q.forward(batch[0]))))
            if q_scale > 1e6:
                raise DivergenceError(
                    f"mean |Q| = {q_scale:.3g} exceeded 1e6 at step {t}"
                )
        if (t + 1) % cfg.target_sync == 0:
            target = q.copy()

        if result.done:
            records.append(
                EpisodeRecord(
                    episode=ep_index,
                    ret=ep_return,
                    length=ep_length,
                    cause=result.info["termination_cause"],
                    seed=ep_seed,
                    variant=env.config.red_variant,
                )
            )
            history.append(ep_return)
            ep_index += 1
            ep_return = 0.0
            ep_length = 0
            env, obs, ep_seed = new_episode(ep_index)
            scaled = obs * OBS_SCALE
        else:
            scaled = next_scaled

    return TrainResult(network=q, episodes=records)
