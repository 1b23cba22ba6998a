"""Tabular Q-learning, DQN, DDQN and D3QN agents with their training loop.

D3QN here is the double-DQN target (online argmax, target evaluation)
combined with the cosine-decaying exploration schedule; DQN and DDQN use a
fixed exploration rate.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, TrainingDivergedError
from .nn import apply_update, forward, init_params, loss_and_gradient

log = logging.getLogger(__name__)

AGENT_KINDS = ("q_table", "dqn", "ddqn", "d3qn", "random")
LOG_COLUMNS = ("episode", "cumulative_reward", "mean_ee", "epsilon", "loss_mean", "violations")


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Bounded FIFO of transitions stored in preallocated arrays."""

    def __init__(self, capacity, state_size):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_size))
        self.a = np.zeros(self.capacity, dtype=int)
        self.r = np.zeros(self.capacity)
        self.s2 = np.zeros((self.capacity, state_size))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, t):
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s2[i] = t.state, t.action, t.reward, t.next_state
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, n, rng):
        if n > self._size:
            raise ValueError(f"cannot draw {n} transitions from {self._size}")
        return rng.choice(self._size, size=n, replace=False)

    def sample(self, n, rng):
        idx = self.sample_indices(n, rng)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]


@dataclass(frozen=True)
class EpsilonSchedule:
    """``a cos(m pi / (2c)) + b`` for ``m <= c``, zero afterwards."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.a + self.b > 1:
            raise ConfigError("need a, b >= 0 and a + b <= 1")
        if self.c <= 0:
            raise ConfigError("decay horizon c must be positive")

    def __call__(self, m):
        return epsilon_at(self, m)


@dataclass(frozen=True)
class FixedEpsilon:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")

    def __call__(self, m):
        return self.value


def epsilon_at(schedule, m):
    if m < 0:
        raise ValueError("episode counter must be non-negative")
    if m > schedule.c:
        return 0.0
    return schedule.a * math.cos(m * math.pi / (2.0 * schedule.c)) + schedule.b


def select_action(q_values, eps, rng):
    """Greedy action (lowest index on ties) with probability ``1 - eps``,
    otherwise one of the remaining actions uniformly."""
    q_values = np.asarray(q_values)
    n = q_values.size
    if n == 0:
        raise ValueError("no actions to choose from")
    best = int(np.argmax(q_values))
    if n > 1 and rng.random() < eps:
        j = int(rng.integers(n - 1))
        return j if j < best else j + 1
    return best


def q_table_update(table, s, a, r, s_next, alpha, gamma, n_actions, terminal=False):
    """One tabular step on a dict of per-state value arrays; returns ``table``."""
    row = table.get(s)
    if row is None:
        row = table[s] = np.zeros(n_actions)
    if terminal:
        nxt = 0.0
    else:
        nrow = table.get(s_next)
        nxt = 0.0 if nrow is None else float(np.max(nrow))
    row[a] = (1.0 - alpha) * row[a] + alpha * (r + gamma * nxt)
    return table


def dqn_target(r, gamma, target_q_next):
    """``r + gamma * max_a Q_target(s', a)``; batched along the first axis."""
    return np.asarray(r, dtype=float) + gamma * np.max(target_q_next, axis=-1)


def ddqn_target(r, gamma, online_q_next, target_q_next):
    """Online network picks the action, target network evaluates it."""
    online_q_next = np.asarray(online_q_next)
    target_q_next = np.asarray(target_q_next)
    if online_q_next.shape != target_q_next.shape:
        raise ValueError("online and target outputs must have the same shape")
    pick = np.argmax(online_q_next, axis=-1)
    chosen = np.take_along_axis(target_q_next, np.expand_dims(pick, -1), axis=-1)[..., 0]
    return np.asarray(r, dtype=float) + gamma * chosen


def default_epsilon(kind, episodes):
    """Decaying schedule for D3QN that reaches its floor at 80% of training;
    0.1 otherwise."""
    if kind == "d3qn":
        return EpsilonSchedule(0.9, 0.1, max(1.0, 0.8 * episodes))
    return FixedEpsilon(0.1)


@dataclass
class AgentConfig:
    kind: str = "d3qn"
    lr: float = 0.01
    gamma: float = 0.7
    sync_every: int = 100
    batch_size: int = 32
    capacity: int = 100_000
    warmup: int = 500
    hidden: tuple = (128, 128)
    epsilon: object = None  # EpsilonSchedule, FixedEpsilon or None for the kind's default
    tabular_alpha: float = 0.1
    reward_scale: float = 1.0  # learners see reward * reward_scale; greedy actions are unaffected

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}; expected one of {AGENT_KINDS}")
        if not 0.0 < self.lr <= 1.0:
            raise ConfigError("learning rate must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("discount must lie in [0, 1)")
        if self.batch_size < 1 or self.sync_every < 1:
            raise ConfigError("batch size and sync period must be >= 1")

    def schedule(self, episodes):
        return self.epsilon if self.epsilon is not None else default_epsilon(self.kind, episodes)


class RandomAgent:
    def __init__(self, n_actions, rng):
        self.n_actions = n_actions
        self.rng = rng

    def act(self, obs, eps, key=None):
        return int(self.rng.integers(self.n_actions))

    def observe(self, obs, action, reward, next_obs, key=None, next_key=None):
        return None


class QTableAgent:
    """Hash-keyed sparse table over discretized environment states."""

    def __init__(self, n_actions, cfg, rng):
        self.n_actions = n_actions
        self.cfg = cfg
        self.rng = rng
        self.table = {}

    def act(self, obs, eps, key=None):
        row = self.table.get(key)
        q = np.zeros(self.n_actions) if row is None else row
        return select_action(q, eps, self.rng)

    def observe(self, obs, action, reward, next_obs, key=None, next_key=None):
        q_table_update(self.table, key, action, reward * self.cfg.reward_scale, next_key, self.cfg.tabular_alpha,
                       self.cfg.gamma, self.n_actions)
        return None


class DeepQAgent:
    """Online/target network pair trained from a replay buffer."""

    def __init__(self, state_size, n_actions, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        self.n_actions = n_actions
        self.online = init_params([state_size, *cfg.hidden, n_actions], rng)
        self.target = self.online.copy()
        self.buffer = ReplayBuffer(cfg.capacity, state_size)
        self.learner_steps = 0
        self.double = cfg.kind in ("ddqn", "d3qn")

    def q_values(self, obs):
        return forward(self.online, obs)

    def act(self, obs, eps, key=None):
        return select_action(self.q_values(obs), eps, self.rng)

    def observe(self, obs, action, reward, next_obs, key=None, next_key=None):
        self.buffer.push(Transition(obs, action, reward * self.cfg.reward_scale, next_obs))
        if len(self.buffer) < max(self.cfg.warmup, self.cfg.batch_size):
            return None
        return self.learn()

    def learn(self):
        s, a, r, s2 = self.buffer.sample(self.cfg.batch_size, self.rng)
        tq = forward(self.target, s2)
        if self.double:
            y = ddqn_target(r, self.cfg.gamma, forward(self.online, s2), tq)
        else:
            y = dqn_target(r, self.cfg.gamma, tq)
        loss, grad = loss_and_gradient(self.online, s, a, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss after {self.learner_steps} updates at learning rate "
                f"{self.cfg.lr}; try a smaller learning rate")
        self.online = apply_update(self.online, grad, self.cfg.lr)
        self.learner_steps += 1
        if self.learner_steps % self.cfg.sync_every == 0:
            self.target = self.online.copy()
        return loss


def make_agent(env, cfg, rng):
    if cfg.kind == "random":
        return RandomAgent(env.n_actions, rng)
    if cfg.kind == "q_table":
        return QTableAgent(env.n_actions, cfg, rng)
    return DeepQAgent(env.state_size, env.n_actions, cfg, rng)


@dataclass
class EpisodeRecord:
    episode: int
    cumulative_reward: float
    mean_ee: float
    epsilon: float
    loss_mean: float
    violations: int
    mean_mos: float = float("nan")  # kept in memory, not part of the CSV log
    mean_power: float = float("nan")

    def row(self):
        return [self.episode, f"{self.cumulative_reward:.10g}", f"{self.mean_ee:.10g}",
                f"{self.epsilon:.10g}", f"{self.loss_mean:.10g}", self.violations]


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    visits: list = field(default_factory=list)  # (episode, ris position, ee) per step

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for r in self.records:
                w.writerow(r.row())

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != LOG_COLUMNS:
                raise ValueError(f"{path}: expected columns {LOG_COLUMNS}")
            return cls([EpisodeRecord(int(r["episode"]), float(r["cumulative_reward"]),
                                      float(r["mean_ee"]), float(r["epsilon"]),
                                      float(r["loss_mean"]), int(r["violations"]))
                        for r in reader])


def train(env, cfg, episodes, steps_per_episode, seed=0, log_path=None, record_visits=False):
    """Run the episode loop; returns ``(agent, TrainingLog)``.

    Exploration follows the configured schedule indexed by episode. Deep
    agents store every transition and take one minibatch step per
    environment step once the buffer holds ``warmup`` transitions.
    """
    if episodes < 0 or steps_per_episode < 1:
        raise ConfigError("need episodes >= 0 and steps_per_episode >= 1")
    rng = np.random.default_rng(seed)
    agent = make_agent(env, cfg, rng)
    schedule = cfg.schedule(episodes)
    out = TrainingLog()
    tabular = cfg.kind == "q_table"
    for m in range(episodes):
        env.reset()
        eps = schedule(m)
        obs = env.observe()
        key = env.state_key() if tabular else None
        total, ees, losses, qs, ps = 0.0, [], [], [], []
        v0 = env.stats.violations
        for _ in range(steps_per_episode):
            action = agent.act(obs, eps, key=key)
            res = env.step(action)
            nxt = env.observe()
            nkey = env.state_key() if tabular else None
            loss = agent.observe(obs, action, res.reward, nxt, key=key, next_key=nkey)
            if loss is not None:
                losses.append(loss)
            total += res.reward
            ees.append(res.ee)
            qs.append(res.sum_mos)
            ps.append(res.total_power)
            if record_visits:
                out.visits.append((m, tuple(env.state.ris_pos), res.ee))
            obs, key = nxt, nkey
        rec = EpisodeRecord(m, total, float(np.mean(ees)), eps,
                            float(np.mean(losses)) if losses else 0.0,
                            env.stats.violations - v0, float(np.mean(qs)), float(np.mean(ps)))
        out.records.append(rec)
        log.debug("episode %d reward %.4g mean EE %.4g eps %.3f", m, total, rec.mean_ee, eps)
    if log_path is not None:
        out.write_csv(log_path)
    return agent, out


def moving_average(x, window):
    x = np.asarray(x, dtype=float)
    if window < 1 or x.size < window:
        return np.array([])
    c = np.cumsum(np.insert(x, 0, 0.0))
    return (c[window:] - c[:-window]) / window
