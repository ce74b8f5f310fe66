"""MOMDP abstractions, episodic rollouts and SER/ESR policy evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from morl.utility import NumericError, UtilityFunction

Policy = Callable[[Any], Any]


class ContractViolation(RuntimeError):
    """An environment or policy was used outside its declared contract."""


def derive_rng(base_seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``keys`` under ``base_seed``; identical however streams are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys)))


def draw_base_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


@dataclass(frozen=True)
class DiscreteSpace:
    n: int

    def contains(self, x) -> bool:
        try:
            return float(x) == int(x) and 0 <= int(x) < self.n
        except (TypeError, ValueError):
            return False


@dataclass(frozen=True)
class BoxSpace:
    low: tuple[float, ...]
    high: tuple[float, ...]

    @property
    def shape(self) -> tuple[int]:
        return (len(self.low),)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return x.shape == self.shape and bool(np.all(x >= self.low) and np.all(x <= self.high))


class Environment(Protocol):
    """Episodic simulator with vector rewards.

    ``step`` returns ``(observation, reward, terminal)``; the reward has exactly
    ``num_objectives`` components and episodes end no later than ``horizon``.
    """

    num_objectives: int
    horizon: int
    action_space: DiscreteSpace | BoxSpace
    observation_space: DiscreteSpace | BoxSpace

    def reset(self, rng: np.random.Generator) -> Any: ...

    def step(self, action: Any, rng: np.random.Generator) -> tuple[Any, np.ndarray, bool]: ...


class EpisodicEnv:
    """Bookkeeping shared by the bundled environments: step counting, terminal and bounds checks."""

    num_objectives: int
    horizon: int
    action_space: DiscreteSpace | BoxSpace
    observation_space: DiscreteSpace | BoxSpace

    def __init__(self):
        self._t = 0
        self._done = True

    def reset(self, rng: np.random.Generator):
        self._t = 0
        self._done = False
        return self._reset(rng)

    def step(self, action, rng: np.random.Generator):
        if self._done:
            raise ContractViolation("step called on a finished episode; call reset first")
        if not self.action_space.contains(action):
            raise ContractViolation(f"action {action!r} outside {self.action_space}")
        obs, reward, terminal = self._step(action, rng)
        self._t += 1
        terminal = terminal or self._t >= self.horizon
        self._done = terminal
        return obs, reward, terminal

    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, action, rng):
        raise NotImplementedError


@dataclass(frozen=True)
class EpisodeReturn:
    components: np.ndarray
    steps: int


def rollout(env: Environment, policy: Policy, gamma: float, rng: np.random.Generator) -> EpisodeReturn:
    """Run one episode and return its discounted vector return."""
    obs = env.reset(rng)
    rewards = []
    terminal = False
    while not terminal:
        obs, reward, terminal = env.step(policy(obs), rng)
        reward = np.asarray(reward, dtype=float)
        if reward.shape != (env.num_objectives,):
            raise ContractViolation(f"reward {reward} does not have {env.num_objectives} components")
        rewards.append(reward)
        if len(rewards) > env.horizon:
            raise ContractViolation(f"episode exceeded horizon {env.horizon}")
    return EpisodeReturn(discounted_sum(rewards, gamma, env.num_objectives), len(rewards))


def discounted_sum(rewards: Sequence[np.ndarray], gamma: float, d: int) -> np.ndarray:
    if not len(rewards):
        return np.zeros(d)
    return discounted_sums(np.asarray(rewards, dtype=float)[None], gamma)[0]


def discounted_sums(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Exactly rounded discounted sums of a ``(B, T, d)`` reward batch, as ``(B, d)``."""
    discounts = gamma ** np.arange(rewards.shape[1], dtype=float)
    weighted = rewards * discounts[None, :, None]
    return np.array([[math.fsum(weighted[b, :, j]) for j in range(rewards.shape[2])]
                     for b in range(rewards.shape[0])])


def _episode_returns(env, policy, gamma, n_episodes, rng) -> np.ndarray:
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    base = draw_base_seed(rng)
    return np.stack([rollout(env, policy, gamma, derive_rng(base, i)).components for i in range(n_episodes)])


def _mean_rows(returns: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(col) / len(col) for col in returns.T])


def estimate_mean_return(env, policy, gamma: float, n_episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo estimate of the expected discounted vector return."""
    return _mean_rows(_episode_returns(env, policy, gamma, n_episodes, rng))


def ser_from_returns(u: Callable, returns: np.ndarray) -> float:
    value = float(u(_mean_rows(returns)))
    if not math.isfinite(value):
        raise NumericError(f"utility is non-finite at the mean return {_mean_rows(returns).tolist()}")
    return value


def esr_from_returns(u: Callable, returns: np.ndarray) -> float:
    per_episode = [float(u(r)) for r in returns]
    if not all(math.isfinite(x) for x in per_episode):
        raise NumericError("utility is non-finite on some episode return")
    return math.fsum(per_episode) / len(per_episode)


def ser_value(env, policy, u: Callable | UtilityFunction, gamma: float, n_episodes: int, rng) -> float:
    """Scalarised expected return: utility of the mean return."""
    return ser_from_returns(u, _episode_returns(env, policy, gamma, n_episodes, rng))


def esr_value(env, policy, u: Callable | UtilityFunction, gamma: float, n_episodes: int, rng) -> float:
    """Expected scalarised return: mean of the per-episode utility."""
    return esr_from_returns(u, _episode_returns(env, policy, gamma, n_episodes, rng))


def sample_returns(env, policy, gamma: float, n_episodes: int, rng) -> np.ndarray:
    """The ``(n_episodes, d)`` batch of returns ``ser_value``/``esr_value`` would draw from ``rng``."""
    return _episode_returns(env, policy, gamma, n_episodes, rng)


class MomdpModel:
    """Finite tabular MOMDP stored as a sparse edge list.

    Edge ``k`` says that action ``action[k]`` in state ``state[k]`` leads to
    ``next_state[k]`` with probability ``prob[k]`` and vector reward ``reward[k]``.
    """

    def __init__(self, num_states: int, num_actions: int, edges, gamma: float, initial_dist):
        """``edges`` is an iterable of ``(s, a, s_next, p, reward_vector)``; zero-probability
        edges are dropped and repeated ``(s, a, s_next)`` triples must agree on the reward."""
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.gamma = float(gamma)
        self.initial_dist = np.asarray(initial_dist, dtype=float)
        merged: dict[tuple[int, int, int], list] = {}
        dims = set()
        for s, a, t, p, r in edges:
            r = np.asarray(r, dtype=float)
            dims.add(r.shape)
            if p == 0:
                continue
            key = (int(s), int(a), int(t))
            if key in merged:
                if not np.array_equal(merged[key][1], r):
                    raise ValueError(f"conflicting rewards for transition {key}")
                merged[key][0] += float(p)
            else:
                merged[key] = [float(p), r]
        keys = sorted(merged)
        if not keys:
            raise ValueError("a MOMDP needs at least one transition")
        self.state = np.array([k[0] for k in keys], dtype=np.int64)
        self.action = np.array([k[1] for k in keys], dtype=np.int64)
        self.next_state = np.array([k[2] for k in keys], dtype=np.int64)
        self.prob = np.array([merged[k][0] for k in keys], dtype=float)
        if len(dims) != 1:
            raise ValueError(f"all reward vectors must have the same length, got {sorted(dims)}")
        self.reward = np.stack([merged[k][1] for k in keys])
        self._validate()
        self._rows: dict[tuple[int, int], slice] = {}
        start = 0
        sa = self.state * self.num_actions + self.action
        bounds = np.flatnonzero(np.diff(sa)) + 1
        for stop in [*bounds.tolist(), len(sa)]:
            self._rows[(int(self.state[start]), int(self.action[start]))] = slice(start, stop)
            start = stop

    @classmethod
    def from_dense(cls, transition, reward, gamma: float, initial_dist) -> "MomdpModel":
        transition = np.asarray(transition, dtype=float)
        reward = np.asarray(reward, dtype=float)
        S, A = transition.shape[:2]
        if transition.shape != (S, A, S):
            raise ValueError(f"transition table must be (S, A, S), got {transition.shape}")
        if reward.ndim != 4 or reward.shape[:3] != (S, A, S):
            raise ValueError(f"reward table must be (S, A, S, d), got {reward.shape}")
        edges = [(s, a, t, transition[s, a, t], reward[s, a, t]) for s, a, t in zip(*np.nonzero(transition))]
        return cls(S, A, edges, gamma, initial_dist)

    @property
    def num_objectives(self) -> int:
        return self.reward.shape[1]

    def _validate(self):
        S, A = self.num_states, self.num_actions
        if S < 1 or A < 1:
            raise ValueError("a MOMDP needs at least one state and one action")
        if self.reward.shape[1] < 2:
            raise ValueError("a MOMDP needs at least two objectives")
        if np.any(self.state >= S) or np.any(self.next_state >= S) or np.any(self.action >= A):
            raise ValueError("edge refers to a state or action out of range")
        if np.any(self.prob < 0) or np.any(self.prob > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        totals = np.zeros(S * A)
        np.add.at(totals, self.state * A + self.action, self.prob)
        if np.any(np.abs(totals - 1.0) > 1e-9):
            bad = int(np.argmax(np.abs(totals - 1.0)))
            raise ValueError(f"transition row (s={bad // A}, a={bad % A}) sums to {totals[bad]}, not 1")
        if self.initial_dist.shape != (S,) or np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must be a probability vector over states")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    def outcomes(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(next_states, probs, rewards)`` for the state-action pair."""
        sl = self._rows[(s, a)]
        return self.next_state[sl], self.prob[sl], self.reward[sl]

    def absorbing_states(self) -> np.ndarray:
        """States whose every action self-loops with zero reward."""
        loops = (self.state == self.next_state) & (self.prob == 1.0) & np.all(self.reward == 0.0, axis=1)
        count = np.bincount(self.state[loops], minlength=self.num_states)
        return count == self.num_actions

    def topological_order(self) -> list[int] | None:
        """States ordered so successors come later, ignoring absorbing self-loops; None if cyclic."""
        absorbing = self.absorbing_states()
        keep = ~((self.state == self.next_state) & absorbing[self.state])
        pairs = sorted(set(zip(self.state[keep].tolist(), self.next_state[keep].tolist())))
        succ: list[list[int]] = [[] for _ in range(self.num_states)]
        indeg = [0] * self.num_states
        for s, t in pairs:
            succ[s].append(t)
            indeg[t] += 1
        order = [s for s in range(self.num_states) if indeg[s] == 0]
        i = 0
        while i < len(order):
            for t in succ[order[i]]:
                indeg[t] -= 1
                if indeg[t] == 0:
                    order.append(t)
            i += 1
        return order if len(order) == self.num_states else None

    def scaled(self, c: float) -> "MomdpModel":
        """Same dynamics with every reward multiplied by ``c``."""
        edges = zip(self.state, self.action, self.next_state, self.prob, self.reward * c)
        return MomdpModel(self.num_states, self.num_actions, edges, self.gamma, self.initial_dist)

    def to_json(self) -> str:
        doc = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "num_objectives": self.num_objectives,
            "gamma": self.gamma,
            "transitions": [[int(s), int(a), int(t), float(p)]
                            for s, a, t, p in zip(self.state, self.action, self.next_state, self.prob)],
            "rewards": [[int(s), int(a), int(t), [float(x) for x in r]]
                        for s, a, t, r in zip(self.state, self.action, self.next_state, self.reward)],
            "initial": [float(p) for p in self.initial_dist],
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "MomdpModel":
        doc = json.loads(text)
        d = doc["num_objectives"]
        rewards = {}
        for s, a, t, r in doc["rewards"]:
            if len(r) != d:
                raise ValueError(f"reward for {(s, a, t)} has {len(r)} components, expected {d}")
            rewards[(s, a, t)] = r
        edges = [(s, a, t, p, rewards.get((s, a, t), [0.0] * d)) for s, a, t, p in doc["transitions"]]
        return cls(doc["num_states"], doc["num_actions"], edges, doc["gamma"], doc["initial"])


class TabularEnv(EpisodicEnv):
    """Simulator for a ``MomdpModel``; episodes end on absorbing states or the horizon."""

    def __init__(self, model: MomdpModel, horizon: int = 1000):
        super().__init__()
        self.model = model
        self.horizon = horizon
        self.num_objectives = model.num_objectives
        self.action_space = DiscreteSpace(model.num_actions)
        self.observation_space = DiscreteSpace(model.num_states)
        self._absorbing = model.absorbing_states()
        self._state = 0

    def _reset(self, rng):
        self._state = int(rng.choice(self.model.num_states, p=self.model.initial_dist))
        return self._state

    def _step(self, action, rng):
        nxt, probs, rewards = self.model.outcomes(self._state, int(action))
        k = int(rng.choice(len(nxt), p=probs))
        self._state = int(nxt[k])
        return self._state, rewards[k].copy(), bool(self._absorbing[self._state])
