"""Separable natural evolution strategies over policy-network weights.

``mones_train`` scores each sampled policy with the rank + crowding indicator
of its mean return; ``nes_train`` scores it with a scalar utility of the mean
return; ``outer_loop_nes`` repeats ``nes_train`` over utilities drawn from a prior.
Both trainers share ``nes_update`` and ``evaluate_population``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import rankdata

from morl.algorithms.ranking import mones_indicator
from morl.core import BoxSpace, DiscreteSpace, derive_rng, draw_base_seed, rollout
from morl.indicators import UtilityPrior
from morl.sets import SolutionSet
from morl.utility import UtilityFunction

HIDDEN_UNITS = 50


class TrainingError(RuntimeError):
    pass


class PolicyNetwork:
    """One tanh hidden layer; continuous outputs are squashed into the action box, discrete ones argmaxed.

    Flat parameter layout: ``W1 (in, H)``, ``b1 (H)``, ``W2 (H, out)``, ``b2 (out)``.
    """

    def __init__(self, observation_space, action_space, hidden: int = HIDDEN_UNITS):
        self.observation_space = observation_space
        self.action_space = action_space
        self.hidden = hidden
        if isinstance(observation_space, DiscreteSpace):
            self.in_dim = observation_space.n
        else:
            self.in_dim = observation_space.shape[0]
            self._obs_low = np.asarray(observation_space.low, dtype=float)
            self._obs_span = np.asarray(observation_space.high, dtype=float) - self._obs_low
        if isinstance(action_space, DiscreteSpace):
            self.out_dim = action_space.n
        else:
            self.out_dim = action_space.shape[0]
            self._act_low = np.asarray(action_space.low, dtype=float)
            self._act_span = np.asarray(action_space.high, dtype=float) - self._act_low

    @property
    def num_params(self) -> int:
        return (self.in_dim + 1) * self.hidden + (self.hidden + 1) * self.out_dim

    def topology(self) -> dict:
        return {"input": self.in_dim, "hidden": self.hidden, "output": self.out_dim,
                "hidden_activation": "tanh",
                "action": "argmax" if isinstance(self.action_space, DiscreteSpace) else "tanh_box"}

    def _unpack(self, params: np.ndarray):
        """Split ``(..., num_params)`` into weight tensors with matching leading dims."""
        i, h, o = self.in_dim, self.hidden, self.out_dim
        lead = params.shape[:-1]
        cuts = np.cumsum([i * h, h, h * o])
        w1, b1, w2, b2 = np.split(params, cuts, axis=-1)
        return w1.reshape(*lead, i, h), b1, w2.reshape(*lead, h, o), b2

    def _features(self, obs) -> np.ndarray:
        if isinstance(self.observation_space, DiscreteSpace):
            obs = np.asarray(obs, dtype=int)
            return np.eye(self.in_dim)[obs]
        obs = np.asarray(obs, dtype=float)
        return 2.0 * (obs - self._obs_low) / self._obs_span - 1.0

    def _to_actions(self, out: np.ndarray):
        if isinstance(self.action_space, DiscreteSpace):
            return np.argmax(out, axis=-1)
        return np.clip(self._act_low + 0.5 * (np.tanh(out) + 1.0) * self._act_span, self._act_low,
                       self._act_low + self._act_span)

    def act(self, params: np.ndarray, obs):
        """Action for one observation under one parameter vector."""
        w1, b1, w2, b2 = self._unpack(np.asarray(params, dtype=float))
        x = self._features(obs).reshape(-1)
        out = np.tanh(x @ w1 + b1) @ w2 + b2
        action = self._to_actions(out)
        return int(action) if isinstance(self.action_space, DiscreteSpace) else action

    def batch_act(self, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
        """Actions for ``params (P, n)`` and observations ``(P, B, ...)``; returns ``(P, B, ...)``."""
        w1, b1, w2, b2 = self._unpack(params)
        x = self._features(obs)
        if isinstance(self.observation_space, BoxSpace):
            x = x.reshape(params.shape[0], -1, self.in_dim)
        hidden = np.tanh(np.einsum("pbi,pih->pbh", x, w1) + b1[:, None, :])
        out = np.einsum("pbh,pho->pbo", hidden, w2) + b2[:, None, :]
        return self._to_actions(out)

    def policy(self, params: np.ndarray) -> Callable:
        params = np.asarray(params, dtype=float).copy()
        return lambda obs: self.act(params, obs)


@dataclass
class SearchDistribution:
    """Independent Gaussians, one per network parameter."""

    means: np.ndarray
    log_stds: np.ndarray

    @classmethod
    def initial(cls, num_params: int, mean: float = 0.0, std: float = 0.5) -> "SearchDistribution":
        return cls(np.full(num_params, float(mean)), np.full(num_params, math.log(std)))

    @property
    def stds(self) -> np.ndarray:
        return np.exp(self.log_stds)

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(thetas, noise)`` with ``thetas = means + stds * noise``."""
        noise = rng.standard_normal((n, self.means.shape[0]))
        return self.means + self.stds * noise, noise

    def copy(self) -> "SearchDistribution":
        return SearchDistribution(self.means.copy(), self.log_stds.copy())

    def to_dict(self) -> dict:
        return {"means": [float(x) for x in self.means], "log_stds": [float(x) for x in self.log_stds]}


@dataclass
class MonesConfig:
    """Shared settings of ``mones_train`` and ``nes_train``.

    The defaults were tuned on the water-reservoir fixture: a wider initial
    distribution or a larger mean step collapses MONES onto one corner of the front.
    """

    iterations: int = 30
    population: int = 50
    evals_per_policy: int = 10
    mean_learning_rate: float = 0.03
    log_std_learning_rate: float = 0.05
    initial_mean: float = 0.0
    initial_std: float = 0.1
    gamma: float = 1.0
    hidden: int = HIDDEN_UNITS
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.population < 2 or self.evals_per_policy < 1:
            raise ValueError("population must be at least 2 and evals_per_policy at least 1")
        if self.initial_std <= 0:
            raise ValueError("initial_std must be positive")

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def centered_ranks(fitness: np.ndarray) -> np.ndarray:
    """Fitness shaped to evenly spaced utilities in [-0.5, 0.5]; ties share their mean rank."""
    n = len(fitness)
    return (rankdata(fitness, method="average") - 1.0) / (n - 1) - 0.5


def nes_update(dist: SearchDistribution, noise: np.ndarray, fitness: np.ndarray,
               mean_lr: float, log_std_lr: float) -> SearchDistribution:
    """Natural-gradient step for separable Gaussians on rank-shaped fitness.

    With ``s`` the standardised samples and ``u`` the shaped utilities, the
    natural gradients are ``sigma^2 * sum(u s) / sigma`` for the means and
    ``sum(u (s^2 - 1)) / 2`` for the log standard deviations.
    """
    fitness = np.asarray(fitness, dtype=float)
    if not np.all(np.isfinite(fitness)):
        bad = np.flatnonzero(~np.isfinite(fitness)).tolist()
        raise TrainingError(f"non-finite fitness for population members {bad}")
    u = centered_ranks(fitness)
    grad_mean = u @ noise
    grad_log_std = u @ (noise**2 - 1.0)
    return SearchDistribution(
        dist.means + mean_lr * dist.stds * grad_mean,
        dist.log_stds + 0.5 * log_std_lr * grad_log_std,
    )


def evaluate_population(env, network: PolicyNetwork, thetas: np.ndarray, evals: int, gamma: float,
                        base_seed: int, common: bool = True) -> np.ndarray:
    """Mean discounted return of each parameter vector over ``evals`` episodes.

    With ``common`` (the default) every policy faces the same episodes: episode
    ``e`` draws from ``derive_rng(base_seed, e)``. Otherwise policy ``p`` uses
    ``derive_rng(base_seed, p, e)``. Either way the result is the same whether
    the environment offers ``vector_rollout`` or runs one ``rollout`` at a time.
    """
    P = thetas.shape[0]

    def stream(p, e):
        return derive_rng(base_seed, e) if common else derive_rng(base_seed, p, e)

    if hasattr(env, "vector_rollout"):
        def act(obs):
            return network.batch_act(thetas, obs.reshape(P, evals, -1))
        if common:
            returns = env.vector_rollout(act, [stream(0, e) for e in range(evals)], gamma, copies=P)
        else:
            returns = env.vector_rollout(act, [stream(p, e) for p in range(P) for e in range(evals)], gamma)
        returns = returns.reshape(P, evals, -1)
    else:
        returns = np.stack([
            np.stack([rollout(env, network.policy(thetas[p]), gamma, stream(p, e)).components
                      for e in range(evals)])
            for p in range(P)
        ])
    return np.array([[math.fsum(col) / evals for col in returns[p].T] for p in range(P)])


def _base_seed(rng) -> int:
    return int(rng) if isinstance(rng, (int, np.integer)) else draw_base_seed(rng)


class MonesResult(NamedTuple):
    distribution: SearchDistribution
    archive: list[SolutionSet]
    network: PolicyNetwork


def mones_train(env, config: MonesConfig, rng=None, callback=None) -> MonesResult:
    """Train a search distribution whose samples spread over the Pareto front.

    ``archive[i]`` holds the mean returns of the population sampled at iteration ``i``.
    ``rng`` may be a generator or an integer seed; it defaults to ``config.seed``.
    """
    seed = _base_seed(config.seed if rng is None else rng)
    network = PolicyNetwork(env.observation_space, env.action_space, config.hidden)
    dist = SearchDistribution.initial(network.num_params, config.initial_mean, config.initial_std)
    archive: list[SolutionSet] = []
    for it in range(config.iterations):
        thetas, noise = dist.sample(derive_rng(seed, it, 0), config.population)
        returns = evaluate_population(env, network, thetas, config.evals_per_policy, config.gamma,
                                      draw_base_seed(derive_rng(seed, it, 1)))
        if not np.all(np.isfinite(returns)):
            raise TrainingError(f"iteration {it}: non-finite mean return")
        archive.append(SolutionSet(list(enumerate(returns))))
        dist = nes_update(dist, noise, mones_indicator(returns), config.mean_learning_rate,
                          config.log_std_learning_rate)
        if callback is not None:
            callback(it, dist, returns)
    return MonesResult(dist, archive, network)


def sample_policies_returns(env, result: MonesResult, n: int, config: MonesConfig, seed: int) -> np.ndarray:
    """Mean returns of ``n`` fresh policies drawn from a trained distribution."""
    thetas, _ = result.distribution.sample(derive_rng(seed, 0), n)
    return evaluate_population(env, result.network, thetas, config.evals_per_policy, config.gamma,
                               draw_base_seed(derive_rng(seed, 1)))


@dataclass
class NesResult:
    params: np.ndarray
    network: PolicyNetwork
    distribution: SearchDistribution
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def policy(self) -> Callable:
        return self.network.policy(self.params)


def nes_train(env, u: Callable, config: MonesConfig, rng=None) -> NesResult:
    """Single-objective NES on ``u(mean return)``; the final policy uses the distribution means.

    ``history[i]`` holds the population's fitness at iteration ``i``.
    """
    seed = _base_seed(config.seed if rng is None else rng)
    network = PolicyNetwork(env.observation_space, env.action_space, config.hidden)
    dist = SearchDistribution.initial(network.num_params, config.initial_mean, config.initial_std)
    history = []
    for it in range(config.iterations):
        thetas, noise = dist.sample(derive_rng(seed, it, 0), config.population)
        returns = evaluate_population(env, network, thetas, config.evals_per_policy, config.gamma,
                                      draw_base_seed(derive_rng(seed, it, 1)))
        fitness = np.array([u(r) for r in returns], dtype=float)
        history.append(fitness)
        dist = nes_update(dist, noise, fitness, config.mean_learning_rate, config.log_std_learning_rate)
    return NesResult(dist.means.copy(), network, dist, history)


def policy_mean_return(env, result: NesResult, config: MonesConfig, seed: int) -> np.ndarray:
    return evaluate_population(env, result.network, result.params[None, :], config.evals_per_policy,
                               config.gamma, seed)[0]


class OuterLoopError(RuntimeError):
    def __init__(self, failures: list[tuple[int, Exception]]):
        self.failures = failures
        lines = "; ".join(f"run {i}: {type(e).__name__}: {e}" for i, e in failures)
        super().__init__(f"{len(failures)} outer-loop run(s) failed: {lines}")


def prior_utilities(prior: UtilityPrior, d: int) -> list[UtilityFunction]:
    if prior.kind == "uniform_linear_simplex":
        # Renormalise so float rounding never trips the weight-sum check.
        return [UtilityFunction.linear(w / math.fsum(w)) for w in prior.sample_weights(d)]
    return [prior.utilities[i] for i in prior.sample_indices()]


def outer_loop_nes(env, prior: UtilityPrior, config: MonesConfig, rng=None, runs: list[int] | None = None) -> SolutionSet:
    """One NES run per sampled utility; returns the final policies' mean returns, unpruned.

    Run ``i`` trains under seed ``derive(base, i)`` and is evaluated under
    ``derive(base, i, 1)``, so results do not depend on execution order.
    ``runs`` restricts execution to a subset of run indices (in any order).
    """
    seed = _base_seed(config.seed if rng is None else rng)
    utilities = prior_utilities(prior, env.num_objectives)
    order = range(len(utilities)) if runs is None else runs
    entries, failures = [], []
    for i in order:
        try:
            result = nes_train(env, utilities[i], config, draw_base_seed(derive_rng(seed, i)))
            value = policy_mean_return(env, result, config, draw_base_seed(derive_rng(seed, i, 1)))
        except Exception as exc:  # noqa: BLE001 - reported with the run index below
            failures.append((i, exc))
            continue
        entries.append((i, value))
    if failures:
        raise OuterLoopError(failures)
    return SolutionSet(entries)
