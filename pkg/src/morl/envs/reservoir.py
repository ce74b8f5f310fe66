"""Single-reservoir water control: trade off upstream flooding against unmet downstream demand.

State is the stored volume; the action is the requested release. Inflow is
Gaussian truncated at zero and on average below the demand, so meeting future
demand requires holding water, which raises the flooding risk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from morl.core import BoxSpace, ContractViolation, EpisodicEnv, discounted_sums

OBJECTIVE_NAMES = ("flooding", "water-demand")


@dataclass(frozen=True)
class WaterReservoirConfig:
    capacity: float = 100.0
    flood_threshold: float = 50.0
    demand: float = 10.0
    inflow_mean: float = 8.0
    inflow_std: float = 2.0
    initial_low: float = 20.0
    initial_high: float = 80.0
    horizon: int = 100
    max_release: float = 100.0

    def __post_init__(self):
        if not self.inflow_mean < self.demand:
            raise ValueError("mean inflow must be below demand for the objectives to conflict")
        if not 0 <= self.initial_low <= self.initial_high <= self.capacity:
            raise ValueError("initial storage range must lie within [0, capacity]")

    def to_json(self) -> str:
        return json.dumps({"name": "water_reservoir", **asdict(self)}, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def reservoir_step(
    config: WaterReservoirConfig,
    storage: float,
    requested_release: float,
    rng: np.random.Generator | None = None,
    inflow: float | None = None,
):
    """Advance one step. Returns ``(storage', reward(flood, demand), actual_release, inflow)``.

    ``inflow`` overrides the random draw; otherwise one normal variate is taken from ``rng``.
    """
    if not 0.0 <= storage <= config.capacity:
        raise ContractViolation(f"storage {storage} outside [0, {config.capacity}]")
    release = min(max(float(requested_release), 0.0), storage)
    mid = storage - release
    if inflow is None:
        inflow = max(0.0, rng.normal(config.inflow_mean, config.inflow_std))
    overflow = max(0.0, mid + inflow - config.capacity)
    new_storage = min(mid + inflow, config.capacity)
    flood = -max(new_storage - config.flood_threshold, 0.0) - overflow
    deficit = -max(config.demand - release, 0.0)
    return new_storage, np.array([flood, deficit]), release, inflow


class WaterReservoir(EpisodicEnv):
    num_objectives = 2
    objective_names = OBJECTIVE_NAMES

    def __init__(self, config: WaterReservoirConfig | None = None):
        super().__init__()
        self.config = config or WaterReservoirConfig()
        self.horizon = self.config.horizon
        self.action_space = BoxSpace((0.0,), (self.config.max_release,))
        self.observation_space = BoxSpace((0.0,), (self.config.capacity,))
        self.storage = 0.0
        self.last_release = 0.0
        self.last_inflow = 0.0

    def _reset(self, rng):
        self.storage = float(rng.uniform(self.config.initial_low, self.config.initial_high))
        return np.array([self.storage])

    def _step(self, action, rng):
        requested = float(np.asarray(action, dtype=float).reshape(-1)[0])
        self.storage, reward, self.last_release, self.last_inflow = reservoir_step(
            self.config, self.storage, requested, rng
        )
        return np.array([self.storage]), reward, False

    def vector_rollout(
        self,
        act: Callable[[np.ndarray], np.ndarray],
        rngs: Sequence[np.random.Generator],
        gamma: float,
        copies: int = 1,
    ) -> np.ndarray:
        """Run episodes in lockstep and return their ``(copies * len(rngs), 2)`` discounted returns.

        Each generator is consumed exactly as ``rollout`` would consume it: the
        initial storage, then one inflow per step. With ``copies > 1`` every
        generator's draws drive ``copies`` episodes, ordered copy-major, so that
        several policies face identical exogenous noise. ``act`` maps a ``(B, 1)``
        batch of observations to ``(B,)`` or ``(B, 1)`` requested releases.
        """
        cfg = self.config
        H = cfg.horizon
        storage = np.empty(len(rngs))
        inflow = np.empty((len(rngs), H))
        for b, rng in enumerate(rngs):
            storage[b] = rng.uniform(cfg.initial_low, cfg.initial_high)
            inflow[b] = rng.normal(cfg.inflow_mean, cfg.inflow_std, size=H)
        np.maximum(inflow, 0.0, out=inflow)
        storage = np.tile(storage, copies)
        inflow = np.tile(inflow, (copies, 1))
        B = len(storage)
        rewards = np.empty((B, H, 2))
        for t in range(H):
            requested = np.asarray(act(storage[:, None]), dtype=float).reshape(B)
            if np.any(requested < 0) or np.any(requested > cfg.max_release) or not np.all(np.isfinite(requested)):
                raise ContractViolation("requested release outside the action box")
            release = np.minimum(requested, storage)
            mid = storage - release
            total = mid + inflow[:, t]
            overflow = np.maximum(0.0, total - cfg.capacity)
            storage = np.minimum(total, cfg.capacity)
            rewards[:, t, 0] = -np.maximum(storage - cfg.flood_threshold, 0.0) - overflow
            rewards[:, t, 1] = -np.maximum(cfg.demand - release, 0.0)
        return discounted_sums(rewards, gamma)
