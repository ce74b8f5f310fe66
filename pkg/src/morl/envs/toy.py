"""Small fixture environments with closed-form returns."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from morl.core import DiscreteSpace, EpisodicEnv


class ScriptedEnv(EpisodicEnv):
    """Deterministic environment that emits a fixed reward sequence, one per step."""

    def __init__(self, rewards: Sequence[Sequence[float]], num_actions: int = 1):
        super().__init__()
        self.rewards = [np.asarray(r, dtype=float) for r in rewards]
        self.num_objectives = self.rewards[0].shape[0]
        self.horizon = len(self.rewards)
        self.action_space = DiscreteSpace(num_actions)
        self.observation_space = DiscreteSpace(self.horizon + 1)

    def _reset(self, rng):
        return 0

    def _step(self, action, rng):
        t = self._t
        return t + 1, self.rewards[t].copy(), t + 1 == self.horizon


class CoinFlipEnv(EpisodicEnv):
    """One-step environment paying ``(2, 0)`` or ``(0, 2)`` with probability 1/2 each."""

    num_objectives = 2
    horizon = 1
    action_space = DiscreteSpace(1)
    observation_space = DiscreteSpace(1)

    def __init__(self, payoff: float = 2.0):
        super().__init__()
        self.payoff = payoff

    def _reset(self, rng):
        return 0

    def _step(self, action, rng):
        if rng.random() < 0.5:
            return 0, np.array([self.payoff, 0.0]), True
        return 0, np.array([0.0, self.payoff]), True
