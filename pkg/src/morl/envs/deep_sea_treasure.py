"""Deep Sea Treasure: an 11 x 10 gridworld whose Pareto front is known exactly."""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from morl.core import ContractViolation, DiscreteSpace, EpisodicEnv, MomdpModel
from morl.sets import SolutionSet, pareto_prune

UP, DOWN, LEFT, RIGHT = range(4)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


@dataclass(frozen=True)
class DeepSeaTreasureConfig:
    rows: int = 11
    cols: int = 10
    # Row of the treasure in each column; cells below it are seabed.
    treasure_depths: tuple[int, ...] = (1, 2, 3, 4, 4, 4, 7, 7, 9, 10)
    treasure_values: tuple[float, ...] = (1, 2, 3, 5, 8, 16, 24, 50, 74, 124)
    step_penalty: float = -1.0
    horizon: int = 200
    start: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if len(self.treasure_depths) != self.cols or len(self.treasure_values) != self.cols:
            raise ValueError("need exactly one treasure per column")
        if any(not 0 < d < self.rows for d in self.treasure_depths):
            raise ValueError("treasure depths must lie strictly inside the grid")

    def to_json(self) -> str:
        return json.dumps({"name": "deep_sea_treasure", **asdict(self)}, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def passable(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols and row <= self.treasure_depths[col]

    def treasure_at(self, row: int, col: int) -> float | None:
        if 0 <= col < self.cols and row == self.treasure_depths[col]:
            return float(self.treasure_values[col])
        return None


def dst_step(config: DeepSeaTreasureConfig, position: tuple[int, int], action: int):
    """One deterministic move: ``(position', reward(treasure, time), reached_treasure)``.

    Moves into walls or seabed leave the submarine in place.
    """
    row, col = position
    if not config.passable(row, col) or config.treasure_at(row, col) is not None:
        raise ContractViolation(f"{position} is not a non-terminal sea cell")
    dr, dc = _MOVES[int(action)]
    nxt = (row + dr, col + dc)
    if not config.passable(*nxt):
        nxt = position
    treasure = config.treasure_at(*nxt)
    reward = np.array([treasure or 0.0, config.step_penalty])
    return nxt, reward, treasure is not None


class DeepSeaTreasure(EpisodicEnv):
    num_objectives = 2
    action_space = DiscreteSpace(4)

    def __init__(self, config: DeepSeaTreasureConfig | None = None):
        super().__init__()
        self.config = config or DeepSeaTreasureConfig()
        self.horizon = self.config.horizon
        self.observation_space = DiscreteSpace(self.config.rows * self.config.cols)
        self.position = self.config.start

    def _reset(self, rng):
        self.position = self.config.start
        return self._observe()

    def _observe(self) -> int:
        return self.position[0] * self.config.cols + self.position[1]

    def _step(self, action, rng):
        self.position, reward, terminal = dst_step(self.config, self.position, int(action))
        return self._observe(), reward, terminal


def sea_cells(config: DeepSeaTreasureConfig) -> list[tuple[int, int]]:
    """Passable non-treasure cells, row-major."""
    return [(r, c) for r in range(config.rows) for c in range(config.cols)
            if config.passable(r, c) and config.treasure_at(r, c) is None]


@functools.lru_cache(maxsize=None)
def _shortest_returns(config: DeepSeaTreasureConfig) -> tuple[tuple[float, float], ...]:
    # Breadth-first search from the start; a treasure cell ends the episode.
    dist = {config.start: 0}
    frontier = [config.start]
    found: dict[tuple[int, int], int] = {}
    while frontier:
        nxt_frontier = []
        for cell in frontier:
            for action in _MOVES:
                nxt, _, hit = dst_step(config, cell, action)
                if nxt in dist or nxt in found:
                    continue
                if hit:
                    found[nxt] = dist[cell] + 1
                else:
                    dist[nxt] = dist[cell] + 1
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return tuple(
        (config.treasure_at(*cell), config.step_penalty * steps)
        for cell, steps in sorted(found.items(), key=lambda kv: kv[0][1])
        if steps <= config.horizon
    )


def dst_true_front(config: DeepSeaTreasureConfig | None = None) -> SolutionSet:
    """Undiscounted Pareto front: the shortest path to each treasure."""
    config = config or DeepSeaTreasureConfig()
    front = SolutionSet.from_values(_shortest_returns(config))
    return pareto_prune(front)


def dst_momdp(config: DeepSeaTreasureConfig | None = None, gamma: float = 1.0) -> MomdpModel:
    """Time-expanded tabular model: state ``(cell, t)`` for ``t < horizon`` plus one absorbing
    terminal state (index 0). The state graph is acyclic apart from the terminal self-loop."""
    config = config or DeepSeaTreasureConfig()
    cells = sea_cells(config)
    index = {(cell, t): 1 + t * len(cells) + i for t in range(config.horizon) for i, cell in enumerate(cells)}
    zero = np.zeros(2)
    edges = [(0, a, 0, 1.0, zero) for a in _MOVES]
    for (cell, t), s in index.items():
        for a in _MOVES:
            nxt, reward, hit = dst_step(config, cell, a)
            done = hit or t + 1 >= config.horizon
            edges.append((s, a, 0 if done else index[(nxt, t + 1)], 1.0, reward))
    initial = np.zeros(1 + len(index))
    initial[index[(config.start, 0)]] = 1.0
    return MomdpModel(1 + len(index), 4, edges, gamma, initial)


def dst_start_state(config: DeepSeaTreasureConfig | None = None) -> int:
    config = config or DeepSeaTreasureConfig()
    return 1 + sea_cells(config).index(config.start)
