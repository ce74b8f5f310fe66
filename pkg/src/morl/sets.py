"""Dominance relations, Lorenz ordering and solution-set pruning.

Value vectors are plain 1-d float arrays. Comparisons are exact on the stored
binary64 values; tolerances belong to the indicators that declare them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Hashable, Iterable, Sequence

import numpy as np

RAW = "raw"
PARETO_PRUNED = "pareto_pruned"
CCS_PRUNED = "ccs_pruned"

# Per-axis resolution of the deterministic weight grid.
WEIGHT_GRID_RESOLUTION = 200
# Largest grid the d >= 3 CCS pruner will enumerate.
_MAX_GRID_POINTS = 250_000


class DimensionMismatch(ValueError):
    pass


def as_value_vector(v: Sequence[float]) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"value vector must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"value vector has non-finite components: {arr}")
    return arr


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


@dataclass
class SolutionSet:
    """Finite collection of ``(policy_id, value)`` pairs plus pruning state."""

    entries: list[tuple[Hashable, np.ndarray]] = field(default_factory=list)
    pruning_state: str = RAW

    @classmethod
    def from_values(cls, values: Iterable[Sequence[float]], pruning_state: str = RAW) -> "SolutionSet":
        return cls([(i, as_value_vector(v)) for i, v in enumerate(values)], pruning_state)

    def __post_init__(self):
        self.entries = [(pid, as_value_vector(v)) for pid, v in self.entries]
        dims = {v.shape[0] for _, v in self.entries}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed dimensionalities in solution set: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def num_objectives(self) -> int:
        if not self.entries:
            raise ValueError("empty solution set has no dimensionality")
        return self.entries[0][1].shape[0]

    @property
    def policy_ids(self) -> list:
        return [pid for pid, _ in self.entries]

    def values(self) -> np.ndarray:
        """Entries' value vectors stacked as an ``(n, d)`` array."""
        if not self.entries:
            return np.zeros((0, 0))
        return np.stack([v for _, v in self.entries])

    def value_tuples(self) -> list[tuple[float, ...]]:
        return [tuple(float(x) for x in v) for _, v in self.entries]

    def to_csv(self, columns: Sequence[str] | None = None, extra: dict[str, str] | None = None) -> str:
        """Serialise as CSV text: ``policy_id, v0 … v(d-1)`` plus optional constant columns."""
        d = self.num_objectives if self.entries else len(columns or ())
        names = list(columns) if columns is not None else [f"v{i}" for i in range(d)]
        if len(names) != d:
            raise DimensionMismatch(f"{len(names)} column names for {d} objectives")
        extra = extra or {}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["policy_id", *names, *extra])
        for pid, v in self.entries:
            writer.writerow([pid, *(repr(float(x)) for x in v), *extra.values()])
        return buf.getvalue()


def pareto_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_dims(a, b)
    return bool(np.all(a >= b) and np.any(a > b))


def _dominated_mask(values: np.ndarray) -> np.ndarray:
    """``mask[i]`` is True when some row Pareto-dominates row ``i``."""
    ge = np.all(values[:, None, :] >= values[None, :, :], axis=2)
    gt = np.any(values[:, None, :] > values[None, :, :], axis=2)
    return np.any(ge & gt, axis=0)


def _first_occurrences(values: np.ndarray, policy_ids: list) -> list[int]:
    """Index of one representative per distinct value vector, lowest policy id wins."""
    chosen: dict[tuple, int] = {}
    for i, v in enumerate(values):
        key = tuple(v.tolist())
        j = chosen.get(key)
        if j is None or _id_key(policy_ids[i]) < _id_key(policy_ids[j]):
            chosen[key] = i
    return sorted(chosen.values())


def _id_key(pid):
    # Mixed id types still need a total order for the tie rule.
    return (0, pid) if isinstance(pid, (int, float)) else (1, str(pid))


def pareto_prune(solutions: SolutionSet) -> SolutionSet:
    """Maximal non-dominated subset; value-identical entries collapse to one."""
    if not solutions.entries:
        return SolutionSet([], PARETO_PRUNED)
    values = solutions.values()
    keep = _first_occurrences(values, solutions.policy_ids)
    dominated = _dominated_mask(values[keep])
    kept = [solutions.entries[i] for i, dom in zip(keep, dominated) if not dom]
    return SolutionSet(kept, PARETO_PRUNED)


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _upper_hull_2d(front: list[tuple[Hashable, np.ndarray]]) -> list[tuple[Hashable, np.ndarray]]:
    # A Pareto front sorted by objective 0 ascending is sorted by objective 1 descending.
    pts = sorted(front, key=lambda e: (e[1][0], -e[1][1]))
    hull: list[tuple[Hashable, np.ndarray]] = []
    for entry in pts:
        while len(hull) >= 2 and _cross(hull[-2][1], hull[-1][1], entry[1]) >= 0:
            hull.pop()
        hull.append(entry)
    return hull


def simplex_grid(d: int, resolution: int = WEIGHT_GRID_RESOLUTION) -> np.ndarray:
    """All weight vectors on the simplex whose components are multiples of ``1/resolution``."""
    if d < 1:
        raise ValueError("d must be positive")
    if d == 2:
        w0 = np.arange(resolution + 1) / resolution
        return np.column_stack([w0, 1.0 - w0])
    rows = []
    for bins in combinations_with_replacement(range(d), resolution):
        rows.append(np.bincount(bins, minlength=d))
    return np.asarray(rows, dtype=float) / resolution


def _grid_size(d: int, resolution: int) -> int:
    return math.comb(resolution + d - 1, d - 1)


def _mixture_dominated(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    """Whether some ``lam*a + (1-lam)*b`` with ``lam`` in [0, 1] weakly dominates ``v``."""
    lo, hi = 0.0, 1.0
    for ai, bi, vi in zip(a, b, v):
        slope, need = ai - bi, vi - bi
        if slope > 0:
            lo = max(lo, need / slope)
        elif slope < 0:
            hi = min(hi, need / slope)
        elif need > 0:
            return False
        if lo > hi:
            return False
    return True


def _ccs_prune_nd(front: list[tuple[Hashable, np.ndarray]]) -> list[tuple[Hashable, np.ndarray]]:
    values = np.stack([v for _, v in front])
    d = values.shape[1]
    certified = np.zeros(len(front), dtype=bool)
    if _grid_size(d, WEIGHT_GRID_RESOLUTION) <= _MAX_GRID_POINTS:
        scores = simplex_grid(d) @ values.T
        best = scores.max(axis=1, keepdims=True)
        # Unique argmax at some grid weight proves an entry is needed.
        winners = scores == best
        unique = winners.sum(axis=1) == 1
        certified[np.argmax(winners[unique], axis=1)] = True
    alive = list(range(len(front)))
    for i in range(len(front)):
        if certified[i]:
            continue
        others = [j for j in alive if j != i]
        removable = any(
            _mixture_dominated(values[i], values[a], values[b])
            for k, a in enumerate(others)
            for b in others[k:]
        )
        if removable:
            alive.remove(i)
    return [front[i] for i in alive]


def ccs_prune(solutions: SolutionSet) -> SolutionSet:
    """Convex coverage set of a finite candidate set.

    Exact (minimal) for two objectives via an upper convex hull scan over the
    Pareto front. For three or more objectives an entry is dropped only when a
    two-point mixture of the remaining entries weakly dominates it, so the
    result never loses a scalarised maximum but may keep extras.
    """
    front = pareto_prune(solutions).entries
    if len(front) <= 1:
        return SolutionSet(front, CCS_PRUNED)
    if front[0][1].shape[0] == 2:
        kept = _upper_hull_2d(front)
    else:
        kept = _ccs_prune_nd(front)
    order = {id(e): i for i, e in enumerate(front)}
    kept.sort(key=lambda e: order[id(e)])
    return SolutionSet(kept, CCS_PRUNED)


def validate_weights(w: Sequence[float]) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-9:
        raise ValueError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
    return w


def linear_utility(w: Sequence[float], v: Sequence[float]) -> float:
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_dims(w, v)
    return math.fsum(w * v)


def lorenz_vector(v: Sequence[float]) -> np.ndarray:
    """Cumulative sums of the ascending-sorted components."""
    srt = np.sort(np.asarray(v, dtype=float))
    out = np.cumsum(srt)
    # Exact total in the last slot regardless of accumulation order.
    out[-1] = math.fsum(srt)
    return out


def lorenz_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_dims(a, b)
    return pareto_dominates(lorenz_vector(a), lorenz_vector(b))


def mixture_value(components: Sequence[tuple[Sequence[float], float]]) -> np.ndarray:
    """Value of the stochastic mixture that runs each policy with the given probability."""
    if not components:
        raise ValueError("mixture needs at least one component")
    probs = np.array([p for _, p in components], dtype=float)
    if np.any(probs < 0) or abs(math.fsum(probs) - 1.0) > 1e-9:
        raise ValueError(f"mixture probabilities must be nonnegative and sum to 1, got {probs.tolist()}")
    vecs = np.stack([as_value_vector(v) for v, _ in components])
    return np.array([math.fsum(col) for col in (vecs * probs[:, None]).T])


def read_solution_csv(text: str) -> tuple[SolutionSet, list[str]]:
    """Parse CSV text into a SolutionSet; returns the set and its objective column names."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header, body = rows[0], [r for r in rows[1:] if r]
    meta = {"policy_id", "iteration", "policy_index", "config_hash"}
    obj_cols = [i for i, name in enumerate(header) if name not in meta]
    if not obj_cols:
        raise ValueError("CSV has no objective columns")
    pid_col = header.index("policy_id") if "policy_id" in header else None
    entries = []
    for n, row in enumerate(body):
        pid = row[pid_col] if pid_col is not None else n
        if isinstance(pid, str) and pid.lstrip("-").isdigit():
            pid = int(pid)
        entries.append((pid, [float(row[i]) for i in obj_cols]))
    return SolutionSet(entries), [header[i] for i in obj_cols]
