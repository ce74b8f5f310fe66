"""Quality indicators for comparing solution sets.

All functions accept a ``SolutionSet`` or anything convertible to an ``(n, d)``
array of value vectors (maximisation in every objective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from morl.sets import DimensionMismatch, SolutionSet, _dominated_mask, pareto_prune, simplex_grid
from morl.utility import NumericError, UtilityFunction


def _as_array(points) -> np.ndarray:
    if isinstance(points, SolutionSet):
        return points.values() if len(points) else np.zeros((0, 0))
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0))
    return np.atleast_2d(arr)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(a), _as_array(b)
    if not len(a) or not len(b):
        raise ValueError("indicator needs non-empty sets")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a, b


def _hv2d(points: np.ndarray, ref: np.ndarray) -> float:
    # Sweep in decreasing objective 0; each point adds a strip above the previous height.
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    strips = []
    height = ref[1]
    for x, y in points[order]:
        if y > height:
            strips.append((x - ref[0]) * (y - height))
            height = y
    return math.fsum(strips)


def _hv3d(points: np.ndarray, ref: np.ndarray) -> float:
    levels = np.unique(points[:, 2])[::-1]
    slabs = []
    for k, z in enumerate(levels):
        below = levels[k + 1] if k + 1 < len(levels) else ref[2]
        if z <= below:
            continue
        slabs.append(_hv2d(points[points[:, 2] >= z, :2], ref[:2]) * (z - below))
    return math.fsum(slabs)


def hypervolume(points, ref: Sequence[float]) -> float:
    """Volume of objective space dominated by ``points`` and bounded below by ``ref``.

    Exact for two and three objectives. ``ref`` must be weakly dominated by every point.
    The set is reduced to its sorted non-dominated rows first, so dominated
    members and input order cannot change the floating-point result.
    """
    pts = _as_array(points)
    ref = np.asarray(ref, dtype=float)
    if not len(pts):
        raise ValueError("hypervolume of an empty set")
    if pts.shape[1] != ref.shape[0]:
        raise DimensionMismatch(f"reference point has {ref.shape[0]} components, set has {pts.shape[1]}")
    if np.any(pts < ref):
        raise ValueError(f"reference point {ref.tolist()} is not weakly dominated by every set member")
    pts = np.unique(pts, axis=0)
    pts = pts[~_dominated_mask(pts)]
    if pts.shape[1] == 2:
        return _hv2d(pts, ref)
    if pts.shape[1] == 3:
        return _hv3d(pts, ref)
    raise ValueError(f"hypervolume: unsupported dimension {pts.shape[1]} (only 2 and 3 are implemented)")


def sparsity(points) -> float:
    """Mean squared gap between consecutive sorted values, summed over objectives; 0 for a singleton."""
    pts = _as_array(points)
    if not len(pts):
        raise ValueError("sparsity of an empty set")
    if len(pts) == 1:
        return 0.0
    gaps = np.diff(np.sort(pts, axis=0), axis=0)
    return math.fsum((gaps**2).ravel()) / (len(pts) - 1)


def epsilon_additive(s, reference_front) -> float:
    """Smallest ``eps`` such that every reference point is within ``+eps`` of some member of ``s``."""
    s, ref = _pair(s, reference_front)
    deficits = np.max(ref[:, None, :] - s[None, :, :], axis=2)
    return float(np.max(np.min(deficits, axis=1)))


def epsilon_multiplicative(s, reference_front) -> float:
    """Smallest ``eps`` such that every reference point is within a factor ``1 + eps`` of some member.

    Defined only for strictly positive values in both sets.
    """
    s, ref = _pair(s, reference_front)
    if np.any(ref <= 0) or np.any(s <= 0):
        raise ValueError("multiplicative epsilon needs strictly positive value vectors")
    factors = np.max(ref[:, None, :] / s[None, :, :], axis=2)
    return float(np.max(np.min(factors, axis=1)) - 1.0)


class CoverageRatio(NamedTuple):
    precision: float
    recall: float
    f_score: float


def coverage_ratio(s, cs, eps: float) -> CoverageRatio:
    """Precision/recall of ``s`` against a coverage set under relative L1 matching.

    A member of ``s`` matches a coverage-set entry ``c`` when
    ``|v - c|_1 / |c|_1 < eps``. Each coverage-set entry is counted at most once
    towards recall, however many members of ``s`` match it.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cs = _as_array(cs)
    if not len(cs):
        raise ValueError("coverage set must be non-empty")
    norms = np.abs(cs).sum(axis=1)
    if np.any(norms == 0):
        raise ValueError("coverage ratio is undefined for a zero-norm coverage-set entry")
    s = _as_array(s)
    if not len(s):
        return CoverageRatio(0.0, 0.0, 0.0)
    if s.shape[1] != cs.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {s.shape[1]} vs {cs.shape[1]}")
    rel = np.abs(s[:, None, :] - cs[None, :, :]).sum(axis=2) / norms[None, :]
    match = rel < eps
    precision = float(match.any(axis=1).sum()) / len(s)
    recall = float(match.any(axis=0).sum()) / len(cs)
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return CoverageRatio(precision, recall, f)


@dataclass(frozen=True)
class UtilityPrior:
    """Distribution over utility functions, sampled deterministically from ``seed``.

    ``kind`` is ``"uniform_linear_simplex"`` (weights uniform on the simplex) or
    ``"explicit"`` (``utilities`` drawn with ``probabilities``).
    """

    kind: str = "uniform_linear_simplex"
    sample_count: int = 1000
    seed: int = 0
    utilities: tuple[UtilityFunction, ...] = field(default=())
    probabilities: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("uniform_linear_simplex", "explicit"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if self.kind == "explicit":
            if not self.utilities or len(self.utilities) != len(self.probabilities):
                raise ValueError("explicit prior needs one probability per utility")
            if any(p < 0 for p in self.probabilities) or abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
                raise ValueError("explicit prior probabilities must be nonnegative and sum to 1")

    def sample_weights(self, d: int) -> np.ndarray:
        """``(sample_count, d)`` weight vectors for the linear prior."""
        if self.kind != "uniform_linear_simplex":
            raise ValueError("only the linear prior has weight samples")
        rng = np.random.default_rng(self.seed)
        return rng.dirichlet(np.ones(d), size=self.sample_count)

    def sample_indices(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.choice(len(self.utilities), size=self.sample_count, p=np.asarray(self.probabilities))

    def scores(self, values: np.ndarray) -> np.ndarray:
        """``(sample_count, n)`` utilities of each value vector under each sampled utility."""
        if self.kind == "uniform_linear_simplex":
            return linear_scores(self.sample_weights(values.shape[1]), values)
        table = _explicit_table(self.utilities, values)
        return table[self.sample_indices()]

    def search_scores(self, values: np.ndarray) -> np.ndarray:
        """Utilities over the family searched by the maximum-utility-loss metric.

        For the linear prior this is the drawn sample plus the deterministic
        weight grid (which includes the simplex corners); for an explicit prior
        it is every listed utility.
        """
        if self.kind == "uniform_linear_simplex":
            d = values.shape[1]
            weights = self.sample_weights(d)
            if d <= 3:
                weights = np.vstack([weights, simplex_grid(d)])
            return linear_scores(weights, values)
        return _explicit_table(self.utilities, values)


def linear_scores(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    # Fixed-order elementwise accumulation: a row's score does not depend on which other rows are present.
    out = np.zeros((weights.shape[0], values.shape[0]))
    for i in range(values.shape[1]):
        out += weights[:, i, None] * values[None, :, i]
    return out


def _explicit_table(utilities: Sequence[UtilityFunction], values: np.ndarray) -> np.ndarray:
    table = np.array([[float(u(v)) for v in values] for u in utilities])
    if not np.all(np.isfinite(table)):
        raise NumericError("a utility evaluated to a non-finite value")
    return table


def expected_utility_metric(s, prior: UtilityPrior) -> float:
    """Mean over sampled utilities of the best utility attainable in ``s``."""
    values = _as_array(s)
    if not len(values):
        raise ValueError("expected utility of an empty set")
    best = prior.scores(values).max(axis=1)
    return math.fsum(best) / len(best)


def maximum_utility_loss(s, optimal, family: UtilityPrior) -> float:
    """Largest utility gap between ``optimal`` and ``s`` over the searched utility family."""
    values, opt = _pair(s, optimal)
    gap = family.search_scores(opt).max(axis=1) - family.search_scores(values).max(axis=1)
    return float(gap.max())


def reference_point(*point_sets) -> np.ndarray:
    """Component-wise worst value over all given sets."""
    stacked = np.vstack([_as_array(p) for p in point_sets if len(_as_array(p))])
    return stacked.min(axis=0)


def pruned_values(points) -> np.ndarray:
    if isinstance(points, SolutionSet):
        return pareto_prune(points).values()
    return pareto_prune(SolutionSet.from_values(_as_array(points))).values()
