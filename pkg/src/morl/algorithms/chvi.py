"""Convex hull value iteration for finite MOMDPs, plus scalar value iteration for cross-checks."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from morl.core import MomdpModel
from morl.sets import CCS_PRUNED, SolutionSet, ccs_prune


class NonEpisodicModel(ValueError):
    pass


def _ccs_2d(points: np.ndarray) -> np.ndarray:
    # Pareto filter: sweep objective 0 descending, keep strict improvements in objective 1.
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    pts = points[order]
    best = np.maximum.accumulate(pts[:, 1])
    keep = np.empty(len(pts), dtype=bool)
    keep[0] = True
    keep[1:] = pts[1:, 1] > best[:-1]
    front = pts[keep][::-1]
    hull: list[np.ndarray] = []
    for p in front:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def _segment_loss(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Largest scalarised loss, over simplex weights, from covering hull vertex ``v`` by segment ``a``-``b``.

    ``a`` precedes ``v`` and ``b`` follows it in increasing objective 0, so the
    worst weight is where ``a`` and ``b`` tie.
    """
    denom = (a[0] - b[0]) - (a[1] - b[1])
    w = (b[1] - a[1]) / denom
    return w * (v[0] - a[0]) + (1.0 - w) * (v[1] - a[1])


def _thin_2d(hull: np.ndarray, eps: float) -> np.ndarray:
    # Drop interior vertices while every dropped vertex stays within eps of the kept segment around it.
    if eps <= 0 or len(hull) <= 2:
        return hull
    kept = [0]
    for i in range(1, len(hull) - 1):
        a, b = hull[kept[-1]], hull[i + 1]
        if any(_segment_loss(hull[j], a, b) > eps for j in range(kept[-1] + 1, i + 1)):
            kept.append(i)
    kept.append(len(hull) - 1)
    return hull[kept]


def prune_points(points: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Convex coverage set of a point array, as an array.

    With ``eps > 0`` (two objectives only) hull vertices whose removal costs at
    most ``eps`` in every linear scalarisation are dropped as well.
    """
    if len(points) <= 1:
        return points
    if points.shape[1] == 2:
        return _thin_2d(_ccs_2d(points), eps)
    return ccs_prune(SolutionSet.from_values(points)).values()


def minkowski_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Hausdorff distance between two finite point sets under the L-infinity norm."""
    dist = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def _backup(model: MomdpModel, s: int, values: list[np.ndarray], eps: float = 0.0) -> np.ndarray:
    gamma = model.gamma
    candidates = []
    for a in range(model.num_actions):
        nxt, probs, rewards = model.outcomes(s, a)
        q = np.zeros((1, model.num_objectives))
        for t, p, r in zip(nxt, probs, rewards):
            q = prune_points(minkowski_sum(q, p * (r + gamma * values[t])))
        candidates.append(q)
    return prune_points(np.vstack(candidates), eps)


def chvi(model: MomdpModel, tolerance: float = 1e-9, max_iterations: int = 100_000,
         thinning: float | None = None) -> list[SolutionSet]:
    """Per-state convex coverage sets of achievable value vectors.

    Sweeps update states in place, successors first when the state graph is
    acyclic, until no state's set moves by more than ``tolerance`` (Hausdorff,
    L-infinity). Undiscounted models must be acyclic apart from absorbing
    zero-reward states.

    On cyclic models the exact sets keep gaining vertices from ever longer
    non-stationary policies, so each two-objective backup drops vertices worth
    at most ``thinning`` in any linear scalarisation. The default,
    ``tolerance * (1 - gamma)``, keeps the accumulated scalarised error of
    the converged sets near ``tolerance``. Acyclic models default to no
    thinning (exact sets).
    """
    order = model.topological_order()
    if model.gamma >= 1.0 and order is None:
        raise NonEpisodicModel("gamma = 1 requires an acyclic (episodic) state graph")
    if thinning is None:
        thinning = 0.0 if order is not None else tolerance * (1.0 - model.gamma)
    sweep = list(reversed(order)) if order is not None else list(range(model.num_states))
    absorbing = model.absorbing_states()
    d = model.num_objectives
    values = [np.zeros((1, d)) for _ in range(model.num_states)]
    for _ in range(max_iterations):
        change = 0.0
        for s in sweep:
            if absorbing[s]:
                continue
            new = _backup(model, s, values, thinning)
            change = max(change, hausdorff(values[s], new))
            values[s] = new
        if change <= tolerance:
            break
    else:
        raise RuntimeError(f"chvi did not converge within {max_iterations} sweeps")
    return [SolutionSet(list(enumerate(v)), CCS_PRUNED) for v in values]


def initial_state_ccs(model: MomdpModel, sets: list[SolutionSet]) -> SolutionSet:
    """Coverage set of the value from the initial state distribution."""
    total = np.zeros((1, model.num_objectives))
    for s in np.flatnonzero(model.initial_dist):
        total = prune_points(minkowski_sum(total, model.initial_dist[s] * sets[s].values()))
    return SolutionSet(list(enumerate(total)), CCS_PRUNED)


def scalarised_value_iteration(model: MomdpModel, weights, tolerance: float = 1e-12,
                               max_iterations: int = 100_000) -> np.ndarray:
    """Optimal scalar values ``(S, W)`` of the model under each row of ``weights`` ``(W, d)``."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    S, A = model.num_states, model.num_actions
    rows = model.state * A + model.action
    trans = sp.csr_matrix((model.prob, (rows, model.next_state)), shape=(S * A, S))
    expected = np.zeros((S * A, weights.shape[0]))
    np.add.at(expected, rows, model.prob[:, None] * (model.reward @ weights.T))
    v = np.zeros((S, weights.shape[0]))
    for _ in range(max_iterations):
        q = expected + model.gamma * (trans @ v)
        new = q.reshape(S, A, -1).max(axis=1)
        delta = np.max(np.abs(new - v))
        v = new
        if delta <= tolerance:
            return v
    raise RuntimeError("scalar value iteration did not converge")
