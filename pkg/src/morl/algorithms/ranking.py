"""Non-dominance ranking and crowding distance, combined into the MONES fitness indicator."""

from __future__ import annotations

import numpy as np


def _dominance_matrix(points: np.ndarray) -> np.ndarray:
    """``dom[i, j]`` is True when point ``i`` Pareto-dominates point ``j``."""
    ge = np.all(points[:, None, :] >= points[None, :, :], axis=2)
    gt = np.any(points[:, None, :] > points[None, :, :], axis=2)
    return ge & gt


def nondominated_rank(points) -> np.ndarray:
    """Peeling ranks: 0 for the non-dominated points, -1 for the next front, and so on."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not len(pts):
        raise ValueError("ranking needs at least one point")
    dom = _dominance_matrix(pts)
    ranks = np.zeros(len(pts), dtype=int)
    remaining = np.ones(len(pts), dtype=bool)
    rank = 0
    while remaining.any():
        dominated = (dom[remaining][:, remaining]).any(axis=0)
        idx = np.flatnonzero(remaining)
        layer = idx[~dominated]
        ranks[layer] = rank
        remaining[layer] = False
        rank -= 1
    return ranks


def crowding_distance(points) -> np.ndarray:
    """Normalised crowding distance in [0, 1] for points of one rank.

    Per objective, a point attaining the class minimum or maximum scores 1 and
    an interior point scores the gap between its sorted neighbours divided by
    twice the objective's range; an objective with zero range scores 0. The
    result is the mean over objectives. Points with an exact duplicate score 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n == 0:
        raise ValueError("crowding distance needs at least one point")
    if n == 1:
        return np.ones(1)
    per_objective = np.zeros((n, d))
    for j in range(d):
        col = pts[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        order = np.argsort(col, kind="stable")
        srt = col[order]
        gaps = np.empty(n)
        gaps[1:-1] = (srt[2:] - srt[:-2]) / (2.0 * (hi - lo))
        score = np.empty(n)
        score[order] = np.clip(np.concatenate([[0.0], gaps[1:-1], [0.0]]), 0.0, 1.0)
        score[(col == lo) | (col == hi)] = 1.0
        per_objective[:, j] = score
    crowding = per_objective.mean(axis=1)
    _, inverse, counts = np.unique(pts, axis=0, return_inverse=True, return_counts=True)
    crowding[counts[inverse.reshape(-1)] > 1] = 0.0
    return crowding


def mones_indicator(points) -> np.ndarray:
    """Rank plus within-rank crowding distance; higher is better."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ranks = nondominated_rank(pts)
    out = ranks.astype(float)
    for r in np.unique(ranks):
        members = ranks == r
        out[members] += crowding_distance(pts[members])
    return out
