"""Exact client selection for the per-round mixed-integer subproblem.

The subproblem scores each client with q_k (backlog price minus weighted
utility) and charges the penalty weight times the slowest selected client.
Only negative-score clients can help; among them, for any latency ceiling the
best set is determined, so scanning ceilings in increasing latency order is
exact. A brute-force enumerator backs the solver in tests.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import TooLarge

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class SelectionInstance:
    """Scores q_k, predicted latencies T_k, penalty weight, optional set-size cap."""

    scores: np.ndarray
    latencies: np.ndarray
    penalty_weight: float
    max_selected: int | None = None

    def __post_init__(self):
        q = np.asarray(self.scores, dtype=float)
        t = np.asarray(self.latencies, dtype=float)
        object.__setattr__(self, "scores", q)
        object.__setattr__(self, "latencies", t)
        if q.shape != t.shape or q.ndim != 1:
            raise ValueError("scores and latencies must be 1-d and equal length")
        if np.any(np.isnan(q)) or np.any(np.isnan(t)) or np.any(t < 0):
            raise ValueError("scores must not be NaN; latencies must be >= 0")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if self.max_selected is not None and self.max_selected < 0:
            raise ValueError("max_selected must be non-negative")


@dataclass(frozen=True)
class SelectionResult:
    selected: np.ndarray  # bool per client
    objective: float


def marginal_score(price: float, v: float, penalty_weight: float) -> float:
    """q_k: backlog-weighted energy price minus the weighted utility gain."""
    return price - penalty_weight * math.log1p(v)


def selection_objective(subset: Iterable[int], instance: SelectionInstance) -> float:
    """W(S): penalty times the largest latency in S plus the score sum; W({}) = 0."""
    idx = list(subset)
    if not idx:
        return 0.0
    t_max = float(np.max(instance.latencies[idx]))
    return instance.penalty_weight * t_max + float(np.sum(instance.scores[idx]))


def itmcs(instance: SelectionInstance) -> SelectionResult:
    """Exact minimizer of W over selections (optionally capped in size).

    Candidates are, per negative-score client taken as the latency ceiling,
    that client plus the most negative predecessor scores that fit under the
    cap; with no cap this collapses to scanning prefixes of the latency-sorted
    negative-score clients. The empty set is always a candidate, so the
    returned objective is never positive. Infinite-latency clients are never
    eligible regardless of score.
    """
    q = instance.scores
    t = instance.latencies
    v = instance.penalty_weight
    k = len(q)
    eligible = np.flatnonzero((q < 0) & np.isfinite(t))
    cap = instance.max_selected if instance.max_selected is not None else k
    best_w = 0.0
    best_at: tuple[int, int] | None = None
    if cap >= 1 and eligible.size:
        order = eligible[np.lexsort((eligible, t[eligible]))]
        # max-heap of the most negative predecessor scores, at most cap-1 kept
        pool: list[float] = []
        pool_sum = 0.0
        for pos, ceil in enumerate(order):
            w = v * t[ceil] + q[ceil] + pool_sum
            if w < best_w:
                best_w = w
                best_at = (pos, ceil)
            if cap > 1:
                heapq.heappush(pool, -q[ceil])
                pool_sum += q[ceil]
                if len(pool) > cap - 1:
                    pool_sum += heapq.heappop(pool)
    selected = np.zeros(k, dtype=bool)
    if best_at is not None:
        pos, ceil = best_at
        preds = order[:pos]
        take = min(cap - 1, len(preds))
        selected[ceil] = True
        if take:
            by_score = preds[np.lexsort((preds, q[preds]))][:take]
            selected[by_score] = True
    return SelectionResult(selected, best_w)


@lru_cache(maxsize=8)
def _subset_masks(k: int) -> tuple[np.ndarray, np.ndarray]:
    """All 2^k selection masks as a bool matrix, plus per-row set sizes."""
    masks = (np.arange(2 ** k)[:, None] >> np.arange(k)) & 1
    masks = masks.astype(bool)
    return masks, masks.sum(axis=1)


def brute_force_selection(instance: SelectionInstance) -> SelectionResult:
    """Exhaustive minimizer of W; ties broken by smaller set, then lexicographic.

    Raises TooLarge beyond 20 clients.
    """
    k = len(instance.scores)
    if k > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_LIMIT} clients")
    masks, sizes = _subset_masks(k)
    t_max = np.where(masks, instance.latencies[None, :], -np.inf).max(axis=1)
    t_max[0] = 0.0
    # where/sum instead of matmul so infinite scores cannot produce 0*inf NaNs
    score_sum = np.where(masks, instance.scores[None, :], 0.0).sum(axis=1)
    w = instance.penalty_weight * t_max + score_sum
    w[0] = 0.0
    if instance.max_selected is not None:
        w = np.where(sizes > instance.max_selected, np.inf, w)
    w_min = float(w.min())
    cand = np.flatnonzero(w == w_min)
    cand = cand[sizes[cand] == sizes[cand].min()]
    best = min(cand, key=lambda row: tuple(np.flatnonzero(masks[row])))
    return SelectionResult(masks[best].copy(), w_min)
