"""Dominated hypervolume for one to three maximized objectives.

The region not yet dominated by a Pareto set is split into columns over the
first ``D - 1`` objectives; each column is free above a single height in the
last objective. With that decomposition both the hypervolume and the
improvement of many candidate points reduce to array arithmetic.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np


def pareto_mask(Y) -> np.ndarray:
    """Boolean mask of non-dominated rows (maximization; duplicates keep the first)."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        if not keep[i]:
            continue
        ge = np.all(Y >= Y[i], axis=1)
        gt = np.any(Y > Y[i], axis=1)
        dominated_by = ge & gt
        dup = np.all(Y == Y[i], axis=1)
        dup[: i + 1] = False
        if dominated_by.any():
            keep[i] = False
        keep[dup] = False
    return keep


def pareto_front(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] == 0:
        return Y
    return Y[pareto_mask(Y)]


def _relevant(P, ref):
    P = np.asarray(P, dtype=float).reshape(-1, len(ref))
    P = P[np.all(P > ref, axis=1)]
    return pareto_front(P) if P.shape[0] else P


def _merge_runs(lowers, uppers, heights, n_inner):
    """Fuse neighbouring columns along the second axis that share a height."""
    keep_lo, keep_up, keep_h = [], [], []
    for start in range(0, heights.shape[0], n_inner):
        j = start
        stop = start + n_inner
        while j < stop:
            k = j
            while k + 1 < stop and heights[k + 1] == heights[j]:
                k += 1
            keep_lo.append(lowers[j])
            keep_up.append([uppers[j, 0], uppers[k, 1]])
            keep_h.append(heights[j])
            j = k + 1
    return np.array(keep_lo), np.array(keep_up), np.array(keep_h)


class NondominatedColumns:
    """Column decomposition of the space above ``ref`` not dominated by ``P``."""

    def __init__(self, P, ref):
        ref = np.asarray(ref, dtype=float)
        if ref.ndim != 1 or not 1 <= ref.shape[0] <= 3:
            raise ValueError("hypervolume supports 1 to 3 objectives")
        self.ref = ref
        self.P = _relevant(P, ref)
        D = ref.shape[0]
        if D == 1:
            self.lower = np.zeros((1, 0))
            self.upper = np.zeros((1, 0))
            top = self.P[:, 0].max() if self.P.shape[0] else ref[0]
            self.height = np.array([top])
            return
        edges = []
        for j in range(D - 1):
            cuts = np.unique(np.concatenate([[ref[j]], self.P[:, j]]))
            edges.append((cuts, np.append(cuts[1:], np.inf)))
        lowers = np.array(list(product(*[e[0] for e in edges])))
        uppers = np.array(list(product(*[e[1] for e in edges])))
        if self.P.shape[0]:
            covers = np.all(self.P[None, :, : D - 1] >= uppers[:, None, :], axis=2)
            heights = np.where(covers, self.P[None, :, D - 1], ref[D - 1]).max(axis=1)
        else:
            heights = np.full(lowers.shape[0], ref[D - 1])
        if D == 3:
            lowers, uppers, heights = _merge_runs(lowers, uppers, heights, len(edges[1][0]))
        self.lower, self.upper, self.height = lowers, uppers, heights

    def volume(self) -> float:
        finite = np.all(np.isfinite(self.upper), axis=1)
        widths = np.prod(self.upper[finite] - self.lower[finite], axis=1)
        return float(np.sum(widths * (self.height[finite] - self.ref[-1])))

    def improvement(self, Y) -> np.ndarray:
        """Hypervolume gained by adding each point of ``Y (..., D)`` on its own."""
        Y = np.asarray(Y, dtype=float)
        total = np.maximum(Y[..., None, -1] - self.height, 0.0)
        for j in range(Y.shape[-1] - 1):
            w = np.minimum(Y[..., None, j], self.upper[:, j]) - self.lower[:, j]
            total *= np.maximum(w, 0.0, out=w)
        return total.sum(axis=-1)


def hypervolume(P, ref) -> float:
    """Volume dominated by ``P`` and bounded below by ``ref``."""
    ref = np.asarray(ref, dtype=float)
    return NondominatedColumns(P, ref).volume()


def hypervolume_improvement(Y, P, ref) -> np.ndarray:
    return NondominatedColumns(P, ref).improvement(Y)


def hypervolume_inclusion_exclusion(P, ref) -> float:
    """Hypervolume by inclusion-exclusion over all subsets; exponential, small sets only."""
    ref = np.asarray(ref, dtype=float)
    P = np.asarray(P, dtype=float).reshape(-1, ref.shape[0])
    P = P[np.all(P > ref, axis=1)]
    if P.shape[0] > 20:
        raise ValueError("inclusion-exclusion is limited to 20 points")
    total = 0.0
    for size in range(1, P.shape[0] + 1):
        sign = 1.0 if size % 2 else -1.0
        for subset in combinations(range(P.shape[0]), size):
            corner = P[list(subset)].min(axis=0)
            total += sign * float(np.prod(np.clip(corner - ref, 0.0, None)))
    return total


def default_reference_point(psi, margin: float = 0.1) -> np.ndarray:
    """Per-objective minimum minus ``margin`` times the observed range."""
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    lo = psi.min(axis=0)
    span = psi.max(axis=0) - lo
    span = np.where(span > 0, span, np.maximum(1.0, np.abs(lo)))
    return lo - margin * span
