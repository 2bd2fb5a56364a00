"""Sobol low-discrepancy streams.

Backed by :class:`scipy.stats.qmc.Sobol`, which uses the Joe-Kuo direction
numbers and supports scrambling. Unscrambled streams skip the leading
all-zeros point.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import norm, qmc

MAX_DIM = 21201


class SobolStream:
    """A cursor over one Sobol sequence.

    Two streams built with the same ``(dim, scramble_seed)`` yield identical
    points; ``scramble_seed=None`` gives the unscrambled sequence.
    """

    def __init__(self, dim: int, scramble_seed: int | None = None):
        if not 1 <= dim <= MAX_DIM:
            raise ValueError(f"Sobol dimension must be in [1, {MAX_DIM}], got {dim}")
        self.dim = dim
        self.scramble_seed = scramble_seed
        self.index = 0
        if scramble_seed is None:
            self._engine = qmc.Sobol(dim, scramble=False)
            self._engine.fast_forward(1)
        else:
            self._engine = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(scramble_seed))

    def draw(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be at least 1")
        with warnings.catch_warnings():
            # balance warning for non power-of-two n is irrelevant here
            warnings.simplefilter("ignore", UserWarning)
            points = self._engine.random(n)
        self.index += n
        return points


def sobol_points(dim: int, n: int, scramble_seed: int | None = None) -> np.ndarray:
    return SobolStream(dim, scramble_seed).draw(n)


def sobol_normal(n: int, dim: int, seed: int) -> np.ndarray:
    """Quasi-random standard-normal draws of shape ``(n, dim)``."""
    u = sobol_points(dim, n, scramble_seed=seed)
    return norm.ppf(np.clip(u, 1e-10, 1.0 - 1e-10))


def to_bounds(U, lower, upper) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + np.asarray(U, dtype=float) * (upper - lower)


def from_bounds(X, lower, upper) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return (np.asarray(X, dtype=float) - lower) / (upper - lower)
