"""Hierarchical scalarization scores and their smooth building blocks.

All scores assume the maximization convention: every objective value ``psi``
is "larger is better" and is compared against a threshold ``t`` on the same
scale. Direction flipping and normalization happen in :mod:`tierbo.objectives`.

Functions accept either a single objective vector of shape ``(N,)`` or a batch
with shape ``(..., N)``; the objective axis is always last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

DEFAULT_K = 100.0


@dataclass(frozen=True)
class ScoreParams:
    """Smoothness settings for :func:`botier_score`.

    ``k`` controls the sharpness of the sigmoid step and the soft minimum.
    With ``exact=True`` the hard step and hard minimum are used and ``k`` is
    ignored.
    """

    k: float = DEFAULT_K
    exact: bool = False

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k <= 0:
            raise ValueError(f"smoothness k must be a positive finite number, got {self.k}")


def _check_k(k):
    if not np.isfinite(k) or k <= 0:
        raise ValueError(f"smoothness k must be a positive finite number, got {k}")


def heaviside(x):
    """Hard step with ``H(0) = 1``."""
    return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0)


def smooth_heaviside(x, k: float = DEFAULT_K):
    """Logistic approximation ``1 / (1 + exp(-k x))`` of the step function.

    Evaluated through :func:`scipy.special.expit`, which never overflows.
    Note that ``smooth_heaviside(0) == 0.5`` whereas :func:`heaviside` gives 1.
    """
    _check_k(k)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("smooth_heaviside requires finite input")
    out = expit(k * x)
    return out if out.ndim else float(out)


def smooth_min(a, b, k: float = DEFAULT_K):
    """Soft minimum ``(a e^{-ka} + b e^{-kb}) / (e^{-ka} + e^{-kb})``.

    Both exponents are shifted by ``min(a, b)`` before exponentiation, so the
    larger weight is always exactly 1 and nothing overflows. The error against
    the hard minimum is bounded by ``ln(2) / k``.
    """
    _check_k(k)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(a, b)
    wa = np.exp(-k * (a - lo))
    wb = np.exp(-k * (b - lo))
    out = (a * wa + b * wb) / (wa + wb)
    return out if out.ndim else float(out)


def smooth_max(a, b, k: float = DEFAULT_K):
    """Soft maximum, obtained from :func:`smooth_min` by sign flipping."""
    out = -smooth_min(-np.asarray(a, dtype=float), -np.asarray(b, dtype=float), k)
    return out


def _broadcast(psi, t):
    psi = np.asarray(psi, dtype=float)
    t = np.asarray(t, dtype=float)
    if psi.ndim == 0 or t.ndim != 1 or psi.shape[-1] != t.shape[0]:
        raise ValueError(
            f"objective values {psi.shape} and thresholds {t.shape} must share the last axis"
        )
    if t.shape[0] < 1:
        raise ValueError("at least one objective is required")
    return psi, t


def botier_score(psi, t, params: ScoreParams | None = None):
    """Tiered score ``sum_i min(psi_i, t_i) * prod_{j<i} H(psi_j - t_j)``.

    Objective ``i`` only contributes once every higher-ranked objective meets
    its threshold. Below its threshold an objective contributes its own value,
    above it contributes the threshold, which keeps the score continuous.

    Args:
        psi: objective values, shape ``(N,)`` or ``(..., N)``, rank 0 first.
        t: thresholds, shape ``(N,)``.
        params: smoothness settings; defaults to the smooth score with k=100.

    Returns:
        A float for a single vector, otherwise an array of shape ``psi.shape[:-1]``.
    """
    params = params or ScoreParams()
    psi, t = _broadcast(psi, t)
    if params.exact:
        mins = np.minimum(psi, t)
        steps = heaviside(psi - t)
    else:
        mins = smooth_min(psi, t, params.k)
        steps = expit(params.k * (psi - t))
    gates = np.ones(psi.shape[:-1])
    total = np.zeros(psi.shape[:-1])
    for i in range(t.shape[0]):
        total = total + mins[..., i] * gates
        gates = gates * steps[..., i]
    return total if total.ndim else float(total)


def botier_grad(psi, t, k: float = DEFAULT_K):
    """Analytic gradient of the smooth tiered score with respect to ``psi``.

    Returns an array with the same shape as ``psi``.
    """
    _check_k(k)
    psi, t = _broadcast(psi, t)
    n = t.shape[0]
    a, b = psi, np.broadcast_to(t, psi.shape)
    lo = np.minimum(a, b)
    ea = np.exp(-k * (a - lo))
    eb = np.exp(-k * (b - lo))
    wa = ea / (ea + eb)
    wb = eb / (ea + eb)
    mins = a * wa + b * wb
    dmins = wa * (1.0 - k * wb * (a - b))
    steps = expit(k * (psi - t))
    dsteps = k * steps * (1.0 - steps)

    grad = np.zeros_like(psi)
    for l in range(n):
        gate_l = np.prod(steps[..., :l], axis=-1)
        g = dmins[..., l] * gate_l
        for i in range(l + 1, n):
            others = np.prod(np.delete(steps[..., :i], l, axis=-1), axis=-1)
            g = g + mins[..., i] * others * dsteps[..., l]
        grad[..., l] = g
    return grad


def chimera_score(dataset_psi, t):
    """Additive Chimera score for every row of a dataset.

    The shift terms use the per-objective maxima over the rows supplied, so
    the score of one observation depends on all others: appending a row can
    change every value. Hard step with ``H(0) = 1``.

    Args:
        dataset_psi: array of shape ``(n_obs, N)``.
        t: thresholds, shape ``(N,)``.

    Returns:
        Array of shape ``(n_obs,)``.
    """
    psi, t = _broadcast(dataset_psi, t)
    if psi.ndim != 2 or psi.shape[0] == 0:
        raise ValueError("chimera_score needs a non-empty (n_obs, N) dataset")
    n = t.shape[0]
    col_max = psi.max(axis=0)
    met = heaviside(psi - t)
    unmet = heaviside(t - psi)

    chi = psi[:, 0] * unmet[:, 0]
    gate = np.ones(psi.shape[0])
    for i in range(1, n):
        gate = gate * met[:, i - 1]
        chi = chi + (psi[:, i] + col_max[:i].sum()) * unmet[:, i] * gate
    chi = chi + (psi[:, 0] + col_max.sum()) * met.prod(axis=1)
    return chi


def penalty_score(psi, t, weights=None):
    """Threshold penalty baseline ``psi_0 - sum_i w_i max(t_i - psi_i, 0)``.

    Not hierarchical: every threshold violation is penalized at once, and the
    first objective is the quantity being maximized.
    """
    psi, t = _broadcast(psi, t)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != t.shape:
        raise ValueError(f"weights {w.shape} must match thresholds {t.shape}")
    if np.any(w <= 0):
        raise ValueError("penalty weights must be positive")
    out = psi[..., 0] - (np.maximum(t - psi, 0.0) * w).sum(axis=-1)
    return out if np.ndim(out) else float(out)
