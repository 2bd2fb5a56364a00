"""Acquisition functions and their bound-constrained optimizer.

Candidates are scored one at a time (q=1). The composite acquisitions draw
reparameterized posterior samples ``mean + std * z`` for every output with a
fixed block of standard-normal draws ``z``, map each sample through the
objective hierarchy and average the resulting utility.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .gp import FittedSurrogate
from .hypervolume import NondominatedColumns
from .objectives import Hierarchy
from .scalar import ScoreParams, botier_score, penalty_score
from .sobol import SobolStream

logger = logging.getLogger(__name__)

DEFAULT_MC_SAMPLES = 128
N_RAW = 256
N_RESTARTS = 8


@dataclass
class AcqContext:
    """Everything a composite acquisition needs for one optimization pass.

    ``models`` holds one surrogate per raw surface output, in output order.
    ``base_samples`` has shape ``(K, n_outputs)`` and stays fixed for the pass.
    ``score`` selects the composite scalarization: ``"botier"`` or ``"penalty"``.
    """

    models: Sequence[FittedSurrogate]
    hierarchy: Hierarchy
    base_samples: np.ndarray
    incumbent: float = -np.inf
    score_params: ScoreParams = field(default_factory=ScoreParams)
    score: str = "botier"
    penalty_weights: np.ndarray | None = None
    pareto: np.ndarray | None = None
    ref_point: np.ndarray | None = None

    @property
    def mc_samples(self) -> int:
        return self.base_samples.shape[0]


def posterior_samples(ctx: AcqContext, Xq) -> np.ndarray:
    """Output samples of shape ``(B, K, n_outputs)`` at the candidates."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    base = np.asarray(ctx.base_samples, dtype=float)
    cols = []
    for m, model in enumerate(ctx.models):
        mean, var = model.predict(Xq, observation_noise=False)
        cols.append(mean[:, None] + np.sqrt(var)[:, None] * base[None, :, m])
    return np.stack(cols, axis=-1)


def sample_psi(ctx: AcqContext, Xq) -> np.ndarray:
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    Y = posterior_samples(ctx, Xq)
    return ctx.hierarchy.psi(Xq[:, None, :], Y)


def composite_score(ctx: AcqContext, psi) -> np.ndarray:
    t = ctx.hierarchy.thresholds
    if ctx.score == "botier":
        return botier_score(psi, t, ctx.score_params)
    if ctx.score == "penalty":
        return penalty_score(psi, t, ctx.penalty_weights)
    raise ValueError(f"unknown composite score {ctx.score!r}")


def mc_composite_ei(ctx: AcqContext, Xq) -> np.ndarray:
    """Monte-Carlo expected improvement of the composite score over the incumbent."""
    psi = sample_psi(ctx, Xq)
    utility = np.maximum(composite_score(ctx, psi) - ctx.incumbent, 0.0)
    return utility.mean(axis=-1)


def expected_improvement(mean, std, incumbent) -> np.ndarray:
    """Closed-form EI for Gaussian marginals."""
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))
    shape = mean.shape
    mean, std = mean.ravel(), std.ravel()
    out = np.maximum(mean - incumbent, 0.0)
    ok = std >= 1e-12
    z = (mean[ok] - incumbent) / std[ok]
    out[ok] = np.maximum(std[ok] * (z * norm.cdf(z) + norm.pdf(z)), 0.0)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def analytic_ei(model_on_score: FittedSurrogate, incumbent: float, Xq) -> np.ndarray:
    """EI of a surrogate fitted directly on per-observation scalar scores."""
    mean, var = model_on_score.predict(Xq, observation_noise=False)
    return expected_improvement(mean, np.sqrt(var), incumbent)


def ehvi(ctx: AcqContext, Xq, columns: NondominatedColumns | None = None) -> np.ndarray:
    """Monte-Carlo expected hypervolume improvement over the observed Pareto set."""
    if ctx.ref_point is None:
        raise ValueError("EHVI needs a reference point")
    if columns is None:
        pareto = np.zeros((0, len(ctx.ref_point))) if ctx.pareto is None else ctx.pareto
        columns = NondominatedColumns(pareto, ctx.ref_point)
    psi = sample_psi(ctx, Xq)
    return columns.improvement(psi).mean(axis=-1)


@dataclass
class AcqResult:
    x: np.ndarray
    value: float
    fallback: bool = False


def optimize_acqf(
    acq: Callable[[np.ndarray], np.ndarray],
    bounds,
    seed: int = 0,
    n_raw: int = N_RAW,
    n_restarts: int = N_RESTARTS,
    fd_step: float = 1e-5,
) -> AcqResult:
    """Maximize a batch acquisition over a box.

    Scores ``n_raw`` scrambled Sobol points, then runs L-BFGS-B from the best
    ``n_restarts`` of them with central finite-difference gradients (one
    batched call per gradient). The best point found is returned; if no local
    run succeeds the best raw candidate is returned with ``fallback=True``.

    Args:
        acq: maps an ``(B, d)`` array of points in problem units to ``(B,)`` values.
        bounds: ``(2, d)`` array of lower and upper bounds.
    """
    bounds = np.asarray(bounds, dtype=float)
    lower, upper = bounds[0], bounds[1]
    width = upper - lower
    d = lower.shape[0]

    def f_unit(U):
        return np.asarray(acq(lower + np.clip(U, 0.0, 1.0) * width), dtype=float)

    raw = SobolStream(d, scramble_seed=seed).draw(n_raw)
    raw_vals = f_unit(raw)
    raw_vals = np.where(np.isfinite(raw_vals), raw_vals, -np.inf)
    order = np.argsort(-raw_vals, kind="stable")[:n_restarts]
    best_u, best_v = raw[order[0]].copy(), float(raw_vals[order[0]])

    eye = np.eye(d)

    def fun_and_grad(u):
        plus = np.clip(u + fd_step * eye, 0.0, 1.0)
        minus = np.clip(u - fd_step * eye, 0.0, 1.0)
        vals = f_unit(np.vstack([u[None, :], plus, minus]))
        step = (plus - minus).diagonal()
        grad = (vals[1 : d + 1] - vals[d + 1 :]) / np.where(step > 0, step, 1.0)
        return -vals[0], -grad

    n_ok = 0
    for i in order:
        if not np.isfinite(raw_vals[i]):
            continue
        try:
            res = minimize(
                fun_and_grad,
                raw[i],
                jac=True,
                method="L-BFGS-B",
                bounds=[(0.0, 1.0)] * d,
                options={"maxiter": 100},
            )
        except (ValueError, FloatingPointError) as exc:
            logger.debug("acquisition restart failed: %s", exc)
            continue
        if not np.isfinite(res.fun):
            continue
        n_ok += 1
        if -res.fun > best_v:
            best_u, best_v = np.clip(res.x, 0.0, 1.0), float(-res.fun)
    if n_ok == 0:
        logger.warning("all acquisition restarts failed; using best raw candidate")
    return AcqResult(lower + best_u * width, best_v, fallback=n_ok == 0)
