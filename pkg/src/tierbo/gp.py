"""Exact Gaussian-process regression for a single output.

Matérn-5/2 kernel with one lengthscale per input dimension, a constant mean
and homoscedastic Gaussian noise. Inputs are scaled to the unit cube by the
problem bounds and targets are standardized before fitting. Hyperparameters
maximize the log marginal likelihood, using L-BFGS-B restarted from Sobol
points in log-hyperparameter space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.stats import qmc

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-6
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-6, 1e2)
NOISE_BOUNDS = (NOISE_FLOOR, 1.0)
MEAN_BOUNDS = (-10.0, 10.0)
N_RESTARTS = 8
SCREEN_ITERS = 20
POLISH_ITERS = 200
SQRT5 = math.sqrt(5.0)


class NumericalError(RuntimeError):
    """Raised when a covariance matrix cannot be factorized even with jitter."""


@dataclass(frozen=True)
class GPHyperparams:
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float
    mean_constant: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or self.signal_variance <= 0:
            raise ValueError("lengthscales and signal variance must be positive")
        if self.noise_variance < NOISE_FLOOR * (1 - 1e-9):
            raise ValueError(f"noise variance must be at least {NOISE_FLOOR}")

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.log(self.lengthscales),
                [math.log(self.signal_variance), math.log(self.noise_variance), self.mean_constant],
            ]
        )

    @classmethod
    def from_vector(cls, theta) -> GPHyperparams:
        theta = np.asarray(theta, dtype=float)
        return cls(
            lengthscales=np.exp(theta[:-3]),
            signal_variance=float(np.exp(theta[-3])),
            noise_variance=float(max(np.exp(theta[-2]), NOISE_FLOOR)),
            mean_constant=float(theta[-1]),
        )


def matern52(A, B, lengthscales, signal_variance):
    """Matérn-5/2 cross-covariance between rows of ``A`` and ``B``."""
    diff = (A[:, None, :] - B[None, :, :]) / lengthscales
    r = np.sqrt(np.maximum((diff**2).sum(axis=-1), 0.0))
    return signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * np.exp(-SQRT5 * r)


def _safe_cholesky(K, scale):
    """Cholesky factor, adding jitter from 1e-8 to 1e-4 of ``scale`` on failure."""
    try:
        return cholesky(K, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    n = K.shape[0]
    for rel in (1e-8, 1e-7, 1e-6, 1e-5, 1e-4):
        jitter = rel * scale
        try:
            return cholesky(K + jitter * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    eigs = np.linalg.eigvalsh(0.5 * (K + K.T))
    raise NumericalError(
        f"Cholesky failed after jitter up to {1e-4 * scale:.3g}; "
        f"n={n}, min eigenvalue={eigs[0]:.3g}, max eigenvalue={eigs[-1]:.3g}"
    )


def _pairwise_sq(X):
    return (X[:, None, :] - X[None, :, :]) ** 2


def _neg_lml_and_grad(theta, X, y, sq_raw=None):
    n, d = X.shape
    ls = np.exp(theta[:d])
    sf2 = math.exp(theta[d])
    sn2 = math.exp(theta[d + 1])
    c = theta[d + 2]

    if sq_raw is None:
        sq_raw = _pairwise_sq(X)
    sq = sq_raw / ls**2
    r = np.sqrt(sq.sum(axis=-1))
    e = np.exp(-SQRT5 * r)
    Kf = sf2 * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * e
    K = Kf + sn2 * np.eye(n)
    try:
        L = cholesky(K, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(theta)

    resid = y - c
    alpha = cho_solve((L, True), resid, check_finite=False)
    nll = 0.5 * resid @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * math.log(2 * math.pi)

    Linv = solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    W = np.outer(alpha, alpha) - Linv.T @ Linv
    grad = np.empty_like(theta)
    # d K / d log(ls_j) = sf2 * 5/3 * (1 + sqrt5 r) e^{-sqrt5 r} * (diff_j)^2
    common = sf2 * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e
    grad[:d] = -0.5 * np.einsum("ij,ij,ijk->k", W, common, sq)
    grad[d] = -0.5 * np.sum(W * Kf)
    grad[d + 1] = -0.5 * sn2 * np.trace(W)
    grad[d + 2] = -alpha.sum()
    if not (np.isfinite(nll) and np.all(np.isfinite(grad))):
        return 1e25, np.zeros_like(theta)
    return nll, grad


def log_marginal_likelihood(theta, X, y, with_grad=False):
    """Log marginal likelihood of standardized data (and its gradient)."""
    nll, grad = _neg_lml_and_grad(np.asarray(theta, dtype=float), np.asarray(X), np.asarray(y))
    return (-nll, -grad) if with_grad else -nll


@dataclass
class FittedSurrogate:
    """A GP conditioned on training data; treat as immutable once built."""

    hyperparams: GPHyperparams
    train_inputs: np.ndarray
    train_targets: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    x_lower: np.ndarray
    x_upper: np.ndarray
    y_mean: float
    y_std: float
    jitter: float = 0.0

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    def scale_inputs(self, X) -> np.ndarray:
        return (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_lower) / (self.x_upper - self.x_lower)

    def _cross(self, Z):
        hp = self.hyperparams
        return matern52(Z, self.train_inputs, hp.lengthscales, hp.signal_variance)

    def predict(self, X, observation_noise: bool = True):
        """Posterior mean and marginal variance in original target units."""
        Z = self.scale_inputs(X)
        hp = self.hyperparams
        Ks = self._cross(Z)
        mean = hp.mean_constant + Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True)
        var = hp.signal_variance - (v**2).sum(axis=0)
        if observation_noise:
            var = var + hp.noise_variance
        var = np.maximum(var, 0.0)
        return mean * self.y_std + self.y_mean, var * self.y_std**2

    def predict_cov(self, X, observation_noise: bool = True):
        """Posterior mean and full covariance in original target units."""
        Z = self.scale_inputs(X)
        hp = self.hyperparams
        Ks = self._cross(Z)
        mean = hp.mean_constant + Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True)
        cov = matern52(Z, Z, hp.lengthscales, hp.signal_variance) - v.T @ v
        if observation_noise:
            cov = cov + hp.noise_variance * np.eye(Z.shape[0])
        cov = 0.5 * (cov + cov.T)
        return mean * self.y_std + self.y_mean, cov * self.y_std**2


def condition(X, y, hyperparams: GPHyperparams, bounds=None) -> FittedSurrogate:
    """Build a surrogate with fixed hyperparameters (given on the standardized scale)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    lower, upper = _bounds(X, bounds)
    y_mean, y_std = _standardizer(y)
    Z = (X - lower) / (upper - lower)
    ys = (y - y_mean) / y_std
    return _assemble(Z, ys, hyperparams, lower, upper, y_mean, y_std)


def _bounds(X, bounds):
    if bounds is None:
        return np.zeros(X.shape[1]), np.ones(X.shape[1])
    b = np.asarray(bounds, dtype=float)
    if b.shape != (2, X.shape[1]):
        raise ValueError(f"bounds must have shape (2, {X.shape[1]}), got {b.shape}")
    return b[0], b[1]


def _standardizer(y):
    y_mean = float(y.mean())
    y_std = float(y.std()) if y.size > 1 else 1.0
    if not np.isfinite(y_std) or y_std < 1e-12 * max(1.0, abs(y_mean)):
        y_std = 1.0
    return y_mean, y_std


def _assemble(Z, ys, hp, lower, upper, y_mean, y_std):
    K = matern52(Z, Z, hp.lengthscales, hp.signal_variance) + hp.noise_variance * np.eye(len(ys))
    L, jitter = _safe_cholesky(K, hp.signal_variance)
    alpha = cho_solve((L, True), ys - hp.mean_constant)
    return FittedSurrogate(hp, Z, ys, L, alpha, lower, upper, y_mean, y_std, jitter)


def _initial_points(d):
    lo = np.r_[np.full(d, math.log(0.05)), math.log(0.1), math.log(1e-5), 0.0]
    hi = np.r_[np.full(d, math.log(2.0)), math.log(10.0), math.log(1e-1), 0.0]
    U = qmc.Sobol(d + 2, scramble=False).random_base2(4)[1 : N_RESTARTS + 1]
    U = np.column_stack([U, np.full(N_RESTARTS, 0.5)])
    return lo + U * (hi - lo)


def fit(X, y, bounds=None, noise_variance: float | None = None) -> FittedSurrogate:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Args:
        X: inputs, shape ``(n, d)``.
        y: targets, shape ``(n,)``.
        bounds: problem bounds as a ``(2, d)`` array of lower and upper rows; inputs are
            min-max scaled with them. ``None`` leaves inputs unscaled.
        noise_variance: if given, the (standardized) noise variance is held
            fixed at this value instead of being learned.

    Raises:
        NumericalError: if the final covariance cannot be factorized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("fit needs at least one observation and matching X, y lengths")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("fit needs finite inputs and targets")
    n, d = X.shape
    lower, upper = _bounds(X, bounds)
    y_mean, y_std = _standardizer(y)
    Z = (X - lower) / (upper - lower)
    ys = (y - y_mean) / y_std

    opt_bounds = (
        [tuple(np.log(LENGTHSCALE_BOUNDS))] * d
        + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS)), MEAN_BOUNDS]
    )
    if noise_variance is not None:
        fixed = math.log(max(noise_variance, NOISE_FLOOR))
        opt_bounds[d + 1] = (fixed, fixed)

    sq_raw = _pairwise_sq(Z)

    def run(theta0, maxiter):
        try:
            res = minimize(
                _neg_lml_and_grad,
                theta0,
                args=(Z, ys, sq_raw),
                jac=True,
                method="L-BFGS-B",
                bounds=opt_bounds,
                options={"maxiter": maxiter, "ftol": 1e-8},
            )
        except (ValueError, FloatingPointError) as exc:
            logger.debug("GP restart failed: %s", exc)
            return None
        if np.isfinite(res.fun) and np.all(np.isfinite(res.x)):
            return res
        return None

    # short runs from every start, then polish the most promising one
    best_theta, best_val = None, np.inf
    for theta0 in _initial_points(d):
        if noise_variance is not None:
            theta0[d + 1] = opt_bounds[d + 1][0]
        res = run(theta0, SCREEN_ITERS)
        if res is not None and res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    if best_theta is not None:
        res = run(best_theta, POLISH_ITERS)
        if res is not None and res.fun <= best_val:
            best_theta, best_val = res.x, res.fun
    else:
        best_theta = _initial_points(d)[0]
        if noise_variance is not None:
            best_theta[d + 1] = opt_bounds[d + 1][0]
    hp = GPHyperparams.from_vector(best_theta)
    return _assemble(Z, ys, hp, lower, upper, y_mean, y_std)


def posterior(model: FittedSurrogate, Xq, full_cov: bool = False, observation_noise: bool = True):
    """Predictive mean with marginal variances, or with the full covariance."""
    if full_cov:
        return model.predict_cov(Xq, observation_noise)
    return model.predict(Xq, observation_noise)


def sample_posterior(model: FittedSurrogate, Xq, base_samples, observation_noise: bool = False):
    """Reparameterized joint samples ``mean + L @ z`` at the query points.

    Args:
        base_samples: standard-normal draws of shape ``(K, q)``; keeping them
            fixed makes the samples a smooth function of ``Xq``.

    Returns:
        Array of shape ``(K, q)``.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    base = np.atleast_2d(np.asarray(base_samples, dtype=float))
    if base.shape[1] != Xq.shape[0]:
        raise ValueError(f"base samples {base.shape} do not match {Xq.shape[0]} query points")
    mean, cov = model.predict_cov(Xq, observation_noise)
    scale = max(float(np.max(np.diag(cov))), 1e-300)
    try:
        L = cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        L, _ = _safe_cholesky(cov, scale)
    return mean + base @ L.T
