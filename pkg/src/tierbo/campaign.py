"""Benchmark campaigns: the optimization loop, metrics and aggregation.

A campaign runs one strategy on one surface for a number of independent
repeats. Each repeat starts from ``n_seed`` uniformly random points and adds
one point per iteration until ``budget`` evaluations exist. Metrics are
computed from the observation log alone, so every strategy is scored the
same way.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import gp, surfaces
from .acquisition import (
    DEFAULT_MC_SAMPLES,
    AcqContext,
    analytic_ei,
    ehvi,
    mc_composite_ei,
    optimize_acqf,
)
from .hypervolume import NondominatedColumns, default_reference_point, pareto_front
from .objectives import Hierarchy, count_satisfied, validate_for_problem
from .scalar import DEFAULT_K, ScoreParams, botier_score, chimera_score, penalty_score
from .sobol import SobolStream, sobol_normal, sobol_points, to_bounds

logger = logging.getLogger(__name__)

STRATEGIES = (
    "botier-composite",
    "botier-blackbox",
    "chimera-blackbox",
    "penalty-blackbox",
    "penalty-composite",
    "ehvi",
    "sobol",
)


@dataclass(frozen=True)
class CampaignConfig:
    surface: str
    starred: bool = False
    strategy: str = "botier-composite"
    hierarchy: Hierarchy | None = None
    budget: int = 50
    n_seed: int = 1
    repeats: int = 50
    k: float = DEFAULT_K
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    penalty_weights: tuple[float, ...] | None = None
    scaling: str = "offset"

    def __post_init__(self):
        surfaces.get(self.surface)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if not self.budget >= self.n_seed >= 1:
            raise ValueError("need budget >= n_seed >= 1")
        if self.repeats < 1:
            raise ValueError("need repeats >= 1")
        if self.mc_samples < 1:
            raise ValueError("need mc_samples >= 1")
        ScoreParams(self.k)
        surface = surfaces.get(self.surface)
        validate_for_problem(self.resolved_hierarchy(), surface.input_dim, surface.output_dim)
        if self.penalty_weights is not None and len(self.penalty_weights) != len(self.resolved_hierarchy()):
            raise ValueError("penalty_weights must have one entry per objective")

    @property
    def label(self) -> str:
        return surfaces.get(self.surface).name + ("*" if self.starred else "")

    def resolved_hierarchy(self) -> Hierarchy:
        """The explicit hierarchy, else the surface default under ``scaling``."""
        if self.hierarchy is not None:
            return self.hierarchy
        return surfaces.default_hierarchy(self.surface, self.starred, self.scaling)


@dataclass
class RepeatTrace:
    """Observation log and per-iteration metrics of one repeat.

    ``first_hit[n-1]`` is the 1-based experiment count at which some observed
    point first met objectives 1..n; ``budget + 1`` marks "never".
    """

    repeat: int
    X: np.ndarray
    Y: np.ndarray
    psi: np.ndarray
    xi: np.ndarray
    best_xi: np.ndarray
    n_satisfied_best: np.ndarray
    cum_max_n: np.ndarray
    first_hit: np.ndarray
    is_seed: np.ndarray
    n_failures: int = 0

    @property
    def n_iter(self) -> int:
        return self.X.shape[0]


@dataclass
class CampaignResult:
    config: CampaignConfig
    traces: list[RepeatTrace] = field(default_factory=list)


def trace_metrics(psi, t, budget: int | None = None) -> dict:
    """Strategy-independent metrics from an ordered log of objective vectors."""
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    t = np.asarray(t, dtype=float)
    n_obs, n_obj = psi.shape
    budget = n_obs if budget is None else budget
    xi = botier_score(psi, t, ScoreParams(exact=True))
    xi = np.atleast_1d(xi)
    n_sat = np.atleast_1d(count_satisfied(psi, t))

    best_idx = np.zeros(n_obs, dtype=int)
    for i in range(1, n_obs):
        prev = best_idx[i - 1]
        best_idx[i] = i if xi[i] > xi[prev] else prev
    best_xi = xi[best_idx]
    n_sat_best = n_sat[best_idx]
    cum_max_n = np.maximum.accumulate(n_sat)

    first_hit = np.full(n_obj, budget + 1, dtype=int)
    for n in range(1, n_obj + 1):
        hits = np.flatnonzero(n_sat >= n)
        if hits.size:
            first_hit[n - 1] = hits[0] + 1
    return {
        "xi": xi,
        "best_xi": best_xi,
        "n_satisfied": n_sat,
        "n_satisfied_best": n_sat_best,
        "cum_max_n": cum_max_n,
        "first_hit": first_hit,
    }


def _scalar_scores(strategy, psi, t, weights):
    if strategy == "botier-blackbox":
        return botier_score(psi, t, ScoreParams(exact=True))
    if strategy == "chimera-blackbox":
        # dataset-dependent: recomputed over the full log every iteration
        return chimera_score(psi, t)
    if strategy == "penalty-blackbox":
        return penalty_score(psi, t, weights)
    raise ValueError(strategy)


def propose(config: CampaignConfig, X, Y, seed: int) -> np.ndarray:
    """Next point for a model-based strategy given the observations so far."""
    surface = surfaces.get(config.surface)
    hierarchy = config.resolved_hierarchy()
    t = hierarchy.thresholds
    bounds = np.vstack([surface.lower, surface.upper])
    psi = hierarchy.psi(X, Y)
    strategy = config.strategy
    weights = None if config.penalty_weights is None else np.asarray(config.penalty_weights)

    if strategy.endswith("-blackbox"):
        scores = np.atleast_1d(_scalar_scores(strategy, psi, t, weights))
        model = gp.fit(X, scores, bounds=bounds)
        incumbent = float(scores.max())
        acq = lambda Xq: analytic_ei(model, incumbent, Xq)  # noqa: E731
        return optimize_acqf(acq, bounds, seed=seed).x

    models = [gp.fit(X, Y[:, m], bounds=bounds) for m in range(surface.output_dim)]
    base = sobol_normal(config.mc_samples, surface.output_dim, seed=seed)
    ctx = AcqContext(models=models, hierarchy=hierarchy, base_samples=base)

    if strategy == "ehvi":
        ctx.ref_point = default_reference_point(psi)
        ctx.pareto = pareto_front(psi)
        columns = NondominatedColumns(ctx.pareto, ctx.ref_point)
        acq = lambda Xq: ehvi(ctx, Xq, columns)  # noqa: E731
        return optimize_acqf(acq, bounds, seed=seed).x

    if strategy == "botier-composite":
        ctx.score = "botier"
        ctx.score_params = ScoreParams(config.k)
        ctx.incumbent = float(np.max(botier_score(psi, t, ScoreParams(exact=True))))
    elif strategy == "penalty-composite":
        ctx.score = "penalty"
        ctx.penalty_weights = weights
        ctx.incumbent = float(np.max(penalty_score(psi, t, weights)))
    else:
        raise ValueError(f"strategy {strategy!r} has no proposal step")
    acq = lambda Xq: mc_composite_ei(ctx, Xq)  # noqa: E731
    return optimize_acqf(acq, bounds, seed=seed).x


def run_repeat(config: CampaignConfig, repeat: int) -> RepeatTrace:
    """One independent repeat; fully determined by ``(config.seed, repeat)``."""
    surface = surfaces.get(config.surface)
    hierarchy = config.resolved_hierarchy()
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, repeat]))
    lower, upper = surface.lower, surface.upper
    d = surface.input_dim
    n_failures = 0

    if config.strategy == "sobol":
        X = to_bounds(sobol_points(d, config.budget, int(rng.integers(2**31))), lower, upper)
        Y = surface.evaluate(X)
    else:
        X = lower + rng.random((config.n_seed, d)) * (upper - lower)
        Y = surface.evaluate(X)
        fallback = SobolStream(d, scramble_seed=int(rng.integers(2**31)))
        for _ in range(config.n_seed, config.budget):
            step_seed = int(rng.integers(2**31))
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    x = propose(config, X, Y, step_seed)
            except (gp.NumericalError, np.linalg.LinAlgError) as exc:
                n_failures += 1
                logger.warning("repeat %d: surrogate failure (%s); using a Sobol point", repeat, exc)
                x = to_bounds(fallback.draw(1)[0], lower, upper)
            x = np.clip(x, lower, upper)
            X = np.vstack([X, x])
            Y = np.vstack([Y, surface.evaluate(x)])

    psi = hierarchy.psi(X, Y)
    m = trace_metrics(psi, hierarchy.thresholds, config.budget)
    is_seed = np.zeros(config.budget, dtype=bool)
    is_seed[: config.n_seed] = True
    return RepeatTrace(
        repeat=repeat,
        X=X,
        Y=Y,
        psi=psi,
        xi=m["xi"],
        best_xi=m["best_xi"],
        n_satisfied_best=m["n_satisfied_best"],
        cum_max_n=m["cum_max_n"],
        first_hit=m["first_hit"],
        is_seed=is_seed,
        n_failures=n_failures,
    )


def _run_one(args):
    config, repeat = args
    return run_repeat(config, repeat)


def run_campaign(config: CampaignConfig, jobs: int = 1) -> CampaignResult:
    """Run every repeat; ``jobs > 1`` distributes repeats over processes."""
    tasks = [(config, r) for r in range(config.repeats)]
    if jobs > 1 and config.repeats > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run_one, tasks))
    else:
        traces = [_run_one(task) for task in tasks]
    return CampaignResult(config=config, traces=traces)


def aggregate(result: CampaignResult | list[RepeatTrace], budget: int | None = None) -> dict:
    """Mean and standard error of best-so-far scores plus satisfaction statistics.

    Satisfaction probability at experiment ``i`` is the fraction of repeats
    whose first hit for ``n`` objectives happened at or before ``i``.
    """
    traces = result.traces if isinstance(result, CampaignResult) else list(result)
    if len(traces) < 2:
        raise ValueError("aggregate needs at least two repeats")
    lengths = {tr.n_iter for tr in traces}
    if len(lengths) != 1:
        raise ValueError(f"repeats have mismatched budgets: {sorted(lengths)}")
    n_iter = lengths.pop()
    budget = n_iter if budget is None else budget

    best = np.stack([tr.best_xi for tr in traces])
    mean = best.mean(axis=0)
    se = best.std(axis=0, ddof=1) / np.sqrt(best.shape[0])

    first = np.stack([tr.first_hit for tr in traces])
    iters = np.arange(1, n_iter + 1)
    prob = (first[:, :, None] <= iters[None, None, :]).mean(axis=0)
    quantiles = {}
    for n in range(first.shape[1]):
        q25, q50, q75 = np.quantile(first[:, n], [0.25, 0.5, 0.75])
        quantiles[str(n + 1)] = {
            "q25": float(q25),
            "median": float(q50),
            "q75": float(q75),
            "censored": int(np.sum(first[:, n] > budget)),
        }
    return {
        "repeats": len(traces),
        "budget": n_iter,
        "best_xi_mean": mean.tolist(),
        "best_xi_se": se.tolist(),
        "final_best_xi_mean": float(mean[-1]),
        "final_best_xi_se": float(se[-1]),
        "satisfaction_probability": {str(n + 1): prob[n].tolist() for n in range(prob.shape[0])},
        "first_hit": quantiles,
        "censor_value": budget + 1,
        "failures": int(sum(tr.n_failures for tr in traces)),
    }


def average_ranks(values) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.shape[0])
    start = 0
    n = values.shape[0]
    while start < n:
        stop = start + 1
        while stop < n and sorted_vals[stop] == sorted_vals[start]:
            stop += 1
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
        start = stop
    return ranks


def spearman(a, b) -> float:
    """Spearman rank correlation; NaN (with a warning) if either side is constant."""
    ra = average_ranks(a)
    rb = average_ranks(b)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    denom = np.sqrt((ra**2).sum() * (rb**2).sum())
    if ra.shape[0] < 2 or denom == 0:
        warnings.warn("rank correlation undefined for constant input", RuntimeWarning, stacklevel=2)
        return float("nan")
    return float((ra * rb).sum() / denom)


@dataclass
class CorrelationStudy:
    surface: str
    X: np.ndarray
    Y: np.ndarray
    psi: np.ndarray
    botier: np.ndarray
    chimera: np.ndarray
    spearman_r: float


def rank_correlation_study(
    surface: str, starred: bool = False, n_points: int = 10_000, hierarchy: Hierarchy | None = None
) -> CorrelationStudy:
    """Compare exact tiered scores with Chimera scores on an unscrambled Sobol grid."""
    surf = surfaces.get(surface)
    hierarchy = hierarchy or surf.default_hierarchy(starred)
    X = to_bounds(sobol_points(surf.input_dim, n_points), surf.lower, surf.upper)
    Y = surf.evaluate(X)
    psi = hierarchy.psi(X, Y)
    t = hierarchy.thresholds
    xi = np.atleast_1d(botier_score(psi, t, ScoreParams(exact=True)))
    chi = chimera_score(psi, t)
    with warnings.catch_warnings():
        warnings.simplefilter("always", RuntimeWarning)
        r = spearman(xi, chi)
    return CorrelationStudy(surf.name + ("*" if starred else ""), X, Y, psi, xi, chi, r)


def with_overrides(config: CampaignConfig, **overrides) -> CampaignConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
