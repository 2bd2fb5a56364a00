import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import expected_improvement_literal, grid_hypervolume
from tierbo import gp
from tierbo.acquisition import (
    AcqContext,
    analytic_ei,
    composite_score,
    ehvi,
    expected_improvement,
    mc_composite_ei,
    optimize_acqf,
    sample_psi,
)
from tierbo.objectives import Hierarchy, ObjectiveSpec, OutputSource
from tierbo.scalar import ScoreParams, botier_score
from tierbo.sobol import sobol_normal

BOUNDS_1D = [[0.0], [1.0]]


@pytest.fixture(scope="module")
def two_output_models():
    X = np.linspace(0.0, 1.0, 7)[:, None]
    f0 = 0.2 + 0.7 * X[:, 0]
    f1 = 0.9 - 0.7 * X[:, 0] ** 2
    return [gp.fit(X, f, bounds=BOUNDS_1D) for f in (f0, f1)]


def _hierarchy(n, thresholds):
    return Hierarchy(tuple(ObjectiveSpec(f"y{i}", OutputSource(i), "maximize", thresholds[i]) for i in range(n)))


def test_ei_at_incumbent_is_pdf_at_zero():
    assert expected_improvement(1.5, 1.0, 1.5) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-7)
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)


@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(-5, 5))
def test_ei_matches_literal_and_bounds(mu, sigma, best):
    ei = float(expected_improvement(mu, sigma, best))
    assert ei == pytest.approx(expected_improvement_literal(mu, sigma, best), rel=1e-9, abs=1e-12)
    assert ei >= max(mu - best, 0.0) - 1e-12


def test_ei_without_uncertainty():
    np.testing.assert_array_equal(expected_improvement([0.0, 2.0], [0.0, 1e-14], 1.0), [0.0, 1.0])


def test_mc_ei_matches_closed_form():
    K = 4096
    X = np.linspace(0.05, 0.95, 4)[:, None]
    hp = gp.GPHyperparams(np.array([0.15]), 1.0, 1e-6)
    model = gp.condition(X, np.sin(6 * X[:, 0]), hp, bounds=BOUNDS_1D)
    h = _hierarchy(1, [1e6])  # threshold never binds
    incumbent = -0.5
    ctx = AcqContext([model], h, sobol_normal(K, 1, seed=3), incumbent=incumbent)
    Xq = np.random.default_rng(0).random((20, 1))
    closed = analytic_ei(model, incumbent, Xq)
    rel = np.abs(mc_composite_ei(ctx, Xq) - closed) / closed
    assert np.all(rel <= 3 / math.sqrt(K)), rel.max()


def test_single_zero_sample_is_plug_in(two_output_models):
    h = _hierarchy(2, [0.5, 0.6])
    ctx = AcqContext(two_output_models, h, np.zeros((1, 2)), incumbent=0.3)
    Xq = np.array([[0.2], [0.8]])
    means = np.column_stack([m.predict(Xq, observation_noise=False)[0] for m in two_output_models])
    expected = np.maximum(botier_score(means, h.thresholds, ScoreParams()) - 0.3, 0)
    np.testing.assert_allclose(mc_composite_ei(ctx, Xq), expected, atol=1e-12)


def test_no_improvement_at_the_incumbent():
    X = np.linspace(0, 1, 6)[:, None]
    y = X[:, 0] ** 2
    model = gp.fit(X, y, bounds=BOUNDS_1D, noise_variance=1e-6)
    h = _hierarchy(1, [1e6])
    incumbent = float(y.max())
    ctx = AcqContext([model], h, sobol_normal(128, 1, seed=0), incumbent=incumbent)
    assert mc_composite_ei(ctx, [[1.0]])[0] < 1e-3


def test_composite_acquisitions_are_deterministic_and_non_negative(two_output_models):
    h = _hierarchy(2, [0.5, 0.6])
    base = sobol_normal(128, 2, seed=1)
    ctx = AcqContext(two_output_models, h, base, incumbent=0.7)
    Xq = np.random.default_rng(2).random((50, 1))
    a, b = mc_composite_ei(ctx, Xq), mc_composite_ei(ctx, Xq)
    np.testing.assert_array_equal(a, b)
    assert np.all(a >= 0)
    ctx.score, ctx.penalty_weights = "penalty", np.ones(2)
    assert np.all(mc_composite_ei(ctx, Xq) >= 0)
    ctx.ref_point, ctx.pareto = np.zeros(2), np.array([[0.6, 0.6]])
    assert np.all(ehvi(ctx, Xq) >= 0)


def test_mc_ei_is_smooth_in_x(two_output_models):
    h = _hierarchy(2, [0.5, 0.6])
    ctx = AcqContext(two_output_models, h, sobol_normal(128, 2, seed=1), incumbent=0.7)
    x = np.array([[0.41]])
    fd = [(mc_composite_ei(ctx, x + e) - mc_composite_ei(ctx, x - e))[0] / (2 * e) for e in (1e-4, 1e-5)]
    assert fd[0] == pytest.approx(fd[1], rel=1e-3, abs=1e-8)


def test_unknown_composite_score(two_output_models):
    ctx = AcqContext(two_output_models, _hierarchy(2, [0.5, 0.6]), np.zeros((1, 2)), score="nope")
    with pytest.raises(ValueError):
        composite_score(ctx, np.zeros((1, 1, 2)))


def test_ehvi_needs_reference_point(two_output_models):
    ctx = AcqContext(two_output_models, _hierarchy(2, [0.5, 0.6]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        ehvi(ctx, [[0.5]])


PARETO_SETS = [
    np.zeros((0, 2)),
    np.array([[0.5, 0.5]]),
    np.array([[0.8, 0.2], [0.3, 0.7]]),
    np.array([[0.9, 0.1], [0.6, 0.4], [0.2, 0.8]]),
    np.array([[0.55, 0.75], [0.75, 0.35], [0.25, 0.85], [0.85, 0.15]]),
]


@pytest.mark.parametrize("pareto", PARETO_SETS, ids=range(len(PARETO_SETS)))
def test_ehvi_against_grid_oracle(two_output_models, pareto):
    h = _hierarchy(2, [0.5, 0.6])
    ref = np.zeros(2)
    base = sobol_normal(32, 2, seed=5)
    ctx = AcqContext(two_output_models, h, base, pareto=pareto, ref_point=ref)
    x = np.array([[0.45]])
    samples = np.maximum(sample_psi(ctx, x)[0], 1e-9)
    base_hv = grid_hypervolume(pareto.tolist(), ref) if len(pareto) else 0.0
    oracle = np.mean([grid_hypervolume(pareto.tolist() + [s.tolist()], ref) - base_hv for s in samples])
    value = ehvi(ctx, x)[0]
    assert value == pytest.approx(oracle, rel=0.02, abs=2e-3)


def test_ehvi_standard_error_shrinks_like_root_k(two_output_models):
    h = _hierarchy(2, [0.5, 0.6])
    pareto = PARETO_SETS[3]
    x = np.array([[0.45]])

    def estimates(K):
        rng = np.random.default_rng(K)
        vals = []
        for _ in range(200):
            ctx = AcqContext(two_output_models, h, rng.standard_normal((K, 2)), pareto=pareto, ref_point=np.zeros(2))
            vals.append(ehvi(ctx, x)[0])
        return np.std(vals, ddof=1)

    ratio = estimates(64) / estimates(128)
    assert ratio == pytest.approx(math.sqrt(2), rel=0.2)


def test_optimizer_finds_interior_maximum():
    res = optimize_acqf(lambda X: -((X[:, 0] - 0.3) ** 2 + (X[:, 1] - 0.7) ** 2), [[0, 0], [1, 1]])
    np.testing.assert_allclose(res.x, [0.3, 0.7], atol=1e-3)
    assert not res.fallback


def test_optimizer_finds_boundary_maximum():
    res = optimize_acqf(lambda X: X[:, 0], [[-1, -1], [2, 2]])
    assert res.x[0] == pytest.approx(2.0, abs=1e-6)


def test_optimizer_handles_constant_acquisition():
    res = optimize_acqf(lambda X: np.zeros(len(X)), [[0, 5], [1, 6]])
    assert np.all(res.x >= [0, 5]) and np.all(res.x <= [1, 6])


def test_optimizer_falls_back_when_all_restarts_fail():
    def acq(X):
        if len(X) > 256 or len(X) == 256:
            return -np.sum((X - 0.5) ** 2, axis=1)
        raise ValueError("boom")

    res = optimize_acqf(acq, [[0, 0], [1, 1]])
    assert res.fallback
    assert np.all((res.x >= 0) & (res.x <= 1))


def test_optimizer_is_deterministic():
    f = lambda X: np.sin(5 * X[:, 0]) * np.cos(3 * X[:, 1])  # noqa: E731
    a = optimize_acqf(f, [[0, 0], [1, 1]], seed=4)
    b = optimize_acqf(f, [[0, 0], [1, 1]], seed=4)
    np.testing.assert_array_equal(a.x, b.x)
