import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from tierbo import gp
from tierbo.campaign import (
    STRATEGIES,
    CampaignConfig,
    CampaignResult,
    RepeatTrace,
    aggregate,
    average_ranks,
    rank_correlation_study,
    run_campaign,
    run_repeat,
    spearman,
    trace_metrics,
    with_overrides,
)
from tierbo.scalar import ScoreParams, botier_score


def test_config_validation():
    with pytest.raises(ValueError):
        CampaignConfig("BNH", strategy="random")
    with pytest.raises(ValueError):
        CampaignConfig("BNH", budget=1, n_seed=2)
    with pytest.raises(ValueError):
        CampaignConfig("BNH", repeats=0)
    with pytest.raises(ValueError):
        CampaignConfig("BNH", k=0)
    with pytest.raises(KeyError):
        CampaignConfig("nope")
    with pytest.raises(ValueError):
        CampaignConfig("BNH", penalty_weights=(1.0,))


def test_defaults_follow_the_protocol():
    cfg = CampaignConfig("BNH")
    assert (cfg.budget, cfg.n_seed, cfg.repeats, cfg.k, cfg.mc_samples) == (50, 1, 50, 100.0, 128)
    assert CampaignConfig("ZDT1", starred=True).label == "ZDT1*"


def test_sobol_strategy_fills_the_budget():
    tr = run_repeat(CampaignConfig("BNH", strategy="sobol", budget=50, repeats=1), 0)
    assert tr.X.shape == (50, 2) and tr.n_failures == 0
    assert np.all(np.diff(tr.best_xi) >= 0)


def test_budget_equal_to_seed_count():
    tr = run_repeat(CampaignConfig("DH4", strategy="botier-composite", budget=1, repeats=1), 0)
    assert tr.n_iter == 1 and tr.is_seed.all()


@pytest.mark.parametrize("strategy", [s for s in STRATEGIES if s != "sobol"])
def test_every_strategy_runs_and_is_deterministic(strategy):
    cfg = CampaignConfig("BNH", starred=True, strategy=strategy, budget=4, repeats=1, mc_samples=16, seed=3)
    a, b = run_repeat(cfg, 0), run_repeat(cfg, 0)
    np.testing.assert_array_equal(a.X, b.X)
    assert a.n_iter == 4 and a.is_seed.sum() == 1
    assert np.all(np.diff(a.best_xi) >= 0)
    assert np.all(np.diff(a.first_hit) >= 0)


def test_repeats_differ_and_seed_matters():
    cfg = CampaignConfig("ZDT1", strategy="sobol", budget=5, repeats=2, seed=0)
    res = run_campaign(cfg)
    assert not np.array_equal(res.traces[0].X, res.traces[1].X)
    other = run_repeat(with_overrides(cfg, seed=1), 0)
    assert not np.array_equal(res.traces[0].X, other.X)


def test_parallel_matches_serial():
    cfg = CampaignConfig("BNH", strategy="botier-blackbox", budget=3, repeats=2, seed=2)
    a, b = run_campaign(cfg, jobs=1), run_campaign(cfg, jobs=2)
    for ta, tb in zip(a.traces, b.traces):
        np.testing.assert_array_equal(ta.X, tb.X)


def test_surrogate_failure_falls_back_to_sobol(monkeypatch):
    def broken(*args, **kwargs):
        raise gp.NumericalError("forced")

    monkeypatch.setattr(gp, "fit", broken)
    tr = run_repeat(CampaignConfig("BNH", strategy="botier-composite", budget=4, repeats=1), 0)
    assert tr.n_iter == 4 and tr.n_failures == 3


def test_trace_metrics_by_hand():
    t = np.array([1.0, 0.5])
    psi = np.array([[0.5, 9.0], [2.0, 0.1], [1.5, 0.7], [0.9, 0.9]])
    m = trace_metrics(psi, t, budget=4)
    np.testing.assert_allclose(m["xi"], [0.5, 1.1, 1.5, 0.9])
    np.testing.assert_allclose(m["best_xi"], [0.5, 1.1, 1.5, 1.5])
    np.testing.assert_array_equal(m["n_satisfied_best"], [0, 1, 2, 2])
    np.testing.assert_array_equal(m["cum_max_n"], [0, 1, 2, 2])
    np.testing.assert_array_equal(m["first_hit"], [2, 3])


def test_trace_metrics_ties_keep_the_earliest_point():
    t = np.array([1.0, 0.5])
    psi = np.array([[2.0, 0.5], [3.0, 0.5]])  # same Xi, second has nothing extra
    m = trace_metrics(psi, t)
    assert m["best_xi"][1] == m["xi"][0]


def test_trace_metrics_censoring():
    m = trace_metrics(np.array([[0.0, 0.0]]), np.array([1.0, 1.0]), budget=50)
    np.testing.assert_array_equal(m["first_hit"], [51, 51])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=1, max_size=30),
       st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_metric_invariants(psi, t):
    m = trace_metrics(np.array(psi), np.array(t))
    assert np.all(np.diff(m["best_xi"]) >= 0)
    assert np.all(np.diff(m["first_hit"]) >= 0)
    assert np.all(np.diff(m["cum_max_n"]) >= 0)
    np.testing.assert_allclose(m["xi"], botier_score(np.array(psi), t, ScoreParams(exact=True)))


def test_chimera_rescoring_leaves_metrics_untouched():
    cfg = CampaignConfig("BNH", strategy="chimera-blackbox", budget=5, repeats=1, seed=1)
    tr = run_repeat(cfg, 0)
    h = cfg.resolved_hierarchy()
    for n in range(2, 6):
        early = trace_metrics(tr.psi[:n], h.thresholds)
        np.testing.assert_array_equal(early["best_xi"], tr.best_xi[:n])


def _trace(best, first):
    n = len(best)
    z = np.zeros((n, 1))
    return RepeatTrace(0, z, z, z, np.array(best), np.array(best), np.zeros(n, int), np.zeros(n, int),
                       np.array(first), np.zeros(n, bool))


def test_aggregate_identical_repeats():
    s = aggregate([_trace([0.1, 0.2, 0.3], [2, 3]) for _ in range(4)])
    np.testing.assert_allclose(s["best_xi_se"], 0.0)
    assert s["final_best_xi_mean"] == pytest.approx(0.3)
    assert s["satisfaction_probability"]["1"] == [0.0, 1.0, 1.0]


def test_aggregate_censoring_and_monotone_curves():
    rng = np.random.default_rng(0)
    traces = []
    for _ in range(50):
        hit = int(rng.integers(1, 60))
        hit = hit if hit <= 50 else 51
        traces.append(_trace(np.linspace(0, 1, 50), [hit]))
    s = aggregate(traces, budget=50)
    curve = np.array(s["satisfaction_probability"]["1"])
    assert np.all(np.diff(curve) >= 0)
    assert s["censor_value"] == 51
    assert s["first_hit"]["1"]["censored"] == sum(t.first_hit[0] == 51 for t in traces)


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate([_trace([0.1], [1])])
    with pytest.raises(ValueError):
        aggregate([_trace([0.1], [1]), _trace([0.1, 0.2], [1])])


def test_aggregate_accepts_campaign_result():
    cfg = CampaignConfig("BNH", strategy="sobol", budget=6, repeats=3)
    res = run_campaign(cfg)
    assert isinstance(res, CampaignResult)
    s = aggregate(res)
    assert s["repeats"] == 3 and len(s["best_xi_mean"]) == 6


@given(st.lists(st.integers(0, 5), min_size=2, max_size=40))
def test_average_ranks_match_scipy(values):
    from scipy.stats import rankdata

    np.testing.assert_allclose(average_ranks(values), rankdata(values))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-10, 10)), min_size=3, max_size=40))
def test_spearman_matches_scipy(pairs):
    a, b = np.array(pairs).T
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return
    assert spearman(a, b) == pytest.approx(spearmanr(a, b).statistic, abs=1e-12)


def test_spearman_of_constant_input_is_nan_with_warning():
    with pytest.warns(RuntimeWarning):
        assert np.isnan(spearman([1.0, 1.0], [2.0, 3.0]))


def test_correlation_study_shapes():
    study = rank_correlation_study("DH4", n_points=256)
    assert study.X.shape == (256, 6) and study.botier.shape == (256,)
    assert study.surface == "DH4" and -1 <= study.spearman_r <= 1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rank_correlation_study("ZDT1", starred=True, n_points=64)
