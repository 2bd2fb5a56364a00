import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import botier_literal, chimera_literal
from tierbo.scalar import (
    ScoreParams,
    botier_grad,
    botier_score,
    chimera_score,
    heaviside,
    penalty_score,
    smooth_heaviside,
    smooth_max,
    smooth_min,
)

EXACT = ScoreParams(exact=True)
reals = st.floats(-50, 50, allow_nan=False)


def vectors(n):
    return st.lists(reals, min_size=n, max_size=n)


# smooth primitives

@pytest.mark.parametrize("k", [0.1, 1.0, 100.0])
def test_smooth_heaviside_half_at_zero(k):
    assert smooth_heaviside(0.0, k) == 0.5


def test_smooth_heaviside_values():
    assert smooth_heaviside(0.01, 100) == pytest.approx(1 / (1 + math.e**-1), abs=1e-12)
    assert smooth_heaviside(1e6, 100) == 1.0
    assert smooth_heaviside(-1e6, 100) == 0.0


def test_smooth_heaviside_no_overflow_at_large_kx():
    with np.errstate(over="raise"):
        v = smooth_heaviside(np.array([-10.0, 10.0]), 100)
    np.testing.assert_allclose(v, [0.0, 1.0], atol=1e-300)


@pytest.mark.parametrize("bad", [(0.0, 0.0), (0.0, -1.0), (float("nan"), 1.0), (float("inf"), 1.0)])
def test_smooth_heaviside_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        smooth_heaviside(*bad)


def test_heaviside_is_one_at_zero():
    np.testing.assert_array_equal(heaviside([-1e-300, 0.0, 2.0]), [0.0, 1.0, 1.0])


@given(reals, reals)
def test_smooth_heaviside_monotone(a, b):
    lo, hi = sorted((a, b))
    assert smooth_heaviside(lo, 10) <= smooth_heaviside(hi, 10)


def test_smooth_min_examples():
    assert smooth_min(3.25, 3.25, 7) == 3.25
    assert smooth_min(1.0, 2.0, 1e6) == pytest.approx(1.0)
    assert smooth_min(0.0, 0.02, 100) == pytest.approx(0.02 * math.exp(-2) / (1 + math.exp(-2)), rel=1e-12)
    assert smooth_min(0.0, 0.02, 100) == pytest.approx(0.002385, abs=1e-6)


def test_smooth_min_survives_large_arguments():
    with np.errstate(over="raise"):
        assert smooth_min(-1e4, 1e4, 100) == pytest.approx(-1e4)


@given(reals, reals, st.sampled_from([1.0, 10.0, 100.0]))
def test_smooth_min_symmetric_and_bounded(a, b, k):
    v = smooth_min(a, b, k)
    assert v == pytest.approx(smooth_min(b, a, k), abs=1e-12)
    assert v <= max(a, b) + 1e-12
    assert v >= min(a, b) - 1e-12


@pytest.mark.parametrize("k", [1.0, 10.0, 100.0])
def test_softmin_error_bound(k):
    rng = np.random.default_rng(int(k))
    a, b = rng.uniform(-5, 5, (2, 10_000))
    err = np.abs(smooth_min(a, b, k) - np.minimum(a, b))
    assert err.max() <= math.log(2) / k


def test_smooth_max_mirrors_smooth_min():
    assert smooth_max(1.0, 2.0, 50) == pytest.approx(-smooth_min(-1.0, -2.0, 50))
    assert smooth_max(1.0, 2.0, 1e6) == pytest.approx(2.0)


# BoTier score

def test_botier_examples():
    assert botier_score([0.5], [1.0], EXACT) == 0.5
    assert botier_score([2.0, 0.3], [1.0, 0.5], EXACT) == pytest.approx(1.3)
    assert botier_score([0.9, 99.0], [1.0, 0.5], EXACT) == pytest.approx(0.9)


def test_botier_rejects_length_mismatch():
    with pytest.raises(ValueError):
        botier_score([1.0, 2.0], [1.0], EXACT)


def test_botier_batch_shape():
    psi = np.zeros((4, 3, 2))
    assert botier_score(psi, [1.0, 1.0]).shape == (4, 3)


@given(vectors(3), vectors(3))
def test_botier_matches_literal(psi, t):
    assert botier_score(psi, t, EXACT) == pytest.approx(botier_literal(psi, t), abs=1e-12)


@given(vectors(3), vectors(2))
def test_tier_gating(psi, noise):
    t = [0.0, 0.0, 0.0]
    psi = [-abs(psi[0]) - 1e-3, psi[1], psi[2]]
    base = botier_score(psi, t, EXACT)
    assert botier_score([psi[0], noise[0], noise[1]], t, EXACT) == base


unit = st.floats(0, 1)


@given(st.lists(unit, min_size=3, max_size=3), st.lists(unit, min_size=3, max_size=3), st.integers(0, 2), unit)
def test_botier_monotone_on_normalized_objectives(psi, t, i, bump):
    up = list(psi)
    up[i] = min(1.0, up[i] + bump)
    assert botier_score(up, t, EXACT) >= botier_score(psi, t, EXACT) - 1e-12


def test_raw_negative_tiers_can_lower_the_score():
    # opening a gate adds min(psi_next, t_next), which is negative here
    t = [0.0, -1.0]
    assert botier_score([0.0, -3.0], t, EXACT) < botier_score([-0.5, -3.0], t, EXACT)


@given(vectors(3), vectors(3), st.integers(0, 2))
def test_botier_lipschitz_while_gates_hold(psi, t, i):
    eps = 1e-7
    moved = list(psi)
    moved[i] += eps
    gates_same = all((a >= b) == (c >= b) for a, c, b in zip(psi, moved, t))
    if gates_same:
        assert abs(botier_score(moved, t, EXACT) - botier_score(psi, t, EXACT)) <= 3 * eps + 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_gate_opening_adds_the_next_tier(next_value, t0, t1):
    # the lower tier switches on as the upper one reaches its threshold
    t = [t0, t1]
    at = botier_score([t0, next_value], t, EXACT)
    below = botier_score([np.nextafter(t0, -np.inf), next_value], t, EXACT)
    assert at - below == pytest.approx(min(next_value, t1), abs=1e-9)


@given(vectors(3), vectors(3))
def test_smooth_agrees_with_exact_away_from_thresholds(psi, t):
    k = 100.0
    psi = [p if abs(p - q) >= 10 / k else q + 10 / k for p, q in zip(psi, t)]
    exact = botier_score(psi, t, EXACT)
    smooth = botier_score(psi, t, ScoreParams(k=k))
    assert abs(smooth - exact) <= 1e-3 * (1 + abs(exact))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    k = 100.0
    for _ in range(100):
        n = rng.integers(1, 4)
        t = rng.uniform(-1, 1, n)
        psi = t + rng.uniform(-0.05, 0.05, n)
        g = botier_grad(psi, t, k)
        h = 1e-6
        fd = np.array([
            (botier_score(psi + h * e, t, ScoreParams(k)) - botier_score(psi - h * e, t, ScoreParams(k))) / (2 * h)
            for e in np.eye(n)
        ])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_score_params_validation():
    with pytest.raises(ValueError):
        ScoreParams(k=0)
    with pytest.raises(ValueError):
        ScoreParams(k=float("inf"))


# Chimera

def test_chimera_examples():
    np.testing.assert_allclose(chimera_score([[0.5]], [1.0]), [0.5])
    np.testing.assert_allclose(chimera_score([[2.0]], [1.0]), [4.0])


def test_chimera_rejects_empty():
    with pytest.raises(ValueError):
        chimera_score(np.zeros((0, 2)), [1.0, 1.0])


@settings(max_examples=50)
@given(st.lists(vectors(3), min_size=1, max_size=8), vectors(3))
def test_chimera_matches_literal(data, t):
    np.testing.assert_allclose(chimera_score(data, t), chimera_literal(data, t), rtol=0, atol=1e-12)


def test_chimera_depends_on_the_dataset():
    t = [0.0, 0.0]
    data = [[1.0, -1.0], [2.0, 0.5]]
    before = chimera_score(data, t)
    after = chimera_score(data + [[5.0, -3.0]], t)
    assert before[0] != after[0]


# penalty

def test_penalty_examples():
    assert penalty_score([0.9, 0.9], [0.5, 0.5], [1, 1]) == pytest.approx(0.9)
    assert penalty_score([0.3, 0.9], [0.5, 0.5], [1, 1]) == pytest.approx(0.1)
    assert penalty_score([0.3, 0.1], [0.5, 0.5], [2, 1]) == pytest.approx(-0.5)
    assert penalty_score([0.3, 0.9], [0.5, 0.5]) == pytest.approx(0.1)


def test_penalty_rejects_bad_weights():
    with pytest.raises(ValueError):
        penalty_score([0.3, 0.9], [0.5, 0.5], [1, 0])
    with pytest.raises(ValueError):
        penalty_score([0.3, 0.9], [0.5], [1])
