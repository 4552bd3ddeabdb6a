import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from okselect.errors import InvalidInputError, StateCorruptionError
from okselect.losses import make_loss
from okselect.selectors import (IOKSSelector, LossEstimate, Observation, OKSPlusPlusSelector,
                                OKSSelector, SelectorState, importance_estimate, ioks_estimate,
                                ioks_lr_schedule, ioks_normalizer, ioks_parameters, ioks_solve,
                                ioks_solve_mu, mix_exploration, okspp_schedules, okspp_update,
                                oks_parameters, oks_update, sample_arm)

# root of sum_i (q_i^{-7/8} + eta_i (c_i - mu))^{-8/7} = 1 for q=(.5,.5), eta=(1,1), c=(1,0),
# computed with mpmath at 40 digits
MU_K2 = 0.36454715170180751
Q_K2 = (0.35588674811476262, 0.64411325188523738)


def _state(p):
    s = SelectorState.uniform(len(p), 100)
    s.p = np.asarray(p, dtype=float)
    return s


def _brentq_mu(q, c, eta):
    q, c, eta = map(np.asarray, (q, c, eta))

    def f(mu):
        return np.sum((q ** (-7 / 8) + eta * (c - mu)) ** (-8 / 7)) - 1.0

    pole = np.min(c + q ** (-7 / 8) / eta)
    hi = pole - 1e-9 * max(1.0, abs(pole))
    while f(hi) < 0:
        hi = pole - (pole - hi) / 10
    return brentq(f, min(0.0, c.min()), hi, xtol=1e-15, rtol=1e-15, maxiter=500)


# -- sampling and mixing ---------------------------------------------------

def test_sample_arm_examples():
    assert sample_arm(_state([1, 0, 0, 0]), 0.999) == 0
    assert sample_arm(_state(np.full(6, 1 / 6)), 0.5) == 3
    assert sample_arm(_state([0.25, 0.75]), 0.0) == 0
    assert sample_arm(_state([0.25, 0.75]), 0.25) == 1


def test_sample_arm_rejects_bad_state():
    with pytest.raises(StateCorruptionError):
        sample_arm(_state([0.5, 0.6]), 0.1)
    with pytest.raises(StateCorruptionError):
        sample_arm(_state([np.nan, 1.0]), 0.1)
    with pytest.raises(InvalidInputError):
        sample_arm(_state([0.5, 0.5]), 1.0)


def test_sample_frequencies_match_p():
    s = _state([0.1, 0.6, 0.3])
    draws = np.random.default_rng(0).random(20000)
    counts = np.bincount([sample_arm(s, d) for d in draws], minlength=3) / 20000
    np.testing.assert_allclose(counts, [0.1, 0.6, 0.3], atol=0.015)


def test_mix_exploration_examples():
    np.testing.assert_allclose(mix_exploration([0.5, 0.5], 0.3), [0.5, 0.5])
    np.testing.assert_allclose(mix_exploration([1.0, 0.0], 0.5), [0.75, 0.25])
    np.testing.assert_array_equal(mix_exploration([0.2, 0.8], 0.0), [0.2, 0.8])
    with pytest.raises(InvalidInputError):
        mix_exploration([1.0, 0.0], 1.5)


# -- OKS -------------------------------------------------------------------

def test_oks_update_example():
    s = SelectorState.uniform(2, 10)
    s.eta_global, s.delta = 1.0, 0.0
    oks_update(s, LossEstimate(0, 1.0, np.array([1.0, 0.0])))
    e = math.exp(-1.0)
    np.testing.assert_allclose(s.q, [e / (1 + e), 1 / (1 + e)], rtol=1e-14)
    np.testing.assert_allclose(s.q, [0.2689, 0.7311], atol=5e-5)
    before = s.q.copy()
    oks_update(s, LossEstimate(1, 0.0, np.zeros(2)))
    np.testing.assert_array_equal(s.q, before)


def test_oks_parameters():
    delta, lam, eta = oks_parameters(6, 6000, 1.0, 1.0)
    assert delta == pytest.approx(0.1, rel=1e-12)
    assert lam == pytest.approx(math.sqrt(0.1 / 36000), rel=1e-12)
    assert eta == pytest.approx(math.sqrt(2 * 0.9 * math.log(6)) / math.sqrt(36000), rel=1e-12)


def test_oks_parameters_clip(caplog):
    delta, _, _ = oks_parameters(8, 8, 1.0, 1.0)
    assert delta == 0.99
    assert "clipping" in caplog.text


# -- OKS++ -----------------------------------------------------------------

def test_okspp_initial_schedules():
    loss = make_loss("logistic", radius=15.0)
    s = SelectorState.uniform(6, 100)
    delta, eta, lam = okspp_schedules(s, loss, 15.0, 6)
    assert delta == 0.5
    assert eta == pytest.approx(math.sqrt(2 * math.log(6)))
    # U^{4/3} (G C0 U^2 K^2)^{-1/6} / (sqrt(4/3) K^{1/6} (G C0)^{1/3}) at C~ = 0
    expected = 15 ** (4 / 3) * (225 * 36) ** (-1 / 6) / (math.sqrt(4 / 3) * 6 ** (1 / 6))
    np.testing.assert_allclose(lam, expected, rtol=1e-12)


def test_okspp_second_order_losses_use_unit_G():
    sq = make_loss("square", radius=1.0)
    s = SelectorState.uniform(2, 100)
    delta, _, lam = okspp_schedules(s, sq, 1.0, 2)
    a = 4 ** (1 / 3) * 2 ** (2 / 3)
    assert delta == pytest.approx(a / (2 * a))
    expected = (4 * 4) ** (-1 / 6) / (math.sqrt(4 / 3) * 2 ** (1 / 6) * 4 ** (1 / 3))
    np.testing.assert_allclose(lam, expected, rtol=1e-12)


def test_okspp_update_example():
    loss = make_loss("square")
    s = SelectorState.uniform(2, 100)
    s.q = np.array([0.5, 0.5])
    okspp_update(s, LossEstimate(0, 1.0, np.array([2.0, 0.0])), s.q.copy(), loss, 1.0)
    assert s.tilde_C == 2.0 and s.Delta[0] == 2.0 and s.delta_sum_qc2 == 2.0
    eta = math.sqrt(2 * math.log(2)) / math.sqrt(3.0)
    np.testing.assert_allclose(s.q, np.array([math.exp(-2 * eta), 1.0]) / (1 + math.exp(-2 * eta)), rtol=1e-14)
    # the stated form: q ~ (e^{-1}, 1) when eta_t = 0.5 and c~ = (2, 0)
    z = np.exp(-0.5 * np.array([2.0, 0.0]))
    np.testing.assert_allclose(z / z.sum(), [math.exp(-1) / (1 + math.exp(-1)), 1 / (1 + math.exp(-1))])


def test_okspp_equal_cumulative_gives_uniform():
    loss = make_loss("logistic", radius=15.0)
    sel = OKSPlusPlusSelector(3, 100, loss, 15.0)
    for arm in range(3):
        sel.state.p = np.full(3, 1 / 3)
        sel.update(Observation(arm, 0.4, 1 / 3))
    np.testing.assert_allclose(sel.state.q, np.full(3, 1 / 3), rtol=1e-14)


def test_okspp_rejects_nonsmooth():
    with pytest.raises(InvalidInputError):
        OKSPlusPlusSelector(2, 10, make_loss("hinge"), 1.0)


# -- IOKS ------------------------------------------------------------------

def test_ioks_parameters():
    delta, eta, ups = ioks_parameters(6, 10000, 1.0, 1.0, 1.0, "theory")
    assert delta == pytest.approx(0.001, rel=1e-12)
    assert ups == pytest.approx(math.exp(2 / (3 * math.log(10000))))
    assert eta == pytest.approx(3 * 6 ** 0.375 / (2 * math.sqrt(10000 * math.log(10000))))
    _, eta_exp, _ = ioks_parameters(6, 10000, 1.0, 1.0, 1.0, "experiment")
    assert eta / eta_exp == pytest.approx(0.1875)
    with pytest.raises(InvalidInputError):
        ioks_parameters(6, 1, 1.0, 1.0, 1.0)


def test_ioks_estimate_branches():
    eta = np.array([0.1, 0.05])
    assert ioks_estimate(0.3, [0.5, 0.5], 0, eta).estimate[0] == pytest.approx(0.6)
    assert ioks_estimate(0.3, [0.05, 0.95], 0, eta).estimate[0] == pytest.approx(2.0)
    assert not np.any(ioks_estimate(0.0, [0.5, 0.5], 1, eta).estimate)
    with pytest.raises(InvalidInputError):
        ioks_estimate(1.5, [0.5, 0.5], 0, eta)


def test_ioks_estimator_unbiased_by_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        K = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(K)) * 0.5 + 0.5 / K
        eta = np.full(K, p.min() * 0.9)
        c = rng.uniform(0, 1, K)
        mean = sum(p[i] * ioks_estimate(c[i], p, i, eta).estimate for i in range(K))
        np.testing.assert_allclose(mean, c, rtol=1e-12)


def test_ioks_estimator_downward_bias_when_clipped():
    rng = np.random.default_rng(1)
    for _ in range(20):
        K = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(K))
        eta = np.full(K, p.max())
        c = rng.uniform(0, 1, K)
        mean = sum(p[i] * ioks_estimate(c[i], p, i, eta).estimate for i in range(K))
        assert np.all(mean <= c + 1e-15)


def test_ioks_solve_mu_frozen_example():
    mu = ioks_solve_mu([0.5, 0.5], [1.0, 0.0], [1.0, 1.0])
    assert mu == pytest.approx(MU_K2, abs=1e-12)
    q = ioks_solve(np.array([0.5, 0.5]), LossEstimate(0, 1.0, np.array([1.0, 0.0])), np.ones(2))
    np.testing.assert_allclose(q, Q_K2, atol=1e-12)


def test_ioks_solve_mu_matches_brentq():
    rng = np.random.default_rng(2)
    for _ in range(50):
        K = int(rng.integers(2, 8))
        q = rng.dirichlet(np.ones(K))
        eta = rng.uniform(0.01, 2.0, K)
        c = np.zeros(K)
        c[rng.integers(K)] = rng.uniform(0, 50)
        mu = ioks_solve_mu(q, c, eta)
        assert mu == pytest.approx(_brentq_mu(q, c, eta), abs=1e-9)
        assert abs(ioks_normalizer(q, c, eta, mu) - 1.0) <= 1e-10


def test_ioks_zero_estimate_is_fixed_point():
    q = np.array([0.2, 0.3, 0.5])
    out = ioks_solve(q, LossEstimate(1, 0.0, np.zeros(3)), np.full(3, 0.1))
    np.testing.assert_array_equal(out, q)
    assert ioks_solve_mu(q, np.zeros(3), np.full(3, 0.1)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1), st.floats(0.0, 100.0))
def test_ioks_solve_normalized_and_permutation_equivariant(K, seed, loss):
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.ones(K)) * 0.99 + 0.01 / K
    eta = rng.uniform(0.001, 1.0, K)
    arm = int(rng.integers(K))
    c = np.zeros(K)
    c[arm] = loss
    q_next = ioks_solve(q, LossEstimate(arm, loss, c), eta)
    assert abs(q_next.sum() - 1.0) <= 1e-10
    assert np.all(q_next > 0)
    perm = rng.permutation(K)
    c_p = c[perm]
    q_perm = ioks_solve(q[perm], LossEstimate(int(np.flatnonzero(perm == arm)[0]), loss, c_p), eta[perm])
    np.testing.assert_allclose(q_perm, q_next[perm], rtol=1e-8, atol=1e-14)


def test_ioks_solve_monotone_in_own_loss():
    rng = np.random.default_rng(3)
    for _ in range(30):
        K = int(rng.integers(2, 6))
        q = rng.dirichlet(np.ones(K))
        eta = rng.uniform(0.01, 1.0, K)
        arm = int(rng.integers(K))
        lo, hi = sorted(rng.uniform(0, 20, 2))
        c_lo, c_hi = np.zeros(K), np.zeros(K)
        c_lo[arm], c_hi[arm] = lo, hi
        a = ioks_solve(q, LossEstimate(arm, lo, c_lo), eta)
        b = ioks_solve(q, LossEstimate(arm, hi, c_hi), eta)
        assert b[arm] <= a[arm] + 1e-12
        others = np.arange(K) != arm
        assert np.all(b[others] >= a[others] - 1e-12)


def test_ioks_lr_schedule():
    s = SelectorState.uniform(2, 100)
    s.upsilon = 1.5
    s.eta_per_arm = np.array([0.1, 0.1])
    ioks_lr_schedule(s, np.array([0.5, 0.5]))
    np.testing.assert_array_equal(s.eta_per_arm, [0.1, 0.1])
    np.testing.assert_array_equal(s.rho, [4.0, 4.0])
    ioks_lr_schedule(s, np.array([0.8, 0.2]))
    np.testing.assert_allclose(s.eta_per_arm, [0.1, 0.15])
    np.testing.assert_allclose(s.rho, [4.0, 10.0])
    assert list(s.raises) == [0, 1]


# -- composite updates -----------------------------------------------------

def _selectors(K, T):
    sq = make_loss("square")
    return [
        OKSSelector.from_theory(K, T),
        OKSPlusPlusSelector(K, T, sq, 1.0),
        IOKSSelector.from_theory(K, T, sq, 1.0),
    ]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_distribution_invariants_after_every_update(K, seed):
    rng = np.random.default_rng(seed)
    T = 200
    for sel in _selectors(K, T):
        eta_prev = sel.state.eta_per_arm.copy()
        rho_prev = sel.state.rho.copy()
        for _ in range(60):
            arm = sel.sample(float(rng.random()))
            sel.update(Observation(arm, float(rng.uniform(0, 1)), float(sel.p[arm]), float(rng.uniform(0, 5))))
            st_ = sel.state
            for vec in (st_.q, st_.p):
                assert abs(vec.sum() - 1.0) <= 1e-10 and np.all(vec >= 0)
            if st_.delta > 0:
                assert np.all(st_.p >= st_.delta / K * (1 - 1e-12))
            assert np.all(st_.eta_per_arm >= eta_prev) and np.all(st_.rho >= rho_prev)
            eta_prev, rho_prev = st_.eta_per_arm.copy(), st_.rho.copy()
            assert sel.stepsize(arm) > 0


def test_single_arm_is_degenerate():
    for sel in _selectors(1, 50):
        for _ in range(10):
            assert sel.sample(0.7) == 0
            sel.update(Observation(0, 0.5, 1.0))
        np.testing.assert_array_equal(sel.p, [1.0])


def test_importance_estimate_is_one_hot():
    est = importance_estimate(1, 0.3, np.array([0.4, 0.6]), 2)
    np.testing.assert_allclose(est.estimate, [0.0, 0.5])


def test_ioks_stepsize_tracks_gradient_sum():
    sel = IOKSSelector.from_theory(2, 100, make_loss("square"), 2.0)
    sel.update(Observation(0, 0.5, 0.5, grad_sq=3.0))
    assert sel.stepsize(0) == pytest.approx(2.0 / (math.sqrt(2) * 2.0))
    assert sel.stepsize(1) == pytest.approx(2.0 / math.sqrt(2))
