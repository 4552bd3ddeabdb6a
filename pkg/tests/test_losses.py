import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from okselect.errors import InvalidInputError, UnsupportedError
from okselect.losses import (LossKind, loss_derivative, loss_derivatives, loss_value, loss_values,
                             make_loss, smoothness_check)

SMOOTH = ["logistic", "square", "squared_hinge"]
ALL = [k.value for k in LossKind]


def _label(kind, rng):
    if kind in ("logistic", "hinge", "squared_hinge"):
        return float(rng.choice([-1.0, 1.0]))
    return float(rng.uniform(0.0, 1.0))


def test_values_from_closed_forms():
    assert loss_value(make_loss("logistic"), 0.0, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert loss_value(make_loss("square"), 0.5, 0.5) == 0.0
    assert loss_value(make_loss("absolute"), 0.2, 0.5) == pytest.approx(0.3, abs=1e-15)
    assert loss_value(make_loss("hinge"), 0.25, 1.0) == 0.75
    assert loss_value(make_loss("squared_hinge"), -1.0, 1.0) == 4.0


def test_derivatives_from_closed_forms():
    assert loss_derivative(make_loss("square"), 0.0, 1.0) == -2.0
    assert loss_derivative(make_loss("logistic"), 0.0, 1.0) == -0.5
    assert loss_derivative(make_loss("absolute"), 0.5, 0.5) == 0.0
    assert loss_derivative(make_loss("hinge"), 1.0, 1.0) == 0.0
    assert loss_derivative(make_loss("hinge"), 0.0, -1.0) == 1.0


def test_logistic_is_stable_for_large_margins():
    loss = make_loss("logistic")
    assert loss_value(loss, -800.0, 1.0) == pytest.approx(800.0)
    assert loss_value(loss, 800.0, 1.0) == 0.0
    assert loss_derivative(loss, -800.0, 1.0) == -1.0
    assert loss_derivative(loss, 800.0, 1.0) == pytest.approx(0.0, abs=1e-300)


def test_constants():
    lg = make_loss("logistic", radius=15.0)
    assert (lg.nu, lg.c0, lg.g_scalar) == (1, 1.0, 1.0)
    assert lg.ell_max == pytest.approx(math.log1p(math.exp(15.0)))
    sq = make_loss("square", radius=1.0)
    assert (sq.nu, sq.c0) == (2, 4.0)
    # G <= 2(U + 1) for square loss at B = 1
    assert sq.g_scalar == 4.0 and sq.ell_max == 4.0
    ab = make_loss("absolute", radius=2.0, feature_bound=math.sqrt(2.0))
    assert ab.nu is None and ab.ell_max == pytest.approx(2.0 * math.sqrt(2.0) + 1.0)
    assert ab.g_rkhs == pytest.approx(math.sqrt(2.0))
    assert make_loss("square", ell_max=1.0).ell_max == 1.0
    assert sq.with_ell_max(1.0).ell_max == 1.0


@pytest.mark.parametrize("kind", SMOOTH)
def test_smoothness_on_random_samples(kind):
    loss = make_loss(kind)
    rng = np.random.default_rng(7)
    samples = [(float(rng.uniform(-16, 16)), _label(kind, rng)) for _ in range(1000)]
    assert smoothness_check(loss, samples)


@pytest.mark.parametrize("kind", ["absolute", "hinge"])
def test_smoothness_unsupported_for_nonsmooth(kind):
    with pytest.raises(UnsupportedError):
        smoothness_check(make_loss(kind), [(0.0, 1.0)])


def test_smoothness_check_detects_violation():
    # a loss claiming a too-small constant must fail the check
    loss = make_loss("square")
    weak = type(loss)(loss.kind, 2, 0.5, loss.ell_max, loss.g_scalar, loss.g_rkhs)
    assert not smoothness_check(weak, [(0.0, 1.0)])


@pytest.mark.parametrize("kind", ALL)
def test_derivative_matches_central_difference(kind):
    loss = make_loss(kind)
    rng = np.random.default_rng(11)
    h = 1e-6
    checked = 0
    while checked < 200:
        a = float(rng.uniform(-4, 4))
        y = _label(kind, rng)
        if kind in ("hinge", "squared_hinge") and abs(1.0 - y * a) < 1e-3:
            continue
        if kind == "absolute" and abs(a - y) < 1e-3:
            continue
        fd = (loss_value(loss, a + h, y) - loss_value(loss, a - h, y)) / (2 * h)
        d = loss_derivative(loss, a, y)
        assert abs(fd - d) <= 1e-6 * max(1.0, abs(d))
        checked += 1


@pytest.mark.parametrize("kind", ALL)
def test_vectorised_forms_agree(kind):
    loss = make_loss(kind)
    rng = np.random.default_rng(3)
    a = rng.uniform(-20, 20, 500)
    y = np.array([_label(kind, rng) for _ in range(500)])
    np.testing.assert_allclose(loss_values(loss, a, y), [loss_value(loss, u, v) for u, v in zip(a, y)],
                               rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(loss_derivatives(loss, a, y),
                               [loss_derivative(loss, u, v) for u, v in zip(a, y)], rtol=1e-12, atol=1e-300)


def test_square_gradient_bound():
    loss = make_loss("square", radius=1.0)
    rng = np.random.default_rng(5)
    for a, y in zip(rng.uniform(-1, 1, 1000), rng.uniform(-1, 1, 1000)):
        assert abs(loss_derivative(loss, a, y)) <= loss.g_scalar


def test_invalid_inputs():
    with pytest.raises(InvalidInputError):
        loss_value(make_loss("square"), float("nan"), 0.0)
    with pytest.raises(InvalidInputError):
        loss_derivative(make_loss("square"), 0.0, float("inf"))
    with pytest.raises(InvalidInputError):
        loss_value(make_loss("logistic"), 0.0, 0.5)
    with pytest.raises(UnsupportedError):
        make_loss("cubic")


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL), st.floats(-50, 50), st.sampled_from([-1.0, 1.0]), st.floats(0, 1))
def test_loss_is_nonnegative(kind, a, sign, reg_label):
    y = sign if kind in ("logistic", "hinge", "squared_hinge") else reg_label
    assert loss_value(make_loss(kind), a, y) >= 0.0
