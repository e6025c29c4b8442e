from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotrack.errors import NonFiniteInput, OutOfHorizon, ScenarioValidationError
from hotrack.models import (
    LeaderInput,
    Nonlinearity,
    audit_leader_input,
    audit_nonlinearity,
    check_order,
    cosine_sum,
    custom_nonlinearity,
    leader_input_eval,
    linear_drift,
    lipschitz_for_cosine_sum,
    lipschitz_violations,
    max_input_rate,
    no_nonlinearity,
    nonlinear_drift,
)


@pytest.mark.parametrize("x, u, want", [
    ((0, 0, 0), 0, (0, 0, 0)),
    ((1, 2, 3), 4, (2, 3, 4)),
    ((0, 1, 0, -1), 2, (1, 0, -1, 2)),
])
def test_linear_drift(x, u, want):
    assert linear_drift(np.array(x, float), u).tolist() == list(want)


def test_linear_drift_rejects_nan():
    with pytest.raises(NonFiniteInput):
        linear_drift(np.array([0.0, np.nan, 0.0]), 0.0)
    with pytest.raises(NonFiniteInput):
        linear_drift(np.zeros(3), np.inf)


def test_zero_nonlinearity_matches_linear():
    x = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(nonlinear_drift(x, 0.7, no_nonlinearity(3)), linear_drift(x, 0.7))


def test_cosine_sum_at_origin():
    assert nonlinear_drift(np.zeros(3), 0.0, cosine_sum(3)).tolist() == [1.0, 2.0, 3.0]


def test_cosine_sum_direct_evaluation():
    out = nonlinear_drift(np.array([math.pi / 2, math.pi, 0.0]), 1.0, cosine_sum(3))
    assert out == pytest.approx([math.pi, -1.0, 1.0], abs=1e-12)


def test_drift_is_row_wise():
    x = np.array([[0.0, 0.0, 0.0], [math.pi / 2, math.pi, 0.0]])
    out = nonlinear_drift(x, np.array([0.0, 1.0]), cosine_sum(3))
    assert out[0].tolist() == [1.0, 2.0, 3.0]
    assert out[1] == pytest.approx([math.pi, -1.0, 1.0], abs=1e-12)


def test_reference_sinusoid():
    u0 = LeaderInput.sinusoid(1.0, 0.2 * math.pi)
    assert leader_input_eval(u0, 0.0) == 0.0
    assert leader_input_eval(u0, 2.5) == pytest.approx(1.0, abs=1e-15)
    assert u0.derivative(0.0) == pytest.approx(0.2 * math.pi)


@pytest.mark.parametrize("t", [0.0, 1.5, -3.0, 1e4])
def test_zero_input(t):
    assert leader_input_eval(LeaderInput(), t) == 0.0


def test_polynomial_input():
    u0 = LeaderInput("polynomial", coefficients=(2.0, -1.0, 3.0))  # 2t^2 - t + 3
    assert u0(2.0) == 9.0
    assert u0.derivative(2.0) == 7.0


def test_table_input_is_c1_and_bounded_in_time():
    ts = np.linspace(0, 10, 21)
    u0 = LeaderInput("table", table_t=tuple(ts), table_u=tuple(np.sin(ts)))
    assert u0(5.0) == pytest.approx(math.sin(5.0), abs=1e-3)
    h = 1e-6
    assert u0.derivative(3.3) == pytest.approx((u0(3.3 + h) - u0(3.3 - h)) / (2 * h), rel=1e-5)
    with pytest.raises(OutOfHorizon):
        u0(10.5)
    with pytest.raises(OutOfHorizon):
        u0.derivative(-1.0)


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        LeaderInput("table", table_t=(0.0, 0.0), table_u=(1.0, 2.0))
    with pytest.raises(ValueError):
        LeaderInput("table", table_t=(0.0,), table_u=(1.0,))
    with pytest.raises(ValueError):
        LeaderInput("square")


def test_input_rate_audit():
    u0 = LeaderInput.sinusoid(2.0, 0.5, derivative_bound=1.0)
    assert max_input_rate(u0, 20.0) == pytest.approx(1.0, rel=1e-6)
    assert audit_leader_input(u0, 20.0)[0]
    tight = LeaderInput.sinusoid(2.0, 0.5, derivative_bound=0.9)
    ok, rate = audit_leader_input(tight, 20.0)
    assert not ok and rate == pytest.approx(1.0, rel=1e-6)


def test_cosine_sum_constants():
    rho = lipschitz_for_cosine_sum(4)
    assert rho[0] == 1.0
    assert rho[3] == 2.0
    assert cosine_sum(4).lipschitz_constants == tuple(rho)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_cosine_sum_bound_holds_on_samples(m):
    rng = np.random.default_rng(m)
    f = cosine_sum(5)
    xi = rng.uniform(-10, 10, (10_000, m))
    eps = rng.uniform(-10, 10, (10_000, m))
    ratio = np.abs(f.evaluate(m, xi) - f.evaluate(m, eps)) / np.linalg.norm(xi - eps, axis=1)
    assert ratio.max() <= math.sqrt(m)
    assert lipschitz_violations(f, seed=m) == []


def test_chain_evaluation_matches_per_order():
    rng = np.random.default_rng(0)
    chain = rng.normal(size=(7, 4))
    for f in (cosine_sum(4), custom_nonlinearity(["sin(x1)", "x1*0", "cos(x3) + x2/4", "tanh(x4)"], [1, 0, 1.25, 1])):
        whole = f.evaluate_chain(chain)
        for m in range(1, 5):
            assert np.allclose(whole[:, m - 1], f.evaluate(m, chain))


def test_custom_nonlinearity_and_audit():
    f = custom_nonlinearity(["sin(x1)", "sin(x1) + sin(x2)", "2*x3"], [1.0, math.sqrt(2), 2.0])
    assert f.evaluate(2, np.array([math.pi / 2, 0.0])) == pytest.approx(1.0)
    audit_nonlinearity(f)
    lying = custom_nonlinearity(["sin(x1)", "x2", "3*x3"], [1.0, 1.0, 2.0])
    with pytest.raises(ScenarioValidationError) as info:
        audit_nonlinearity(lying)
    assert any("f_3" in p for p in info.value.problems)


def test_custom_rejects_foreign_symbols():
    with pytest.raises(ValueError):
        custom_nonlinearity(["x2"], [1.0])


def test_order_check():
    assert check_order(3) == 3
    for bad in (2, 3.5, 0):
        with pytest.raises(ValueError):
            check_order(bad)


def test_nonlinearity_flags():
    assert no_nonlinearity(3).is_zero
    assert not cosine_sum(3).is_zero
    assert Nonlinearity("none", (0, 0, 0, 0)).order == 4


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=6), st.floats(-10, 10))
def test_drift_shift_structure(x, u):
    x = np.array(x)
    out = linear_drift(x, u)
    assert np.array_equal(out[:-1], x[1:])
    assert out[-1] == u
