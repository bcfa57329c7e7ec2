import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fopid_avr.avr import AvrPlantParams, build_plant
from fopid_avr.errors import DegenerateLoop, ImproperTransferFunction, NumericalDivergence
from fopid_avr.lti import (
    Polynomial,
    SimTrace,
    StateSpace,
    TransferFunction,
    poly_mul,
    proper_part,
    simulate,
    steady_state,
    step_metrics,
    tf_feedback,
    tf_series,
    tf_to_statespace,
    time_grid,
)

coeff = st.floats(-10, 10, allow_nan=False)
poly = st.lists(coeff, min_size=1, max_size=5).map(Polynomial)


def _trace(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return SimTrace(float(t[1] - t[0]), t, np.ones_like(t), y, np.zeros_like(t), 1 - y)


def _closed_loop_c1():
    forward, sensor = build_plant(AvrPlantParams())
    return tf_feedback(forward, sensor)


# --- polynomials -----------------------------------------------------------


def test_poly_mul_examples():
    assert poly_mul(Polynomial([1, 1]), Polynomial([1, 2])) == Polynomial([1, 3, 2])
    p = Polynomial([3, -1, 2])
    assert poly_mul(p, Polynomial([1])) == p
    assert poly_mul(Polynomial([1, 0]), Polynomial([1, 0])) == Polynomial([1, 0, 0])


def test_polynomial_trims_leading_zeros():
    p = Polynomial([0, 0, 2, 1])
    assert p.degree == 1
    assert Polynomial([0, 0]).is_zero()


@given(poly, poly, poly)
@settings(max_examples=50, deadline=None)
def test_poly_mul_commutative_associative(a, b, c):
    np.testing.assert_allclose((a * b).coeffs, (b * a).coeffs, atol=1e-12)
    left = ((a * b) * c).coeffs
    right = (a * (b * c)).coeffs
    if left.size == right.size:
        np.testing.assert_allclose(left, right, atol=1e-9 * max(1.0, np.abs(left).max()))
    else:
        assert (a * b * c).is_zero()


# --- block algebra ---------------------------------------------------------


def test_series_examples():
    g = tf_series(TransferFunction([1], [1, 1]), TransferFunction([2], [1, 2]))
    np.testing.assert_allclose(g.num.coeffs, [2])
    np.testing.assert_allclose(g.den.coeffs, [1, 3, 2])

    g1 = TransferFunction([1, 4], [1, 2, 5])
    assert tf_series(g1, TransferFunction.gain(1.0)).num == g1.num

    amp_exc = tf_series(TransferFunction.first_order_lag(10, 0.1), TransferFunction.first_order_lag(1, 0.4))
    np.testing.assert_allclose(amp_exc.num.coeffs, [10])
    np.testing.assert_allclose(amp_exc.den.coeffs, [0.04, 0.5, 1])


def test_feedback_dc_gain():
    cl = tf_feedback(TransferFunction.gain(10.0), TransferFunction.gain(1.0))
    assert cl.dcgain() == pytest.approx(10 / 11)
    assert _closed_loop_c1().dcgain() == pytest.approx(10 / 11)


def test_feedback_zero_forward():
    cl = tf_feedback(TransferFunction([0.0]), TransferFunction.gain(1.0))
    assert cl.is_zero()


def test_feedback_degenerate():
    with pytest.raises(DegenerateLoop):
        tf_feedback(TransferFunction.gain(1.0), TransferFunction.gain(-1.0))


def test_proper_part_splits_polynomial():
    g = TransferFunction([1, 3, 2], [1, 1])  # s + 2
    q, rem = proper_part(g)
    np.testing.assert_allclose(q.coeffs, [1, 2])
    assert rem.is_zero()


# --- realization -----------------------------------------------------------


def test_realize_first_order():
    ss = tf_to_statespace(TransferFunction([1], [1, 1]))
    np.testing.assert_array_equal(ss.A, [[-1.0]])
    np.testing.assert_array_equal(ss.B, [1.0])
    np.testing.assert_array_equal(ss.C, [[1.0]])
    np.testing.assert_array_equal(ss.D, [0.0])


def test_realize_constant_gain():
    ss = tf_to_statespace(TransferFunction.gain(3.5))
    assert ss.order == 0
    assert ss.D[0] == 3.5


def test_realize_second_order_matches_rational():
    g = TransferFunction([2], [1, 3, 2])
    ss = tf_to_statespace(g)
    assert ss.order == 2
    assert ss.freqresp([1.0])[0, 0] == pytest.approx(g(1j), rel=1e-12)


def test_realize_rejects_improper():
    with pytest.raises(ImproperTransferFunction):
        tf_to_statespace(TransferFunction([1, 0, 0], [1, 1]))


@given(
    st.lists(st.floats(0.1, 50), min_size=1, max_size=5),
    st.lists(st.floats(-5, 5), min_size=1, max_size=6),
)
@settings(max_examples=40, deadline=None)
def test_realization_frequency_response(poles, num):
    den = Polynomial([1.0])
    for p in poles:
        den = den * Polynomial([1.0, p])
    num = num[: den.degree + 1]
    g = TransferFunction(num, den)
    w = np.logspace(-2, 2, 20)
    direct = g.freqresp(w)
    realized = tf_to_statespace(g).freqresp(w)[0]
    scale = np.maximum(np.abs(direct), 1e-12)
    assert np.max(np.abs(realized - direct) / scale) < 1e-8 or np.allclose(realized, direct, atol=1e-12)


# --- simulation ------------------------------------------------------------


def test_first_order_step_analytic():
    ss = tf_to_statespace(TransferFunction([1], [1, 1]))
    t = time_grid(2.0, 1e-3)
    y = simulate(ss, np.ones_like(t), 1e-3)
    assert y[1000] == pytest.approx(1 - np.exp(-1.0), abs=1e-6)


def test_zero_input_zero_output():
    ss = tf_to_statespace(_closed_loop_c1())
    y = simulate(ss, np.zeros(500), 1e-3)
    assert not np.any(y)


def test_closed_loop_step_final_value():
    ss = tf_to_statespace(_closed_loop_c1())
    t = time_grid(30.0, 1e-3)
    y = simulate(ss, np.ones_like(t), 1e-3)
    assert y[-1] == pytest.approx(10 / 11, abs=1e-6)


def test_rk4_fourth_order_convergence():
    ss = tf_to_statespace(TransferFunction([1], [1, 1]))
    errs = []
    for dt in (0.2, 0.1, 0.05):
        t = time_grid(5.0, dt)
        y = simulate(ss, np.ones_like(t), dt)
        errs.append(np.max(np.abs(y - (1 - np.exp(-t)))))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 14) & (ratios < 18))


def test_simulate_deterministic():
    ss = tf_to_statespace(_closed_loop_c1())
    u = np.sin(np.linspace(0, 10, 3000))
    np.testing.assert_array_equal(simulate(ss, u, 1e-3), simulate(ss, u, 1e-3))


def test_simulate_divergence_raises():
    ss = tf_to_statespace(TransferFunction([1], [1, -5]))
    with pytest.raises(NumericalDivergence):
        simulate(ss, np.ones(20001), 1e-3)


def test_simulate_rejects_coarse_step():
    ss = tf_to_statespace(TransferFunction([1], [1, 1000]))
    with pytest.raises(ValueError):
        simulate(ss, np.ones(10), 0.01)


def test_steady_state_examples():
    ss = tf_to_statespace(TransferFunction([1], [1, 1]))
    np.testing.assert_allclose(steady_state(ss, 1.0), [1.0])
    np.testing.assert_allclose(steady_state(ss, 0.0), [0.0])
    cl = _closed_loop_c1()
    ss = tf_to_statespace(cl)
    x = steady_state(ss, 1.0)
    assert (ss.C @ x + ss.D)[0] == pytest.approx(cl.dcgain(), rel=1e-9)


# --- step metrics ----------------------------------------------------------


def test_metrics_first_order_no_overshoot():
    t = time_grid(10.0, 1e-3)
    m = step_metrics(_trace(t, 1 - np.exp(-t)))
    # y_final is the tail mean, a hair below the last sample
    assert m.overshoot == pytest.approx(0.0, abs=1e-4)
    assert m.settled


def test_metrics_constant_response():
    t = time_grid(1.0, 1e-3)
    m = step_metrics(_trace(t, np.ones_like(t)))
    assert m.overshoot == 0.0
    assert m.settling_time_2pct == 0.0


def test_metrics_second_order_overshoot():
    zeta, wn = 0.5, 1.0
    ss = tf_to_statespace(TransferFunction([wn**2], [1, 2 * zeta * wn, wn**2]))
    t = time_grid(40.0, 1e-3)
    y = simulate(ss, np.ones_like(t), 1e-3)
    m = step_metrics(_trace(t, y))
    expected = np.exp(-np.pi * zeta / np.sqrt(1 - zeta**2))
    assert m.overshoot == pytest.approx(expected, abs=2e-3)
    assert m.peak_time == pytest.approx(np.pi / np.sqrt(1 - zeta**2), abs=2e-3)


def test_metrics_flags_unsettled():
    t = time_grid(10.0, 1e-3)
    m = step_metrics(_trace(t, 1 + 0.5 * np.sin(5 * t)))
    assert not m.settled
