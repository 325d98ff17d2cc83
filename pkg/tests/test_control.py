import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentum_control import control as ctl
from momentum_control.dynamics import MarketParams, PricingRule, simulate

pos = st.floats(0.05, 3.0)
nonneg = st.floats(0.0, 3.0)
unit = st.floats(-0.95, 0.95)
THIRDS = (1 / 3, 1 / 3, 1 / 3)


def mats(lam, mu, beta):
    return ctl.system_matrices(PricingRule(lam, mu), beta)


def test_matrices_kyle_point():
    m = mats(1, 1, 1)
    np.testing.assert_array_equal(m.A, [[1, 1, 0], [0, 1, 0], [0, 1, 0]])
    np.testing.assert_array_equal(m.B, [[1], [1], [0]])


def test_matrices_kyle_line_zero_entries():
    m = mats(1.7, 1.7, 2.3)
    assert m.A[0, 2] == 0 and m.A[1, 2] == 0


def test_matrices_no_momentum():
    m = mats(1.5, 0.5, 0)
    np.testing.assert_array_equal(m.A, [[1, 1.0, 0], [0, 0, 0], [0, 1, 0]])


def test_w_examples():
    W = ctl.controllability_matrix(mats(1, 1, 1))
    np.testing.assert_array_equal(W, [[1, 2, 3], [1, 1, 1], [0, 1, 1]])
    assert ctl.controllability_det(mats(1, 1, 1)) == pytest.approx(1)
    W0 = ctl.controllability_matrix(mats(1, 1, 0))
    np.testing.assert_array_equal(W0, [[1, 1, 1], [1, 0, 0], [0, 1, 0]])
    assert ctl.controllability_det(mats(1, 1, 0)) == pytest.approx(1)


@given(pos, pos, nonneg)
def test_w_second_column(lam, mu, beta):
    W = ctl.controllability_matrix(mats(lam, mu, beta))
    assert W[0, 1] == pytest.approx(mu * beta * mu + lam)
    assert ctl.controllability_det(mats(lam, mu, beta)) == pytest.approx(lam, rel=1e-9)


def test_det_accurate_for_small_lambda():
    for lam in (1e-4, 1e-6, 1e-9):
        assert ctl.controllability_det(mats(lam, 2.0, 3.0)) == pytest.approx(lam, rel=1e-9)


def test_controllability_examples():
    assert ctl.is_controllable(mats(1e-3, 5, 10))
    assert ctl.is_controllable(mats(2, 0.1, 0))
    assert not ctl.is_controllable(ctl.SystemMatrices.from_params(0.0, 1.0, 1.0))


def test_pole_place_thirds():
    g = ctl.pole_place(PricingRule(1, 1), 1, THIRDS)
    assert g.sigma == pytest.approx((8 / 27, 19 / 27, 1 / 27), rel=1e-14)
    assert g.delta == pytest.approx((-1, 1 / 3, -1 / 27))


def test_deadbeat():
    g = ctl.pole_place(PricingRule(1, 1), 1, (0, 0, 0))
    assert g.sigma == (1.0, 1.0, 0.0)
    m = mats(1, 1, 1)
    assert ctl.char_poly_coeffs(m, g) == (0, 0, 0)
    np.testing.assert_array_equal(np.linalg.matrix_power(ctl.closed_loop_matrix(m, g), 3), 0)


def test_open_loop_polynomial():
    lam, mu, beta = 1.3, 0.6, 2.1
    zero = ctl.FeedbackGain((0.0, 0.0, 0.0), (0j,) * 3, (0.0,) * 3)
    c = ctl.char_poly_coeffs(mats(lam, mu, beta), zero)
    assert c == pytest.approx((-beta * mu - 1, beta * mu - beta * (lam - mu), beta * (lam - mu)))
    # and it is the characteristic polynomial of A
    assert np.poly(mats(lam, mu, beta).A)[1:] == pytest.approx(c)


@st.composite
def poles(draw):
    if draw(st.booleans()):
        return tuple(complex(draw(unit)) for _ in range(3))
    r, t = draw(st.floats(0.0, 0.95)), draw(st.floats(0.0, math.pi))
    z = complex(r * math.cos(t), r * math.sin(t))
    return (complex(draw(unit)), z, z.conjugate())


@given(pos, pos, nonneg, poles())
def test_pole_placement_soundness(lam, mu, beta, phi):
    rule = PricingRule(lam, mu)
    g = ctl.pole_place(rule, beta, phi)
    c = ctl.char_poly_coeffs(ctl.system_matrices(rule, beta), g)
    assert max(abs(a - b) for a, b in zip(c, g.delta)) <= 1e-10
    Acl = ctl.closed_loop_matrix(ctl.system_matrices(rule, beta), g)
    assert np.poly(Acl)[1:] == pytest.approx(g.delta, abs=1e-8 * max(1, 1 / lam))


def test_complex_pair_input():
    g = ctl.pole_place(PricingRule(1, 1), 1, [(0.2, 0.3), (0.2, -0.3), (0.1, 0)])
    assert g.spectral_radius == pytest.approx(math.hypot(0.2, 0.3))


def test_pole_place_rejections():
    with pytest.raises(ValueError):
        ctl.pole_place(PricingRule(1, 1), 1, (0.2 + 0.3j, 0.2 + 0.3j, 0.1))
    with pytest.raises(ValueError):
        ctl.pole_place(PricingRule(1, 1), 1, (0.2, 0.3))
    # lambda = 0 cannot come from a PricingRule; pass a bare stand-in
    degenerate = ctl.SystemMatrices.from_params(0.0, 1.0, 1.0)
    with pytest.raises(ctl.UncontrollableError):
        ctl.pole_place(degenerate, 1, THIRDS)
    with pytest.raises(ValueError):
        ctl.quick_response_control(ctl.pole_place(PricingRule(1, 1), 1, (1.5, 0, 0)))


def test_gain_from_sigma_recovers_poles():
    rule = PricingRule(0.8, 1.2)
    g = ctl.pole_place(rule, 0.5, (0.5, 0.1, -0.2))
    back = ctl.gain_from_sigma(rule, 0.5, g.sigma)
    assert sorted(z.real for z in back.phi) == pytest.approx([-0.2, 0.1, 0.5], abs=1e-9)


@given(pos, pos, nonneg, st.floats(-2, 2).filter(lambda x: abs(x) > 0.01))
def test_closed_loop_linearity(lam, mu, beta, y1):
    rule = PricingRule(lam, mu)
    g = ctl.pole_place(rule, beta, (0.5, 0.2, -0.3))
    t = simulate(MarketParams(beta=beta, p0=5.0, horizon=12), rule, [y1], ctl.quick_response_control(g))
    z = t.states(shift_to_p0=True)
    Acl = ctl.closed_loop_matrix(ctl.system_matrices(rule, beta), g)
    for n in range(len(z) - 1):
        pred = Acl @ z[n]
        assert np.abs(z[n + 1] - pred).max() <= 1e-10 * max(1.0, np.abs(pred).max(), np.abs(z[n]).max())


@given(pos, pos, nonneg, st.floats(0.0, 50.0))
def test_quick_response_dormant(lam, mu, beta, p0):
    rule = PricingRule(lam, mu)
    policy = ctl.quick_response_control(ctl.pole_place(rule, beta, THIRDS))
    t = simulate(MarketParams(beta=beta, p0=p0, horizon=25), rule, [], policy)
    assert all(r.u == 0 and r.p == p0 for r in t.records)


def test_stabilize_zero_disturbance():
    rule = PricingRule(1, 1)
    r = ctl.stabilize_simulation(rule, 1, ctl.pole_place(rule, 1, THIRDS), disturbance=(0.0,), N=20)
    assert not r.states.any() and r.rate_estimate == 0


def test_stabilize_deadbeat():
    rule = PricingRule(1, 1)
    r = ctl.stabilize_simulation(rule, 1, ctl.pole_place(rule, 1, (0, 0, 0)), N=20)
    assert np.abs(r.states[3:]).max() <= 1e-12


def test_stabilize_rate():
    rule = PricingRule(1, 1)
    r = ctl.stabilize_simulation(rule, 1, ctl.pole_place(rule, 1, THIRDS), N=60)
    assert r.within_bound
    assert r.fitted_rate == pytest.approx(1 / 3, abs=0.05)


def test_stabilize_converges_long_run():
    rule = PricingRule(0.6, 1.4)
    r = ctl.stabilize_simulation(rule, 2.0, ctl.pole_place(rule, 2.0, (0.5, 0.3 + 0.2j, 0.3 - 0.2j)), N=200)
    assert np.linalg.norm(r.states[-1]) < 1e-12
    assert r.within_bound


def test_stabilize_requires_long_horizon():
    rule = PricingRule(1, 1)
    with pytest.raises(ValueError):
        ctl.stabilize_simulation(rule, 1, ctl.pole_place(rule, 1, THIRDS), N=5)


def test_report_json():
    rule = PricingRule(1, 1)
    doc = json.loads(ctl.control_report_json(rule, 1, ctl.pole_place(rule, 1, THIRDS)))
    for key in ("A", "B", "W", "detW", "sigma", "phi", "delta"):
        assert key in doc
    assert doc["sigma"] == pytest.approx([8 / 27, 19 / 27, 1 / 27], rel=1e-15)
    assert doc["detW"] == pytest.approx(1)
