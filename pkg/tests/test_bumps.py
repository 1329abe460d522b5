import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_bump.bumps import (ap_constant, balance_check, bump_joint, bump_separated_A,
                               bump_separated_B, gamma_lemma, gamma_log, interp_log_check,
                               interp_log_ratios, interp_loglog_check, random_probability_trials,
                               spike_trials)
from dyadic_bump.mesh import DyadicMesh, GridFunction
from dyadic_bump.weights import cascade, power_weight
from dyadic_bump.young import YoungError, conjugate_exponent, logbump, power


def test_constant_weights():
    m = DyadicMesh(1, 6)
    u, s = m.constant(4.0), m.constant(9.0)
    assert ap_constant(u, s, 2) == pytest.approx(6.0)
    assert ap_constant(u, s, 3) == pytest.approx(4 ** (1 / 3) * 9 ** (2 / 3))
    B = logbump(2, 1)
    assert bump_separated_B(u, s, B, 2) == pytest.approx(6.0 / B.unit_inverse())
    assert bump_joint(u, s, B, B, 2) == pytest.approx(6.0 / B.unit_inverse() ** 2)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_power_bumps_equal_ap(p):
    m = DyadicMesh(1, 8)
    u, s = cascade(m, 0.6, 1), cascade(m, 0.6, 2)
    q = conjugate_exponent(p)
    Ap = ap_constant(u, s, p)
    assert bump_separated_B(u, s, power(q), p) == pytest.approx(Ap, rel=1e-9)
    assert bump_separated_A(u, s, power(p), p) == pytest.approx(Ap, rel=1e-9)
    assert bump_joint(u, s, power(p), power(q), p) == pytest.approx(Ap, rel=1e-9)


def test_argmax_cube(pair):
    u, s = pair
    val, Q = ap_constant(u, s, 2, argmax=True)
    mu, ms = u.restrict(Q).mean(), s.restrict(Q).mean()
    assert val == pytest.approx(np.sqrt(mu * ms))


def test_power_weight_ap_grows_near_threshold():
    m = DyadicMesh(1, 10)
    vals = [ap_constant(power_weight(m, a), power_weight(m, -a), 2) for a in (0.2, 0.6, 0.9)]
    assert vals == sorted(vals)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_homogeneity(c, seed):
    m = DyadicMesh(1, 5)
    u, s = cascade(m, 0.5, seed), cascade(m, 0.5, seed + 1)
    B = logbump(2, 1)
    for fn in (lambda uu, ss: ap_constant(uu, ss, 2), lambda uu, ss: bump_separated_B(uu, ss, B, 2)):
        assert fn(u * c, s) == pytest.approx(c ** 0.5 * fn(u, s), rel=1e-9)
        assert fn(u, s * c) == pytest.approx(c ** 0.5 * fn(u, s), rel=1e-9)


def test_validation():
    m = DyadicMesh(1, 3)
    with pytest.raises(ValueError):
        ap_constant(GridFunction(m, -np.ones(8)), m.constant(1), 2)
    with pytest.raises(YoungError):
        ap_constant(m.constant(1), m.constant(1), 1.0)
    with pytest.raises(ValueError):
        ap_constant(m.constant(1), DyadicMesh(1, 4).constant(1), 2)


def test_gamma_formulas():
    assert gamma_log(2, 1) == pytest.approx(0.25)
    assert gamma_log(3, 2) == pytest.approx(2 / (2 * (0.5 + 2)))
    assert gamma_lemma(2, 2) == pytest.approx(1 / 3)
    assert gamma_lemma(1.5, 1) == pytest.approx(1 / 3)
    with pytest.raises(YoungError):
        gamma_log(2, 0)


@pytest.mark.parametrize("p, delta", [(2.0, 1.0), (3.0, 2.0)])
def test_interp_bounded(p, delta):
    mu, f = random_probability_trials(2000, 16, seed=3)
    r, parts = interp_log_ratios(mu, f, p, delta)
    assert np.all(np.isfinite(r)) and r.max() < 2.0
    assert parts["gamma"] == gamma_lemma(conjugate_exponent(p), delta)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-4, 1e4), seed=st.integers(0, 100))
def test_interp_scale_invariance(c, seed):
    mu, f = random_probability_trials(5, 8, seed)
    r1, _ = interp_log_ratios(mu, f, 2.0, 1.0)
    r2, _ = interp_log_ratios(mu, c * f, 2.0, 1.0)
    np.testing.assert_allclose(r1, r2, rtol=1e-9)


def test_interp_spikes_stay_bounded():
    mu, f = spike_trials(np.logspace(0, 10, 30), 1e-3)
    r, _ = interp_log_ratios(mu, f, 2.0, 1.0)
    assert r.max() < 2.0
    assert abs(r[-1] - r[-5]) < 0.05


def test_interp_single_check():
    mu, f = random_probability_trials(1, 8, 0)
    res = interp_log_check(mu, f, 2.0, 1.0, constant=2.0)
    assert res["passed"] and res["gamma"] == pytest.approx(0.25)


@pytest.mark.parametrize("p, delta", [(2.0, 1.0), (3.0, 2.0), (1.5, 0.5)])
def test_balance(p, delta):
    res = balance_check(p, delta)
    assert res["bounded"]
    assert res["gamma"] == gamma_log(p, delta)
    assert 0 < res["min_ratio"] <= res["max_ratio"] < 10


def test_loglog_fit_reports():
    mu, f = random_probability_trials(2000, 16, seed=1, log_spread=8.0)
    res = interp_loglog_check(mu, f, 2.0, 1.0)
    assert res["kappa"] >= 0 and res["C0"] > 0
    assert res["delta_threshold"] == 1.0 and res["estimator"] == "fitted"
