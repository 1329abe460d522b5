import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_bump.young import (BumpComplement, LinftyIndicator, YoungError, b0, bp_check, custom,
                               conjugate_exponent, doubling_constant, is_convex, logbump,
                               loglogbump, parse_young, power)

FAMILIES = [power(2.0), power(1.5), logbump(2, 1), logbump(3, 0.5), loglogbump(2, 3), b0(2, 1)]
GRID = np.logspace(-6, 6, 200)


def test_conjugate_exponent():
    assert conjugate_exponent(2) == 2
    assert conjugate_exponent(3) == pytest.approx(1.5)
    with pytest.raises(YoungError):
        conjugate_exponent(1)


def test_power_complement_closed_form():
    Abar = power(2).complement()
    s = np.array([0.0, 0.5, 2.0, 10.0])
    np.testing.assert_allclose(Abar(s), s ** 2 / 4)
    Abar3 = power(3).complement()
    # sup_t (st - t^3) = (2/3) (s/3)^(1/2) s
    np.testing.assert_allclose(Abar3(s), 2 / 3 * s * np.sqrt(s / 3), rtol=1e-12)


def test_linfty_complement():
    assert isinstance(power(1).complement(), LinftyIndicator)


def test_complement_is_involutive():
    A = logbump(2, 1)
    assert isinstance(A.complement(), BumpComplement)
    assert A.complement() is A.complement()
    t = np.logspace(-3, 3, 30)
    np.testing.assert_allclose(A.complement().complement()(t), A(t), rtol=1e-8)


@pytest.mark.parametrize("A", FAMILIES, ids=repr)
def test_duality_sandwich(A):
    prod = A.inverse(GRID) * A.complement().inverse(GRID)
    assert np.all(prod >= GRID * (1 - 1e-9))
    assert np.all(prod <= 2 * GRID * (1 + 1e-9))


@pytest.mark.parametrize("A", FAMILIES, ids=repr)
def test_inverse_roundtrip(A):
    np.testing.assert_allclose(A(A.inverse(GRID)), GRID, rtol=1e-10)
    assert A.unit_inverse() == pytest.approx(float(A.inverse(1.0)))


@pytest.mark.parametrize("A", FAMILIES, ids=repr)
def test_convex_and_doubling(A):
    assert is_convex(A)
    assert is_convex(A.complement())
    assert doubling_constant(A) < 2 ** (A.p + 1)


@settings(max_examples=80, deadline=None)
@given(s=st.floats(1e-4, 1e4), t=st.floats(1e-4, 1e4),
       A=st.sampled_from(FAMILIES))
def test_young_inequality(s, t, A):
    assert s * t <= (A(t) + A.complement()(s)) * (1 + 1e-10)


@settings(max_examples=40, deadline=None)
@given(t=st.floats(1e-3, 1e3), A=st.sampled_from(FAMILIES[2:]))
def test_young_equality_at_derivative(t, A):
    s = float(A.derivative(t))
    assert s * t == pytest.approx(A(t) + A.complement()(s), rel=1e-8)


def test_parse_young():
    assert parse_young("logbump:p=2,delta=1") == logbump(2, 1)
    assert repr(parse_young("power:p=3")) == "power:p=3"
    for bad in ("nope:p=2", "logbump:p=2", "logbump:p=x,delta=1", "power:p"):
        with pytest.raises(YoungError):
            parse_young(bad)
    with pytest.raises(YoungError):
        logbump(2, -1)


@pytest.mark.parametrize("A, q, expected", [
    (logbump(2, 0).complement(), 2, "divergent"),
    (logbump(2, 0.5).complement(), 2, "convergent"),
    (loglogbump(2, 1).complement(), 2, "convergent"),
    (loglogbump(2, 0).complement(), 2, "divergent"),
    (power(2).complement(), 2, "divergent"),
    (power(1).complement(), 2, "divergent"),
])
def test_bp_classification(A, q, expected):
    v = bp_check(A, q)
    assert v.classification == expected and v.analytic


def test_tabulated_custom():
    A = custom([0, 1, 2, 4], [0, 1, 4, 16])
    assert A(1.0) == pytest.approx(1.0)
    assert A.inverse(4.0) == pytest.approx(2.0)
    assert math.isfinite(float(A.complement()(1.0)))


@pytest.mark.parametrize("prm", [(1.01, 4.0, 0.0, 1.0), (1.0, 3.0, 2.0, 0.5), (1.0, 1.0, 0.0, 1.0),
                                 (1.001, 0.0, 0.0, 1.0), (3.0, 2.5, 0.0, 1.0)])
def test_complement_backends_agree_at_extremes(prm):
    _core = pytest.importorskip("dyadic_bump._core")
    from dyadic_bump import _fallback
    s = np.logspace(-12, 14, 801)
    with np.errstate(all="raise"):
        a = np.asarray(_core.bump_dual_eval(s, *prm))
    b = _fallback.bump_dual_eval(s, *prm)
    assert not np.isnan(a).any() and not np.isnan(b).any()
    np.testing.assert_array_equal(np.isinf(a), np.isinf(b))
    np.testing.assert_array_equal(a == 0, b == 0)
    ok = np.isfinite(a) & (b > 1e-290)
    np.testing.assert_allclose(a[ok], b[ok], rtol=1e-10)


def test_complement_overflow_and_underflow():
    from dyadic_bump import _fallback
    # linear growth: the complement is infinite once s exceeds A'(inf)
    assert np.isinf(_fallback.bump_dual_eval(np.array([800.0]), 1.0, 1.0, 0.0, 1.0)[0])
    # p close to 1: s^{p'} underflows
    assert _fallback.bump_dual_eval(np.array([1e-8]), 1.001, 0.0, 0.0, 1.0)[0] == 0.0
