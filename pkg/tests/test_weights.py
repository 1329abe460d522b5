import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_bump.mesh import DyadicMesh, GridFunction, write_grid_function
from dyadic_bump.weights import WeightError, cascade, generate_weight, power_weight, spike


@pytest.mark.parametrize("d, L", [(1, 10), (2, 5)])
def test_cascade_is_exact_martingale(d, L):
    deep = cascade(DyadicMesh(d, L), 0.6, 3)
    for Lp in range(1, L):
        shallow = cascade(DyadicMesh(d, Lp), 0.6, 3)
        np.testing.assert_allclose(deep.mesh.level_means(deep.values, Lp), shallow.values,
                                   rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0, 0.99), seed=st.integers(0, 2 ** 31), d=st.sampled_from([1, 2]))
def test_cascade_positive_with_unit_mean(eta, seed, d):
    w = cascade(DyadicMesh(d, 4), eta, seed)
    assert np.all(w.values > 0)
    assert w.values.mean() == pytest.approx(1.0, rel=1e-12)
    lo, hi = (1 - eta) ** 4, (1 + eta) ** 4
    assert np.all((w.values >= lo * (1 - 1e-12)) & (w.values <= hi * (1 + 1e-12)))


def test_power_weight():
    m = DyadicMesh(1, 6)
    w = power_weight(m, -0.5)
    assert w.values.max() == pytest.approx((0.5 / 64) ** -0.5)
    assert w.values[0] == pytest.approx((0.5 - 0.5 / 64) ** -0.5)
    with pytest.raises(WeightError):
        power_weight(m, -1.0)


def test_spike_mass():
    m = DyadicMesh(1, 5)
    w = spike(m, 3, 7.0)
    assert w.values[3] * m.cell_volume == pytest.approx(7.0)
    assert np.count_nonzero(w.values != 1) == 1


def test_generate(tmp_path):
    m = DyadicMesh(1, 4)
    assert np.all(generate_weight("const:2.5", m).values == 2.5)
    np.testing.assert_array_equal(generate_weight("cascade:0.3,7", m).values,
                                  cascade(m, 0.3, 7).values)
    path = tmp_path / "w.json"
    write_grid_function(GridFunction(m, np.arange(1.0, 17.0)), path)
    np.testing.assert_array_equal(generate_weight(f"file:{path}", m).values, np.arange(1.0, 17.0))
    for bad in ("nope:1", "cascade:0.3", "power:a", "const:-1", "spike:99,1", "cascade:1.5,0"):
        with pytest.raises(WeightError):
            generate_weight(bad, m)
    with pytest.raises(WeightError):
        generate_weight(f"file:{path}", DyadicMesh(1, 5))
