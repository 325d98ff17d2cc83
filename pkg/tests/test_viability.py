import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentum_control.viability import (
    GRID_HEADER,
    classify,
    grid_axis,
    in_maximal_set,
    region_grid,
    viability_values,
)

pos = st.floats(0.01, 3.0)
nonneg = st.floats(0.0, 3.0)


@pytest.mark.parametrize(
    "point,expected",
    [((1, 1, 1), (0, 1, 1)), ((0.4, 1, 1), (-0.6, -1.4, -0.2))],
)
def test_values(point, expected):
    v = viability_values(*point)
    assert (v.R, v.D, v.L) == pytest.approx(expected)


def test_r_reduces_to_maximal_set_without_momentum():
    assert viability_values(2.0, 1.0, 0.0).R == 0


def test_kyle_point_labels():
    c = classify(1.0, 1.0, 1.0)
    assert c.in_M1 and not c.in_M2 and not c.in_M3 and c.in_M and c.on_kyle_line
    assert c.on_R_boundary


def test_no_inclusion_witness():
    c = classify(0.5, 2.0, 1.0)
    assert c.values.R == pytest.approx(0.5) and c.values.D == pytest.approx(-2.0)
    assert c.in_M2 and not c.in_M1


def test_m3_witness():
    c = classify(0.4, 1.0, 1.0)
    assert c.in_M3 and c.in_M1


@pytest.mark.parametrize("lam,mu,expected", [(1, 1, True), (2, 1, True), (2.01, 1, False)])
def test_maximal_set(lam, mu, expected):
    assert in_maximal_set(lam, mu) is expected


def test_invalid_point():
    with pytest.raises(ValueError):
        viability_values(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        viability_values(1.0, 1.0, -0.1)


@given(pos, pos, nonneg)
def test_polynomial_relations(lam, mu, beta):
    v = viability_values(lam, mu, beta)
    assert v.L - v.R == pytest.approx(lam)
    c = classify(lam, mu, beta)
    if c.in_M3:
        assert c.in_M1


@given(pos, pos, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_monotone_in_beta(lam, mu, b1, b2):
    lo, hi = sorted((b1, b2))
    # raising beta can only remove points from each region
    a, b = classify(lam, mu, lo), classify(lam, mu, hi)
    assert a.in_M1 >= b.in_M1 and a.in_M2 >= b.in_M2 and a.in_M3 >= b.in_M3


def test_beta_zero_grid():
    g = region_grid(0.0, (0.0, 3.0), (0.0, 3.0), 60)
    assert np.array_equal(g.mask("in_M1"), g.mask("in_M"))
    lam = np.array([[c.lam < c.mu for c in g.cells]]).reshape(g.mask("in_M").shape)
    assert np.array_equal(g.mask("in_M2"), lam)
    assert np.array_equal(g.mask("in_M3"), lam)


def test_beta_one_grid_witnesses():
    g = region_grid(1.0, (0.0, 3.0), (0.0, 3.0), 300)
    for point in ((1.0, 1.0), (0.5, 2.0), (0.4, 1.0)):
        cell = g.nearest(*point)
        assert abs(cell.lam - point[0]) < 1e-12 and abs(cell.mu - point[1]) < 1e-12
        ref = classify(*point, 1.0)
        assert (cell.in_M1, cell.in_M2, cell.in_M3) == (ref.in_M1, ref.in_M2, ref.in_M3)


def test_grid_axis_conventions():
    assert grid_axis(0.0, 3.0, 3).tolist() == [1.0, 2.0, 3.0]
    assert grid_axis(1.0, 1.0, 50).tolist() == [1.0]
    assert grid_axis(1.0, 2.0, 3).tolist() == [1.0, 1.5, 2.0]
    for bad in ((-1.0, 2.0, 3), (2.0, 1.0, 3), (1.0, 2.0, 0), (1.0, 2.0, 1)):
        with pytest.raises(ValueError):
            grid_axis(*bad)


def test_grid_csv():
    g = region_grid(1.0, (1.0, 1.0), (1.0, 1.0), 10)
    rows = list(csv.reader(io.StringIO(g.to_csv())))
    assert tuple(rows[0]) == GRID_HEADER
    assert rows[1:] == [["1", "1", "0", "1", "1", "1", "1", "0", "0", "1"]]
