from fractions import Fraction

import pytest

from geoblock.oracles import census_counts, torus_census
from geoblock.torus import TorusSpace

F = Fraction


def test_census_half_period():
    ref = torus_census(((1, 0), (0, 1)), (0, 0), (F(1, 2), 0), F(8, 5))
    assert census_counts(ref, F(8, 5)) == (8, 6)
    light = sorted(v for v, _, lit in ref if lit)
    assert (F(3, 2), 0) not in light and (F(1, 2), 0) in light


def test_census_one_dimension():
    ref = torus_census(((F(3, 2),),), (0,), (F(1, 2),), 5)
    # translates 1/2 + 3k/2 with |v| <= 5; only the two nearest are light
    assert census_counts(ref, 5) == (7, 2)


@pytest.mark.parametrize("basis,x,y", [
    (((1, 0), (0, 1)), (0, 0), (0, 0)),
    (((1, 0), (0, 1)), (F(1, 3), F(1, 5)), (F(2, 3), F(1, 2))),
    (((F(5, 4), 0), (F(-1, 4), F(7, 8))), (F(1, 8), 0), (F(1, 2), F(3, 8))),
])
def test_census_matches_fast_counts(basis, x, y):
    S = TorusSpace(basis)
    ref = torus_census(S.basis, x, y, 6)
    for T in (1, F(5, 2), 6):
        assert S.counts(S.point(x), S.point(y), T) == census_counts(ref, T)
