import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoblock.core import BlockingError
from geoblock.entropy import (GrowthSeries, InequalityViolation, blocker_split_check,
                              counting_inequality_check, fiber_bound, graph_series,
                              light_projection, mane_estimate, torus_series)
from geoblock.graphs import QuotientGraph
from geoblock.torus import TorusSpace

F = Fraction
UNIT = TorusSpace.unit(2)
O = UNIT.point((0, 0))
HALF = UNIT.point((F(1, 2), 0))


def test_series_validation_and_csv():
    s = GrowthSeries(None, None, (1, 2, 3), (2, 5, 9), (2, 3, 3), 0.5)
    assert GrowthSeries.from_csv(s.to_csv(), inj=0.5) == s
    assert s.to_csv().splitlines()[0] == "T,n,m"
    with pytest.raises(ValueError):
        GrowthSeries(None, None, (1, 1), (1, 2), (1, 1))
    with pytest.raises(ValueError):
        GrowthSeries(None, None, (1, 2), (3, 2), (1, 1))
    with pytest.raises(ValueError):
        GrowthSeries(None, None, (1, 2), (1, 2), (2, 2))


def test_mane_trivial_and_exponential():
    const = GrowthSeries(None, None, tuple(range(1, 9)), (1,) * 8, (1,) * 8)
    assert mane_estimate(const).estimate == pytest.approx(0.0, abs=1e-12)
    T = tuple(range(1, 11))
    expo = GrowthSeries(None, None, T, tuple(round(5 * math.exp(0.7 * t)) for t in T), (1,) * 10)
    assert mane_estimate(expo).estimate == pytest.approx(0.7, rel=1e-3)
    with pytest.raises(ValueError):
        mane_estimate(GrowthSeries(None, None, (1, 2, 3), (0, 0, 0), (0, 0, 0)))
    with pytest.raises(ValueError):
        mane_estimate(GrowthSeries(None, None, (1, 2, 3), (1, 2, 3), (1, 1, 1)))


def test_torus_estimate_small_and_decreasing():
    est = mane_estimate(torus_series(UNIT, O, O, 60, 1))
    assert est.estimate < 0.1
    assert est.tail_decreasing


def test_wedge_estimate_near_log3():
    v = QuotientGraph.wedge().point(0)
    est = mane_estimate(graph_series(QuotientGraph.wedge(), v, v, range(1, 13)))
    assert est.estimate == pytest.approx(math.log(3), rel=0.05)


def test_light_projection_examples():
    segs = {r.rid: r for r in UNIT.enumerate_geodesics(O, HALF, 2)}
    proj = light_projection([segs["t[3/2,0]"]])
    assert [r.rid for r in proj.rays] == ["t[1/2,0]"]
    light = UNIT.enumerate_light(O, HALF, 2)
    fixed = light_projection(light)
    assert [r.rid for r in fixed.rays] == [r.rid for r in light]
    assert set(fixed.fibers.values()) == {1}


@pytest.mark.parametrize("y", [(0, 0), (F(1, 2), 0), (F(1, 3), F(2, 5))])
def test_projection_surjective_and_bounded(y):
    y = UNIT.point(y)
    T = 12
    G = UNIT.enumerate_geodesics(O, y, T)
    L = {r.rid for r in UNIT.enumerate_light(O, y, T)}
    proj = light_projection(G)
    assert set(proj.fibers) == L
    assert sum(proj.fibers.values()) == len(G)
    for t in (3, 6, 12):
        assert max(proj.fiber_sizes_at(t).values()) <= fiber_bound(t, UNIT.injectivity_radius)
    # idempotent: projecting the images again changes nothing
    again = light_projection(list(proj.rays))
    assert [r.rid for r in again.rays] == [r.rid for r in proj.rays]


def test_projection_rejects_mixed_endpoints():
    a = UNIT.enumerate_geodesics(O, HALF, 1)
    b = UNIT.enumerate_geodesics(O, O, 1)
    with pytest.raises(BlockingError):
        light_projection(a + b)


def test_fiber_bound():
    assert fiber_bound(0.5, 0.5) == 1.0
    assert fiber_bound(3.0, 0.5) == 9.0


@pytest.mark.parametrize("y", [(0, 0), (F(1, 2), 0)])
def test_counting_inequality_torus(y):
    rep = counting_inequality_check(torus_series(UNIT, O, UNIT.point(y), 100, 1))
    assert rep.holds and rep.tightest <= 1


def test_counting_inequality_fails_on_wedge():
    g = QuotientGraph.wedge()
    v = g.point(0)
    s = graph_series(g, v, v, range(1, 9), inj=0.5)
    assert s.n[:4] == (4, 16, 52, 160) and set(s.m) == {4}
    rep = counting_inequality_check(s, strict=False)
    # n_T counts every length up to T, so T^2 * 4 falls behind from T = 3 on
    assert rep.failures == tuple(float(T) for T in range(3, 9))
    with pytest.raises(InequalityViolation):
        counting_inequality_check(s)


def test_counting_inequality_needs_radius():
    with pytest.raises(ValueError):
        counting_inequality_check(GrowthSeries(None, None, (1,), (1,), (1,)))


def test_blocker_split_small():
    y = UNIT.point((F(1, 2), F(1, 2)))
    rep = blocker_split_check(UNIT, O, y, UNIT.midpoint_blocking_set(O, y), 6)
    assert rep.holds and rep.m_T == len(UNIT.enumerate_light(O, y, 6))
    assert len(rep.matching) == rep.m_T
    assert len(set(rep.matching.values())) == rep.m_T


def test_blocker_split_single_ray_and_empty():
    y = UNIT.point((F(1, 2), 0))
    rays = UNIT.enumerate_light(O, y, 1)[:1]
    rep = blocker_split_check(UNIT, O, y, UNIT.midpoint_blocking_set(O, y), 1, rays=rays)
    assert rep.m_T == 1 <= rep.rhs
    empty = blocker_split_check(UNIT, O, y, [], F(1, 4))
    assert empty.m_T == 0 and empty.holds


def test_blocker_split_rejects_non_blocking():
    y = UNIT.point((F(1, 2), F(1, 2)))
    with pytest.raises(BlockingError):
        blocker_split_check(UNIT, O, y, UNIT.midpoint_blocking_set(O, y)[:2], 4)


@settings(max_examples=10, deadline=None)
@given(st.fractions(0, 1, max_denominator=6), st.fractions(0, 1, max_denominator=6))
def test_blocker_split_random_pairs(a, b):
    y = UNIT.point((a, b))
    if UNIT.same_point(O, y):
        return
    rep = blocker_split_check(UNIT, O, y, UNIT.midpoint_blocking_set(O, y), 5)
    assert rep.holds
