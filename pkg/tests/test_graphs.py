from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoblock.core import verify_blocking
from geoblock.graphs import GraphError, GraphPoint, QuotientGraph

F = Fraction
WEDGE = QuotientGraph.wedge()
THETA = QuotientGraph.theta()


def test_wedge_light():
    v = WEDGE.point(0)
    rays = WEDGE.enumerate_light(v, v, 1)
    assert len(rays) == 4 and all(r.length == 1 for r in rays)
    assert len(WEDGE.enumerate_light(v, v, 2)) == 4
    assert len(WEDGE.enumerate_light(v, v, F(1, 2))) == 0


def test_theta_light():
    rays = THETA.enumerate_light(THETA.point(0), THETA.point(1), 1)
    assert len(rays) == 3
    assert len({r.path.pieces[0][0] // 2 for r in rays}) == 3


def test_wedge_counts_closed_form():
    # 4 directions, then 3 non-backtracking choices at every return to v
    v = WEDGE.point(0)
    assert WEDGE.count_series(v, v, range(1, 9)) == [2 * (3 ** T - 1) for T in range(1, 9)]


@pytest.mark.parametrize("g,x,y", [
    (WEDGE, 0, (0, F(1, 3))),
    (THETA, (1, F(1, 4)), (2, F(1, 2))),
    (QuotientGraph.cycle(3), 0, 2),
    (QuotientGraph(2, ((0, 0), (0, 1), (1, 1))), (0, F(1, 2)), (2, F(2, 3))),
])
def test_counting_matches_enumeration(g, x, y):
    geo = g.enumerate_geodesics(x, y, 5)
    for T in (1, F(5, 2), 4, 5):
        assert g.count_geodesics(x, y, T) == sum(1 for r in geo if r.path.length_exact <= T)


def _non_backtracking(g, pieces):
    ds = [d for d, _, _ in pieces]
    return all(b in g.successors(a) for a, b in zip(ds, ds[1:]))


@pytest.mark.parametrize("g", [WEDGE, THETA, QuotientGraph(2, ((0, 0), (0, 1), (1, 1)))])
def test_lift_validity(g):
    x, y = g.point(0), g.point((len(g.edges) - 1, F(1, 3)))
    for r in g.enumerate_light(x, y, 4):
        assert _non_backtracking(g, r.path.pieces)
        assert r.path.start_point == x and r.path.end_point == y
        assert r.path.locate(x) == [] and r.path.locate(y) == []


def test_growth_oracle_examples():
    assert WEDGE.growth_oracle() == pytest.approx(3.0, rel=1e-9)
    assert QuotientGraph.cycle(5).growth_oracle() == pytest.approx(1.0, rel=1e-9)
    assert THETA.growth_oracle() == pytest.approx(2.0, rel=1e-9)


def test_growth_oracle_vs_eigenvalues():
    g = QuotientGraph(3, ((0, 1), (1, 2), (2, 0), (0, 0), (1, 2)))
    rho = max(abs(np.linalg.eigvals(g.hashimoto())))
    assert g.growth_oracle() == pytest.approx(rho, rel=1e-8)


def test_type_blocking_examples():
    v = WEDGE.point(0)
    B = WEDGE.type_blocking_set(v, v)
    assert set(B) == {GraphPoint(vertex=0), GraphPoint(edge=0, offset=F(1, 2)),
                      GraphPoint(edge=1, offset=F(1, 2))}
    cert = verify_blocking(B, WEDGE.enumerate_light(v, v, 5))
    assert cert.size == 2
    a, b = THETA.point(0), THETA.point(1)
    cert = verify_blocking(THETA.type_blocking_set(a, b), THETA.enumerate_light(a, b, 8))
    assert {cert.blockers[h.blocker] for h in cert.hits.values()} == {
        GraphPoint(edge=e, offset=F(1, 2)) for e in range(3)}


def test_graph_validation():
    with pytest.raises(GraphError):
        QuotientGraph(2, ((0, 1),))  # degree 1
    with pytest.raises(GraphError):
        QuotientGraph(4, ((0, 0), (1, 1), (2, 3), (2, 3)))  # disconnected
    with pytest.raises(GraphError):
        WEDGE.point((0, F(3, 2)))
    assert WEDGE.point((1, F(0))) == GraphPoint(vertex=0)


def test_distances():
    assert WEDGE.distance(WEDGE.point((0, F(1, 4))), WEDGE.point((1, F(1, 2)))) == 0.75
    assert WEDGE.diameter() == 1.0
    assert QuotientGraph.cycle(4).diameter() == 2.0


@st.composite
def multigraphs(draw):
    n = draw(st.integers(1, 3))
    while True:
        m = draw(st.integers(max(n, 1), 6))
        edges = [tuple(sorted(draw(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)))))
                 for _ in range(m)]
        try:
            return QuotientGraph(n, tuple(edges))
        except GraphError:
            continue


@st.composite
def points(draw, g):
    if draw(st.booleans()):
        return g.point(draw(st.integers(0, g.n_vertices - 1)))
    return g.point((draw(st.integers(0, len(g.edges) - 1)),
                    draw(st.fractions(F(1, 8), F(7, 8), max_denominator=8))))


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_type_blocking_uniform(data):
    g = data.draw(multigraphs())
    x, y = data.draw(points(g)), data.draw(points(g))
    B = g.type_blocking_set(x, y)
    sizes = set()
    for T in (3, 5):
        rays = g.enumerate_light(x, y, T)
        if not rays:
            continue
        cert = verify_blocking(B, rays)
        assert cert
        assert all(h.frac == F(1, 2) for h in cert.hits.values())
        sizes.add(len(B))
    assert len(sizes) <= 1


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_midpoint_census_matches_rays(data):
    g = data.draw(multigraphs())
    x, y = data.draw(points(g)), data.draw(points(g))
    B = g.type_blocking_set(x, y)
    T = data.draw(st.sampled_from([F(3, 2), 3, F(7, 2)]))
    rays = g.enumerate_light(x, y, T)
    c = g.midpoint_census(x, y, T, B)
    assert c.rays == len(rays) and c.passed
    if rays:
        assert c.size == verify_blocking(B, rays).size


def test_midpoint_census_witness():
    v = WEDGE.point(0)
    c = WEDGE.midpoint_census(v, v, 3, [GraphPoint(edge=0, offset=F(1, 2))])
    assert c.rays == 4 and c.unblocked == 2 and not c.passed
    assert c.witness in {r.rid for r in WEDGE.enumerate_light(v, v, 3)}
    big = QuotientGraph(2, ((1, 1), (1, 1), (1, 1), (0, 1), (0, 1)))
    o = big.point(0)
    assert big.midpoint_census(o, o, 6, big.type_blocking_set(o, o)).rays == 3746
