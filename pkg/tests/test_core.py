import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoblock.core import (CONSISTENT, INDETERMINATE, VIOLATED, BlockingError,
                           CandidatePoolError, LightRay, PairReport, SampledPath,
                           _segment_distance, blocking_lower_bound, canonical_order,
                           classify_pair, interiors_disjoint, min_blockers, replay,
                           verify_blocking)
from geoblock.torus import TorusSpace

T2 = TorusSpace.unit(2)


def _polyline(points):
    pts = np.asarray(points, dtype=float)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return SampledPath(s, pts)


def _sampled_ray(rid, points, n=50):
    pts = np.asarray(points, dtype=float)
    t = np.linspace(0, 1, n)[:, None]
    dense = np.concatenate([a + t * (b - a) for a, b in zip(pts, pts[1:])])
    _, keep = np.unique(dense.round(12), axis=0, return_index=True)
    path = _polyline(dense[np.sort(keep)])
    return LightRay(rid, tuple(pts[0]), tuple(pts[-1]), path.length, path, "plane")


def _brute_segment_distance(p0, p1, q0, q1, n=401):
    s = np.linspace(0, 1, n)[:, None]
    a = p0 + s * (p1 - p0)
    b = q0 + s * (q1 - q0)
    return np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2))


vec3 = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, vec3, vec3)
def test_segment_distance_matches_sampling(p0, p1, q0, q1):
    d = _segment_distance(p0, p1, q0, q1)[0]
    brute = _brute_segment_distance(p0, p1, q0, q1)
    assert d <= brute + 1e-9
    # sampling overestimates by at most one grid step of either segment
    step = (np.linalg.norm(p1 - p0) + np.linalg.norm(q1 - q0)) / 400
    assert brute <= d + step + 1e-9


def test_segment_distance_degenerate():
    p = np.array([0.0, 0, 0])
    assert _segment_distance(p, p, np.array([1.0, 0, 0]), np.array([1.0, 1, 0]))[0] == pytest.approx(1)
    assert _segment_distance(p, p, p + 3, p + 3)[0] == pytest.approx(np.sqrt(27))


def test_sampled_path_validation():
    with pytest.raises(BlockingError):
        SampledPath([0.0], [[0, 0, 0]])
    with pytest.raises(BlockingError):
        SampledPath([0.0, 0.0], [[0, 0, 0], [1, 0, 0]])


def test_locate_one_passage_per_crossing():
    # a square loop passes (1, 0) once in the interior
    path = _polyline([[0, 0], [2, 0], [2, 2], [0, 2], [0, 0.5]])
    hits = path.locate((1, 0), 1e-9)
    assert hits == [pytest.approx(1.0)]
    assert path.locate((0, 0), 1e-9) == []  # only at the endpoint


def test_sampled_interiors():
    a = _sampled_ray("a", [[0, 0], [1, 1]])
    b = _sampled_ray("b", [[0, 1], [1, 0]])
    c = _sampled_ray("c", [[0, 0], [1, -1]])
    assert not interiors_disjoint(a, b, 1e-6)
    assert interiors_disjoint(a, c, 1e-6)  # meet only at the shared source
    with pytest.raises(BlockingError):
        interiors_disjoint(a, b, 0.0)


def test_torus_square_blocking():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 3), Fraction(1, 5)))
    rays = T2.enumerate_light(x, y, 6)
    cert = verify_blocking(T2.midpoint_blocking_set(x, y), rays)
    assert cert and cert.size == 4 and replay(cert)
    assert all(h.frac == Fraction(1, 2) for h in cert.hits.values())
    fail = verify_blocking(T2.midpoint_blocking_set(x, y)[:3], rays)
    assert not fail
    assert fail.ray.rid in {r.rid for r in rays}


def test_verify_blocking_rejects_bad_input():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 2), 0))
    rays = T2.enumerate_light(x, y, 3)
    with pytest.raises(BlockingError):
        verify_blocking([], [])
    with pytest.raises(BlockingError):
        verify_blocking([x], rays + rays[:1])
    sampled = _sampled_ray("s", [[0, 0], [1, 1]])
    with pytest.raises(BlockingError):
        verify_blocking([(0.5, 0.5)], [sampled], 0.0)


def test_replay_detects_tampering():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 2), Fraction(1, 4)))
    cert = verify_blocking(T2.midpoint_blocking_set(x, y), T2.enumerate_light(x, y, 4))
    rid = next(iter(cert.hits))
    bad = dict(cert.hits)
    h = bad[rid]
    bad[rid] = type(h)(h.blocker, h.t, Fraction(1, 3))
    assert not replay(type(cert)(cert.blockers, bad, cert.tolerance, cert.rays))


def test_canonical_order_is_stable():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 2), Fraction(1, 3)))
    rays = T2.enumerate_light(x, y, 5)
    assert canonical_order(rays[::-1]) == canonical_order(rays)
    lengths = [r.length for r in canonical_order(rays)]
    assert lengths == sorted(lengths)


def test_lower_bound_exact_vs_greedy():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 2), Fraction(1, 2)))
    rays = T2.enumerate_light(x, y, 3)
    exact = blocking_lower_bound(rays, exact_limit=len(rays))
    greedy = blocking_lower_bound(rays, exact_limit=0)
    assert exact.maximum and not greedy.maximum
    assert len(exact) == 4
    assert len(greedy) <= len(exact)
    fam = [r for r in rays if r.rid in exact.rays]
    for a, b in itertools.combinations(fam, 2):
        assert interiors_disjoint(a, b)


def test_lower_bound_rejects_mixed_endpoints():
    a = T2.enumerate_light(T2.point((0, 0)), T2.point((Fraction(1, 2), 0)), 1)
    b = T2.enumerate_light(T2.point((0, 0)), T2.point((0, Fraction(1, 2))), 1)
    with pytest.raises(BlockingError):
        blocking_lower_bound(a + b)


@settings(max_examples=15, deadline=None)
@given(st.fractions(0, 1, max_denominator=6), st.fractions(0, 1, max_denominator=6))
def test_lower_bound_at_most_min_blockers(a, b):
    x, y = T2.point((0, 0)), T2.point((a, b))
    if T2.same_point(x, y):
        return
    rays = T2.enumerate_light(x, y, 2)
    pool = T2.midpoint_blocking_set(x, y) + [T2.point((a / 2, 0)), T2.point((0, b / 2))]
    size, chosen = min_blockers(rays, pool)
    assert verify_blocking(chosen, rays)
    assert len(blocking_lower_bound(rays)) <= size <= 4


def test_min_blockers_prefers_earlier_candidates():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 2), 0))
    rays = T2.enumerate_light(x, y, Fraction(1, 2))
    assert len(rays) == 2
    mids = T2.midpoint_blocking_set(x, y)
    size, chosen = min_blockers(rays, mids)
    assert size == 2 and chosen == [m for m in mids if m in chosen]
    with pytest.raises(CandidatePoolError):
        min_blockers(rays, [T2.point((Fraction(1, 7), Fraction(1, 7)))])


def test_classify_torus_pairs():
    x, y = T2.point((0, 0)), T2.point((Fraction(1, 4), 0))
    rep = classify_pair(T2, x, y, 2)
    assert rep.classification == VIOLATED and rep.lower_bound >= 3
    far = classify_pair(T2, x, T2.point((Fraction(1, 2), Fraction(1, 2))), 2)
    assert far.classification == INDETERMINATE  # at the diameter
    loop = classify_pair(T2, x, x, 1)
    assert loop.classification.startswith("sphere")


def test_pair_report_bounds_invariant():
    with pytest.raises(BlockingError):
        PairReport(0, 1, 1.0, 3, 3, 2, CONSISTENT, 0.5, 1.0)
