import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoblock.core import interiors_disjoint, verify_blocking
from geoblock.revolution import (IntegrationError, RevolutionMetric, SurfacePoint, clairaut,
                                 diameter_estimate, disjoint_rays, distance, integrate,
                                 shoot_light)

ROUND = RevolutionMetric.round()
ZOLL = RevolutionMetric.zoll(0.3)


def sphere_distance(x, y):
    return math.acos(max(-1.0, min(1.0, float(np.dot(x.xyz, y.xyz)))))


def test_metric_validation():
    with pytest.raises(ValueError):
        RevolutionMetric((0.1, 0.2))  # not odd
    with pytest.raises(ValueError):
        RevolutionMetric((0.0, 0.5))  # h(1) != 0
    with pytest.raises(ValueError):
        RevolutionMetric.zoll(3.0)  # sup |h| >= 1
    assert ZOLL.sup_profile() == pytest.approx(0.3 * 2 / (3 * math.sqrt(3)), rel=1e-12)
    assert ROUND.injectivity_radius == math.pi
    with pytest.raises(ValueError):
        ZOLL.injectivity_radius
    with pytest.raises(ValueError):
        SurfacePoint(4.0, 0.0)


def test_surface_points():
    p = SurfacePoint(1.0, 7.0)
    assert p.phi == pytest.approx(7.0 - 2 * math.pi)
    q = SurfacePoint.from_xyz(p.xyz)
    assert q.r == pytest.approx(p.r) and q.phi == pytest.approx(p.phi)


def test_round_closure_and_antipode():
    p = SurfacePoint(math.pi / 2, 0.3)
    tr = integrate(ROUND, p, 1.1, 2 * math.pi)
    assert np.linalg.norm(tr.end - p.xyz) < 1e-6
    assert np.linalg.norm(tr.velocities[-1] - tr.velocities[0]) < 1e-6
    half = integrate(ROUND, p, math.pi / 2, math.pi)  # along the equator
    assert np.linalg.norm(half.end + p.xyz) < 1e-6


def test_zoll_closure():
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = SurfacePoint(rng.uniform(0.05, math.pi - 0.05), rng.uniform(0, 2 * math.pi))
        tr = integrate(ZOLL, p, rng.uniform(0, 2 * math.pi), 2 * math.pi)
        assert np.linalg.norm(tr.end - p.xyz) < 1e-4


def test_zoll_closure_through_pole():
    tr = integrate(ZOLL, SurfacePoint(0.0, 0.0), 0.4, 2 * math.pi)
    assert np.linalg.norm(tr.end - np.array([0, 0, 1.0])) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, math.pi), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_clairaut_and_speed(r, phi, angle):
    tr = integrate(ZOLL, SurfacePoint(r, phi), angle, 3.0)
    c = clairaut(tr.path.points, tr.velocities)
    assert np.max(np.abs(c - c[0])) / 3.0 < 1e-7
    assert tr.speed_drift / ZOLL.step < 1e-9
    # metric norm of the velocity stays 1
    X, V = tr.path.points, tr.velocities
    f = np.polynomial.polynomial.polyval(X[:, 2], ZOLL._f[0])
    norm2 = np.einsum("ij,ij->i", V, V) + f * V[:, 2] ** 2
    assert np.max(np.abs(norm2 - 1)) < 1e-9


def test_integration_checks():
    with pytest.raises(ValueError):
        integrate(ROUND, SurfacePoint(1, 0), 0, -1.0)
    coarse = RevolutionMetric.zoll(0.3, step=0.5)
    with pytest.raises(IntegrationError):
        integrate(coarse, SurfacePoint(1, 0), 0.3, 6.0)


def test_round_light_pair():
    x, y = SurfacePoint(math.pi / 2, 0), SurfacePoint(math.pi / 2, math.pi / 2)
    rays = shoot_light(ROUND, x, y, 2 * math.pi, 90)
    assert sorted(r.length for r in rays) == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-6)
    assert not rays.continuum
    assert interiors_disjoint(rays[0], rays[1], ROUND.tube_tol)


def test_round_antipodal_continuum():
    x = SurfacePoint(1.0, 0.5)
    y = SurfacePoint.from_xyz(-x.xyz)
    rays = shoot_light(ROUND, x, y, 2 * math.pi, 32)
    assert rays.continuum


def test_round_loops_blocked_by_antipode():
    x = SurfacePoint(0.8, 1.0)
    loops = shoot_light(ROUND, x, x, 2 * math.pi, 16)
    assert loops.continuum and len(loops) >= 16
    anti = SurfacePoint.from_xyz(-x.xyz)
    assert verify_blocking([anti], list(loops), ROUND.tube_tol)
    assert not verify_blocking([SurfacePoint(0.3, 0.0)], list(loops), ROUND.tube_tol)


def test_near_round_continuity():
    near = RevolutionMetric.zoll(1e-4)
    x, y = SurfacePoint(1.0, 0.2), SurfacePoint(2.0, 1.4)
    d = sphere_distance(x, y)
    rays = shoot_light(near, x, y, 2 * math.pi, 120)
    assert len(rays) == 2
    assert sorted(r.length for r in rays) == pytest.approx([d, 2 * math.pi - d], abs=1e-2)


def test_shooting_rejects_long_horizon():
    with pytest.raises(ValueError):
        shoot_light(ROUND, SurfacePoint(1, 0), SurfacePoint(2, 0), 7.0)


def test_distance_round():
    x, y = SurfacePoint(0.4, 0.0), SurfacePoint(2.2, 2.0)
    assert distance(ROUND, x, y, 90) == pytest.approx(sphere_distance(x, y), abs=1e-6)


def test_diameter_round():
    est = diameter_estimate(ROUND, 8, resolution=90)
    assert est.value == pytest.approx(math.pi, abs=1e-3)
    zero = diameter_estimate(RevolutionMetric.zoll(0.0), 8, resolution=90)
    assert zero.value == est.value


def test_disjoint_rays_helper():
    x, y = SurfacePoint(math.pi / 2, 0), SurfacePoint(math.pi / 2, 1.0)
    rays = shoot_light(ROUND, x, y, 2 * math.pi, 60)
    assert len(disjoint_rays(list(rays), ROUND.tube_tol)) == 2


def test_zoll_diameter_refinement():
    # the meridian has length pi for any odd profile; grid refinement must agree
    a, b = diameter_estimate(ZOLL, 8), diameter_estimate(ZOLL, 12)
    assert abs(a.value - b.value) < 1e-2
    assert b.value == pytest.approx(math.pi, abs=1e-3)
