"""Geodesics on surfaces of revolution over the 2-sphere.

The metric ds^2 = (1 + h(cos r))^2 dr^2 + sin^2 r dphi^2 is integrated in the
embedding X = (sin r cos phi, sin r sin phi, cos r), where it reads
|dX|^2 + f(z) dz^2 and stays regular at both poles (see ``_flow``). Points
and sampled paths therefore live in R^3, and the tube tests of the core run
on chord distances there.

Light rays are found by shooting: scan the initial direction at x, record the
close passages of y along each trajectory with a signed miss, and refine every
sign change between neighbouring directions with a bracketing root finder.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from . import _flow
from .core import (VIOLATED, BlockingError, LightRay, PairReport, SampledPath,
                   blocking_lower_bound, classify_pair)

TWO_PI = 2 * math.pi


class IntegrationError(BlockingError):
    """A tolerance of the integrator was breached."""


class UnresolvedBracket(BlockingError):
    """Shooting could not separate candidate rays; rerun at a finer resolution."""


@dataclass(frozen=True)
class SurfacePoint:
    r: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.r <= math.pi:
            raise ValueError(f"polar distance {self.r} outside [0, pi]")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "r", float(self.r))

    @property
    def xyz(self) -> np.ndarray:
        s = math.sin(self.r)
        return np.array([s * math.cos(self.phi), s * math.sin(self.phi), math.cos(self.r)])

    @classmethod
    def from_xyz(cls, v) -> "SurfacePoint":
        x, y, z = (float(c) for c in v)
        return cls(math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x))

    def to_json(self) -> dict:
        return {"r": self.r, "phi": self.phi}


def _point(p) -> SurfacePoint:
    if isinstance(p, SurfacePoint):
        return p
    r, phi = p
    return SurfacePoint(float(r), float(phi))


@dataclass(frozen=True)
class ShootingResult:
    point: SurfacePoint
    angle: float
    length: float
    terminal: np.ndarray
    miss: float
    path: SampledPath
    clairaut_drift: float


@dataclass(frozen=True)
class Trajectory:
    path: SampledPath
    velocities: np.ndarray
    speed_drift: float
    clairaut_drift: float

    @property
    def end(self) -> np.ndarray:
        return self.path.points[-1]


class LightCensus(list):
    """Light rays from one shooting run; ``continuum`` flags a focal target."""

    def __init__(self, rays=(), continuum: bool = False, shots=(), resolution: int = 0):
        super().__init__(rays)
        self.continuum = continuum
        self.shots = list(shots)
        self.resolution = resolution


@dataclass(frozen=True, eq=False)
class RevolutionMetric:
    """Profile h(u) = sum coeffs[k] u^k; the round sphere has no coefficients."""

    coeffs: tuple = ()
    step: float = 1e-3
    resolution: int = 360
    tube_tol: float = 1e-6
    inj: float | None = None
    grid: int = 12
    tag: str = "revolution"

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))
        if any(v != 0.0 for v in c[0::2]):
            raise ValueError("profile must be odd")
        if c and abs(P.polyval(1.0, c)) > 1e-12:
            raise ValueError("profile must vanish at u = 1")
        if self.sup_profile() >= 1.0:
            raise ValueError("profile must satisfy sup |h| < 1")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8")

    @classmethod
    def round(cls, **kw) -> "RevolutionMetric":
        return cls((), **kw)

    @classmethod
    def zoll(cls, eps: float = 0.3, **kw) -> "RevolutionMetric":
        """h(u) = eps u (1 - u^2)."""
        return cls((0.0, eps, 0.0, -eps), **kw)

    @property
    def is_round(self) -> bool:
        return not self.coeffs

    def sup_profile(self) -> float:
        if not self.coeffs:
            return 0.0
        crit = [z.real for z in P.polyroots(P.polyder(self.coeffs)) if abs(z.imag) < 1e-12]
        us = [u for u in crit if -1 <= u <= 1] + [-1.0, 1.0]
        return float(max(abs(P.polyval(u, self.coeffs)) for u in us))

    def h(self, u):
        return P.polyval(u, self.coeffs) if self.coeffs else 0.0 * np.asarray(u)

    @cached_property
    def _f(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.coeffs:
            return np.zeros(1), np.zeros(1)
        num = P.polymul(self.coeffs, P.polyadd([2.0], self.coeffs))
        f, rem = P.polydiv(num, [1.0, 0.0, -1.0])
        if np.max(np.abs(rem)) > 1e-12:
            raise ValueError("profile does not vanish at the poles")
        fp = P.polyder(f) if len(f) > 1 else np.zeros(1)
        return np.ascontiguousarray(f, dtype=float), np.ascontiguousarray(fp, dtype=float)

    # -- frames and points ------------------------------------------------

    def velocity(self, p, angle: float) -> np.ndarray:
        """Unit tangent at p making ``angle`` with the meridian towards r = pi."""
        p = _point(p)
        a = 1.0 + float(self.h(math.cos(p.r)))
        cr, sr = math.cos(p.r), math.sin(p.r)
        cp, sp = math.cos(p.phi), math.sin(p.phi)
        e_r = np.array([cr * cp, cr * sp, -sr]) / a
        e_phi = np.array([-sp, cp, 0.0])
        return math.cos(angle) * e_r + math.sin(angle) * e_phi

    def same_point(self, x, y) -> bool:
        return float(np.linalg.norm(_point(x).xyz - _point(y).xyz)) < 1e-12

    def point(self, spec) -> SurfacePoint:
        return _point(spec)

    @property
    def injectivity_radius(self) -> float:
        if self.inj is not None:
            return float(self.inj)
        if self.is_round:
            return math.pi
        raise ValueError("declare a conservative injectivity radius for non-round metrics")

    # -- space protocol ---------------------------------------------------

    def enumerate_light(self, x, y, T) -> LightCensus:
        return shoot_light(self, x, y, float(T), self.resolution)

    def distance(self, x, y) -> float:
        return distance(self, x, y)

    def diameter(self) -> float:
        return _diameter_cached(self)

    def to_json(self) -> dict:
        return {"space": "revolution", "coeffs": list(self.coeffs), "step": self.step,
                "resolution": self.resolution, "tube_tol": self.tube_tol}


# -- integration -------------------------------------------------------------

def integrate(metric: RevolutionMetric, point, angle: float, length: float,
              step: float | None = None, check: bool = True) -> Trajectory:
    """RK4 with per-step projection; drift limits are per unit length."""
    step = metric.step if step is None else float(step)
    if not step > 0 or not length > 0:
        raise ValueError("step and length must be positive")
    n = max(1, math.ceil(length / step - 1e-12))
    h = length / n
    p = _point(point)
    fc, fpc = metric._f
    Xs, Vs = np.empty((n + 1, 3)), np.empty((n + 1, 3))
    speed, clair = _flow.integrate(p.xyz, metric.velocity(p, angle), h, n, fc, fpc, Xs, Vs)
    if check:
        # per-step speed error, scaled to a unit length of steps
        if speed / h > 1e-9:
            raise IntegrationError(f"unit-speed drift {speed / h:.3g} per unit length")
        if clair / length > 1e-7:
            raise IntegrationError(f"Clairaut drift {clair / length:.3g} per unit length")
    params = np.arange(n + 1) * h
    params[-1] = length
    return Trajectory(SampledPath(params, Xs), Vs, speed, clair)


def geodesic_flow(metric: RevolutionMetric, point, direction: float, length: float,
                  step: float | None = None) -> SampledPath:
    return integrate(metric, point, direction, length, step).path


def clairaut(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """sin^2 r * dphi/ds = x vy - y vx."""
    X, V = np.atleast_2d(X), np.atleast_2d(V)
    return X[:, 0] * V[:, 1] - X[:, 1] * V[:, 0]


# -- shooting ----------------------------------------------------------------

_MAX_EVENTS = 32
_SLACK = 0.05    # integrate a little past T so arrivals at T are interior minima
_MATCH = 0.25    # arrival lengths of neighbouring directions that belong together
_HIT = 1e-10     # |miss| of a scan sample counted as a direct hit
_FOCAL = 1e-7    # |miss| counted as landing when testing for a continuum


def _angles(resolution: int) -> np.ndarray:
    return np.arange(resolution) * (TWO_PI / resolution)


def _scan(metric, x: SurfacePoint, y: np.ndarray, angles, length, s_min, workers=1):
    fc, fpc = metric._f
    h = metric.step
    n = math.ceil(length / h)
    V0 = np.array([metric.velocity(x, a) for a in angles])
    x0 = x.xyz

    def job(i):
        # strided share of the directions; results are scattered back in order
        idx = np.arange(i, len(angles), workers)
        ev = np.zeros((len(idx), _MAX_EVENTS, 3))
        ct = np.zeros(len(idx), dtype=np.int64)
        dr = np.zeros((len(idx), 2))
        _flow.scan(x0, np.ascontiguousarray(V0[idx]), y, h, n, fc, fpc, 0.2, s_min,
                   _MAX_EVENTS, ev, ct, dr)
        return idx, ev, ct, dr

    events = np.zeros((len(angles), _MAX_EVENTS, 3))
    counts = np.zeros(len(angles), dtype=np.int64)
    drift = np.zeros((len(angles), 2))
    for idx, ev, ct, dr in _map(job, range(workers), workers):
        events[idx], counts[idx], drift[idx] = ev, ct, dr
    return events, counts, drift


def _brackets(angles, events, counts, T):
    """(theta_lo, theta_hi, s_estimate) for every arrival seen by the scan.

    A passage whose scanned miss is already below ``_HIT`` is its own
    zero-width bracket and takes no part in sign changes.
    """
    N = len(angles)
    out = []
    for i in range(N):
        j = (i + 1) % N
        hi_angle = angles[j] + (TWO_PI if j == 0 else 0.0)
        for a in range(counts[i]):
            s, m = events[i, a, 0], events[i, a, 1]
            if s > T + _MATCH:
                continue
            if abs(m) < _HIT:
                out.append((float(angles[i]), float(angles[i]), float(s)))
                continue
            partners = [b for b in range(counts[j]) if abs(events[j, b, 0] - s) < _MATCH]
            if len(partners) > 1:
                raise UnresolvedBracket(
                    f"two passages near length {s:.4f} between angles "
                    f"{angles[i]:.6f} and {hi_angle:.6f}")
            if not partners:
                continue
            s2, m2 = events[j, partners[0], 0], events[j, partners[0], 1]
            if abs(m2) >= _HIT and (m > 0) != (m2 > 0):
                out.append((float(angles[i]), float(hi_angle), 0.5 * (s + s2)))
    return out


def _miss_at(metric, x, y, angle, s_target, length):
    fc, fpc = metric._f
    n = math.ceil(length / metric.step)
    res = np.empty(3)
    ok = _flow.closest_event(x.xyz, metric.velocity(x, angle), y, metric.step, n, fc, fpc,
                             s_target, _MATCH, res)
    if not ok:
        raise UnresolvedBracket(f"passage near length {s_target:.4f} lost at angle {angle:.9f}")
    return res


def _arrive(metric, x, y, angle, s) -> tuple[float, Trajectory]:
    """Integrate to the arrival and correct its length along the track."""
    for _ in range(3):
        traj = integrate(metric, x, angle, s)
        X, V = traj.end, traj.velocities[-1]
        s -= float(np.dot(X - y, V) / np.dot(V, V))
    traj = integrate(metric, x, angle, s)
    return s, traj


def _shoot(metric, x, y, angle, s) -> ShootingResult:
    s, traj = _arrive(metric, x, y, angle, s)
    miss = float(np.linalg.norm(traj.end - y))
    return ShootingResult(x, angle % TWO_PI, s, traj.end, miss, traj.path, traj.clairaut_drift)


def _refine(metric, x, y, lo, hi, s_est, T, miss_tol):
    length = min(s_est + 2 * _MATCH, T + _SLACK)
    g = lambda a: _miss_at(metric, x, y, a, s_est, length)[1]
    if lo == hi:
        s = _miss_at(metric, x, y, lo, s_est, length)[0]
        return _checked(_shoot(metric, x, y, lo, s), miss_tol)
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        root = lo
    elif ghi == 0.0:
        root = hi
    else:
        if (glo > 0) == (ghi > 0):
            raise UnresolvedBracket(f"bracket [{lo:.9f}, {hi:.9f}] lost its sign change")
        root = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s = _miss_at(metric, x, y, root, s_est, length)[0]
    return _checked(_shoot(metric, x, y, root, s), miss_tol)


def _checked(shot: ShootingResult, miss_tol: float) -> ShootingResult:
    if shot.miss >= miss_tol:
        raise UnresolvedBracket(f"refined ray at angle {shot.angle:.9f} misses by {shot.miss:.3g}")
    return shot


def _dedupe(shots: list[ShootingResult]) -> list[ShootingResult]:
    shots = sorted(shots, key=lambda r: (r.angle, r.length))
    out: list[ShootingResult] = []
    for r in shots:
        if any(min(abs(r.angle - q.angle), TWO_PI - abs(r.angle - q.angle)) < 1e-5
               and abs(r.length - q.length) < 1e-5 for q in out):
            continue
        out.append(r)
    return out


def _to_ray(metric, x, y, shot: ShootingResult) -> LightRay:
    rid = f"s[{shot.angle:.9f}|{shot.length:.9f}]"
    return LightRay(rid, x, y, shot.length, shot.path, metric.tag)


def shoot_light(metric: RevolutionMetric, x, y, T: float, resolution: int | None = None,
                *, miss_tol: float = 1e-8, workers: int = 1) -> LightCensus:
    """Light rays from x to y of length at most T, found by shooting.

    A target on which nearly every scanned direction lands is reported as a
    continuum: the census then holds one ray per landing direction.
    """
    if T > TWO_PI + 1e-9:
        raise ValueError("horizon is capped at 2 pi")
    if not T > 0:
        raise ValueError("horizon must be positive")
    resolution = metric.resolution if resolution is None else int(resolution)
    x, yp = _point(x), _point(y)
    y3 = yp.xyz
    angles = _angles(resolution)
    s_min = 1e-2
    events, counts, _ = _scan(metric, x, y3, angles, T + _SLACK, s_min, workers)

    landing = []
    for i in range(resolution):
        hits = [events[i, a, 0] for a in range(counts[i])
                if abs(events[i, a, 1]) < _FOCAL and events[i, a, 0] <= T + 1e-9]
        if hits:
            landing.append((float(angles[i]), min(hits)))
    continuum = len(landing) >= 0.9 * resolution

    if continuum:
        jobs = [(a, s) for a, s in landing]
        shots = _map(lambda job: _shoot(metric, x, y3, *job), jobs, workers)
    else:
        brackets = [b for b in _brackets(angles, events, counts, T) if b[2] <= T + _MATCH]
        shots = _map(lambda b: _refine(metric, x, y3, b[0], b[1], b[2], T, miss_tol),
                     brackets, workers)
    shots = [s for s in _dedupe(shots) if s.length <= T + 1e-9]
    if continuum:
        shots = [s for s in shots if s.miss < miss_tol]
    tol = metric.tube_tol
    x3 = x.xyz
    light = [s for s in shots if not s.path.locate(x3, tol) and not s.path.locate(y3, tol)]
    rays = [_to_ray(metric, x, yp, s) for s in light]
    return LightCensus(rays, continuum, light, resolution)


def _map(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# -- distances ---------------------------------------------------------------

def _arrivals(angles, events, counts, T):
    """Approximate lengths of all arrivals: direct hits and interpolated brackets."""
    out = []
    N = len(angles)
    for i in range(N):
        j = (i + 1) % N
        for a in range(counts[i]):
            s, m = events[i, a, 0], events[i, a, 1]
            if s > T:
                continue
            if abs(m) < _HIT:
                out.append(s)
                continue
            for b in range(counts[j]):
                s2, m2 = events[j, b, 0], events[j, b, 1]
                if abs(s2 - s) < _MATCH and abs(m2) >= _HIT and (m > 0) != (m2 > 0):
                    out.append(s + (s2 - s) * m / (m - m2))
    return out


def distance(metric: RevolutionMetric, x, y, resolution: int = 180) -> float:
    """Shortest arrival length, refined by shooting."""
    x, yp = _point(x), _point(y)
    if metric.same_point(x, yp):
        return 0.0
    y3 = yp.xyz
    L = math.pi * (1 + metric.sup_profile()) + 0.1
    angles = _angles(resolution)
    events, counts, _ = _scan(metric, x, y3, angles, L + _SLACK, 1e-3)
    direct = [events[i, a, 0] for i in range(resolution) for a in range(counts[i])
              if abs(events[i, a, 1]) < _HIT]
    brackets = _brackets(angles, events, counts, L)
    if not brackets and not direct:
        raise UnresolvedBracket("no arrival found; increase the resolution")
    best = min(direct) if direct else math.inf
    cand = sorted(brackets, key=lambda b: b[2])
    for lo, hi, s in cand:
        if s > best + 0.05:
            break
        best = min(best, _refine(metric, x, y3, lo, hi, s, L, 1e-8).length)
    return float(best)


@dataclass(frozen=True)
class DiameterEstimate:
    value: float
    pair: tuple[SurfacePoint, SurfacePoint]
    grid: int
    polished: bool = field(default=False)


def _fan_distances(metric, x: SurfacePoint, Y: np.ndarray, resolution: int, L: float):
    fc, fpc = metric._f
    h = metric.step
    n = math.ceil((L + _SLACK) / h)
    angles = _angles(resolution)
    V0 = np.array([metric.velocity(x, a) for a in angles])
    events = np.zeros((resolution, len(Y), 8, 3))
    counts = np.zeros((resolution, len(Y)), dtype=np.int64)
    _flow.fan_scan(x.xyz, V0, Y, h, n, fc, fpc, 0.2, 1e-3, 8, events, counts)
    return angles, events, counts


def fan_arrivals(metric, x, Y, resolution: int, L: float) -> list[list[float]]:
    """Approximate arrival lengths at each target in Y from one fan of geodesics."""
    angles, events, counts = _fan_distances(metric, _point(x), np.asarray(Y, dtype=float),
                                            resolution, L)
    return [sorted(_arrivals(angles, events[:, j], counts[:, j], L)) for j in range(len(Y))]


def _grid_targets(grid: int) -> tuple[list[SurfacePoint], np.ndarray]:
    pts = [SurfacePoint(math.pi * j / grid, math.pi * k / grid)
           for j in range(grid + 1) for k in range(grid + 1)]
    return pts, np.array([p.xyz for p in pts])


def diameter_estimate(metric: RevolutionMetric, grid: int, resolution: int = 180,
                      polish: bool = True) -> DiameterEstimate:
    """Max over grid pairs of the shortest arrival.

    Rotational symmetry puts x on the meridian phi = 0 and reflection puts y
    in phi in [0, pi]. The best grid pair is then refined by shooting.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    L = math.pi * (1 + metric.sup_profile()) + 0.1
    targets, Y = _grid_targets(grid)
    best = (-1.0, None, None)
    for i in range(grid + 1):
        x = SurfacePoint(math.pi * i / grid, 0.0)
        arr = fan_arrivals(metric, x, Y, resolution, L)
        for y, a in zip(targets, arr):
            if metric.same_point(x, y) or not a:
                continue
            if a[0] > best[0] + 1e-12:
                best = (a[0], x, y)
    value, x, y = best
    if not polish:
        return DiameterEstimate(float(value), (x, y), grid)
    value = distance(metric, x, y, resolution)
    if not metric.is_round:
        # coordinate ascent on (r_x, r_y, phi_y) with shrinking steps
        params = [x.r, y.r, y.phi]
        step = math.pi / grid / 2
        while step > 2e-3:
            improved = False
            for k in range(3):
                for sgn in (1, -1):
                    trial = list(params)
                    trial[k] += sgn * step
                    if not (0 <= trial[0] <= math.pi and 0 <= trial[1] <= math.pi):
                        continue
                    d = distance(metric, (trial[0], 0.0), (trial[1], trial[2]), resolution)
                    if d > value + 1e-12:
                        value, params, improved = d, trial, True
            if not improved:
                step /= 2
        x, y = SurfacePoint(params[0], 0.0), SurfacePoint(params[1], params[2])
    return DiameterEstimate(float(value), (x, y), grid, True)


_DIAMETERS: dict = {}


def _diameter_cached(metric: RevolutionMetric) -> float:
    key = (metric.coeffs, metric.step, metric.grid)
    if key not in _DIAMETERS:
        _DIAMETERS[key] = diameter_estimate(metric, metric.grid).value
    return _DIAMETERS[key]


# -- cross blocking scan -----------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    reports: list[PairReport]
    candidates: int
    diameter: float
    grid: int


def scan_cross_blocking(metric: RevolutionMetric, grid: int, T: float = TWO_PI,
                        margin: float = 0.05, limit: int = 1, min_arrivals: int = 3,
                        resolution: int | None = None, workers: int = 1) -> ScanResult:
    """Pairs on a coarse grid with at least three interior-disjoint light rays.

    A fan from each source latitude screens the grid for targets reached by
    at least ``min_arrivals`` geodesics; screened pairs are shot in full and
    classified. Stops after ``limit`` violations.
    """
    T = min(float(T), TWO_PI)
    diam = metric.diameter()
    targets, Y = _grid_targets(grid)
    cands = []
    for i in range(grid + 1):
        x = SurfacePoint(math.pi * i / grid, 0.0)
        arr = fan_arrivals(metric, x, Y, 180, T)
        for y, a in zip(targets, arr):
            if len(a) >= min_arrivals and margin < a[0] < diam - margin:
                cands.append((-len(a), i, y.r, y.phi, x, y))
    cands.sort(key=lambda c: c[:4])
    reports = []
    for *_, x, y in cands:
        try:
            rays = shoot_light(metric, x, y, T, resolution, workers=workers)
        except UnresolvedBracket:
            continue
        if len(rays) < 3 or rays.continuum:
            continue
        d = distance(metric, x, y)
        if not margin < d < diam - margin:
            continue
        rep = classify_pair(metric, x, y, T, metric.tube_tol, rays=rays)
        if rep.classification == VIOLATED:
            reports.append(rep)
            if len(reports) >= limit:
                break
    return ScanResult(reports, len(cands), diam, grid)


def disjoint_rays(rays, tol: float):
    return blocking_lower_bound(list(rays), tol=tol)
