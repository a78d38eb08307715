"""Growth of geodesic counts, entropy estimates and the counting inequalities.

n_T counts geodesic segments from x to y of length at most T and m_T counts
the light rays among them. Every segment restricts to a light ray (from its
last visit of x to the next visit of y), which bounds n_T by the fiber sizes
of that projection times m_T, and a blocking set splits every light ray into
two halves one of which is short.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .core import BlockingError, LightRay, verify_blocking


class InequalityViolation(BlockingError):
    def __init__(self, report):
        super().__init__(f"counting inequality fails at T = {report.failures[0]}")
        self.report = report


@dataclass(frozen=True)
class GrowthSeries:
    x: Any
    y: Any
    horizons: tuple[float, ...]
    n: tuple[int, ...]
    m: tuple[int, ...]
    inj: float | None = None
    space: str = ""

    def __post_init__(self):
        h, n, m = tuple(float(v) for v in self.horizons), tuple(self.n), tuple(self.m)
        if not (len(h) == len(n) == len(m)):
            raise ValueError("horizons, n and m differ in length")
        if any(b <= a for a, b in zip(h, h[1:])):
            raise ValueError("horizons must increase")
        if any(b < a for a, b in zip(n, n[1:])) or any(b < a for a, b in zip(m, m[1:])):
            raise ValueError("counts must be nondecreasing")
        if any(b > a for a, b in zip(n, m)):
            raise ValueError("m_T exceeds n_T")
        object.__setattr__(self, "horizons", h)
        object.__setattr__(self, "n", tuple(int(v) for v in n))
        object.__setattr__(self, "m", tuple(int(v) for v in m))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "n", "m"])
        for row in zip(self.horizons, self.n, self.m):
            w.writerow([repr(row[0]), row[1], row[2]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, x=None, y=None, inj=None, space="") -> "GrowthSeries":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(x, y, tuple(float(r["T"]) for r in rows), tuple(int(r["n"]) for r in rows),
                   tuple(int(r["m"]) for r in rows), inj, space)


def torus_series(space, x, y, T_max, step) -> GrowthSeries:
    rows = space.growth_series(x, y, T_max, step)
    return GrowthSeries(x, y, *zip(*rows), inj=space.injectivity_radius, space=space.tag)


def graph_series(graph, x, y, horizons, inj: float | None = None) -> GrowthSeries:
    horizons = sorted(Fraction(h) for h in horizons)
    n = graph.count_series(x, y, horizons)
    light = [r.path.length_exact for r in graph.enumerate_light(x, y, horizons[-1])]
    m = [sum(1 for L in light if L <= T) for T in horizons]
    return GrowthSeries(graph.point(x), graph.point(y), tuple(float(T) for T in horizons),
                        tuple(n), tuple(m), inj, graph.tag)


@dataclass(frozen=True)
class EntropyEstimate:
    estimate: float
    ratio: float
    residual: float
    tail: tuple[float, ...]
    fit_horizons: tuple[float, ...]

    @property
    def tail_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.tail, self.tail[1:]))

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "ratio": self.ratio, "residual": self.residual,
                "tail": list(self.tail), "tail_decreasing": self.tail_decreasing,
                "fit_horizons": list(self.fit_horizons)}


def mane_estimate(series: GrowthSeries) -> EntropyEstimate:
    """Slope of log n_T over the top half of the horizons, with log(n_T)/T.

    The slope is the estimate; the ratio at the largest horizon and the fit
    residual are diagnostics. A finite horizon never computes the limit.
    """
    pts = [(T, n) for T, n in zip(series.horizons, series.n) if n > 0]
    if not pts:
        raise ValueError("all counts are zero")
    if len(pts) < 4:
        raise ValueError("need at least 4 horizons with n > 0")
    T = np.array([p[0] for p in pts])
    logn = np.log(np.array([p[1] for p in pts], dtype=float))
    top = len(T) // 2
    Tf, lf = T[top:], logn[top:]
    slope, icept = np.polyfit(Tf, lf, 1)
    res = float(np.sqrt(np.mean((lf - (slope * Tf + icept)) ** 2)))
    ratios = logn / T
    return EntropyEstimate(float(slope) + 0.0, float(ratios[-1]), res,
                           tuple(float(v) for v in ratios[-3:]), tuple(float(v) for v in Tf))


# -- projection to light rays ---------------------------------------------------

@dataclass(frozen=True)
class Projection:
    rays: tuple[LightRay, ...]
    fibers: dict[str, int]
    lengths: dict[str, tuple[float, ...]] = field(repr=False)

    def fiber_sizes_at(self, T: float) -> dict[str, int]:
        return {rid: sum(1 for L in ls if L <= T + 1e-12) for rid, ls in self.lengths.items()}


def _light_image(ray: LightRay) -> LightRay:
    path = ray.path.light_part(ray.source, ray.target)
    return LightRay(path.ray_id(), ray.source, ray.target, path.length, path, ray.space)


def light_projection(segments: Sequence[LightRay]) -> Projection:
    """Image light ray of every segment and the fiber size of every image."""
    if not segments:
        return Projection((), {}, {})
    ends = {(repr(s.source), repr(s.target)) for s in segments}
    if len(ends) > 1:
        raise BlockingError("segments do not share endpoints")
    if not all(s.path.exact for s in segments):
        raise BlockingError("projection needs exact paths")
    images, lengths = [], {}
    for s in segments:
        try:
            img = _light_image(s)
        except ValueError as err:  # max/min of an empty visit list
            raise BlockingError(f"segment {s.rid} never reaches y after leaving x") from err
        images.append(img)
        lengths.setdefault(img.rid, []).append(s.length)
    fibers = dict(sorted(Counter(r.rid for r in images).items()))
    return Projection(tuple(images), fibers,
                      {k: tuple(sorted(v)) for k, v in sorted(lengths.items())})


def fiber_bound(T: float, inj: float) -> float:
    """(T/2I)^2, or 1 below T = 2I where every fiber is a single ray."""
    return max(1.0, (T / (2 * inj)) ** 2)


@dataclass(frozen=True)
class InequalityReport:
    horizons: tuple[float, ...]
    lhs: tuple[int, ...]
    rhs: tuple[float, ...]
    failures: tuple[float, ...]
    tightest: float
    fiber_failures: tuple[tuple[float, str, int], ...] = ()

    @property
    def holds(self) -> bool:
        return not self.failures and not self.fiber_failures

    def to_json(self) -> dict:
        return {"holds": self.holds, "tightest": self.tightest,
                "rows": [{"T": T, "lhs": a, "rhs": b, "ratio": (a / b if b else None)}
                         for T, a, b in zip(self.horizons, self.lhs, self.rhs)],
                "failures": list(self.failures),
                "fiber_failures": [list(f) for f in self.fiber_failures]}


def counting_inequality_check(series: GrowthSeries, projection: Projection | None = None,
                              strict: bool = True) -> InequalityReport:
    """n_T <= (T/2I)^2 m_T at every horizon, and per-ray fibers if a projection is given.

    Fibers are checked at every T, not only at the series horizons.
    """
    inj = series.inj
    if inj is None or not inj > 0:
        raise ValueError("the series needs a positive injectivity radius")
    rhs = tuple(fiber_bound(T, inj) * m for T, m in zip(series.horizons, series.m))
    fails = tuple(T for T, n, r in zip(series.horizons, series.n, rhs) if n > r)
    ratios = [n / r for n, r in zip(series.n, rhs) if r > 0]
    fiber_fails = []
    if projection is not None:
        # a fiber reaches size k at the length of its k-th segment, and the
        # bound only grows between lengths, so those are the binding horizons
        for rid, ls in projection.lengths.items():
            for k, L in enumerate(ls, 1):
                if k > fiber_bound(L, inj) * (1 + 1e-12):
                    fiber_fails.append((L, rid, k))
    report = InequalityReport(series.horizons, series.n, rhs, fails,
                              max(ratios) if ratios else 0.0, tuple(fiber_fails))
    if strict and not report.holds:
        raise InequalityViolation(report)
    return report


# -- blocker split ---------------------------------------------------------------

@dataclass(frozen=True)
class SplitReport:
    horizon: float
    m_T: int
    rhs: int
    per_blocker: tuple[tuple[int, int], ...]
    matching: dict[str, tuple[int, str, str]]

    @property
    def holds(self) -> bool:
        return self.m_T <= self.rhs

    def to_json(self) -> dict:
        return {"T": self.horizon, "m_T": self.m_T, "rhs": self.rhs, "holds": self.holds,
                "per_blocker": [list(p) for p in self.per_blocker],
                "matching": {k: list(v) for k, v in self.matching.items()}}


def _piece(path, a, b):
    if hasattr(path, "length_exact"):
        L = path.length_exact
        return path.sub(a * L, b * L)
    return path.sub(a, b)


def blocker_split_check(space, x, y, blockers: Sequence[Any], T,
                        rays: Sequence[LightRay] | None = None) -> SplitReport:
    """m_T(x,y) <= sum_j n_{T/2}(x, b_j) + n_{T/2}(b_j, y), ray by ray.

    Each light ray is matched to its half from x to the blocker, or from the
    blocker to y, whichever has length at most T/2, and the half is found
    among the enumerated geodesics of that horizon.
    """
    if rays is None:
        rays = space.enumerate_light(x, y, T)
    rays = list(rays)
    if not rays:
        return SplitReport(float(T), 0, 0, (), {})
    cert = verify_blocking(blockers, rays)
    if not cert:
        raise BlockingError(f"blockers do not block ray {cert.ray.rid}")
    half = T / 2
    to_b = [space.enumerate_geodesics(x, b, half) for b in blockers]
    from_b = [space.enumerate_geodesics(b, y, half) for b in blockers]
    keys_to = [{r.path.sort_key() for r in g} for g in to_b]
    keys_from = [{r.path.sort_key() for r in g} for g in from_b]
    matching = {}
    for ray in rays:
        hit = cert.hits[ray.rid]
        frac = Fraction(hit.frac)
        # at least one side is at most T/2; midpoint hits take the x side
        if hit.t <= float(half) * (1 + 1e-12):
            sub, side, keys = _piece(ray.path, Fraction(0), frac), "x-b", keys_to[hit.blocker]
        else:
            sub, side, keys = _piece(ray.path, frac, Fraction(1)), "b-y", keys_from[hit.blocker]
        if sub.sort_key() not in keys:
            raise BlockingError(f"half of {ray.rid} is not among the enumerated geodesics")
        matching[ray.rid] = (hit.blocker, side, sub.ray_id())
    if len(set(matching.values())) != len(matching):
        raise BlockingError("two rays share a matched half")
    per = tuple((len(a), len(b)) for a, b in zip(to_b, from_b))
    return SplitReport(float(T), len(rays), sum(a + b for a, b in per), per, matching)
