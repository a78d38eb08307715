"""Light rays, blocking certificates and bounds on blocking numbers.

Nothing in here knows about a particular geometry. A ray carries a path
object (an exact segment in a linear cover, an edge walk in a tree, or a
numerically sampled polyline) and the path is responsible for answering two
questions: where, if anywhere, does a point sit strictly inside me, and does
my interior meet the interior of another path of the same kind.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Any, Iterable, Protocol, Sequence

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree


class BlockingError(ValueError):
    """Raised for malformed inputs to the blocking routines."""


class CandidatePoolError(BlockingError):
    """Some ray is not hit by any candidate blocker."""

    def __init__(self, ray: "LightRay"):
        super().__init__(f"ray {ray.rid} is hit by no candidate")
        self.ray = ray


class Path(Protocol):
    exact: bool

    def locate(self, point: Any, tol: float) -> list[Fraction | float]: ...

    def interiors_meet(self, other: "Path", tol: float) -> bool: ...

    def reversed(self) -> "Path": ...

    def sort_key(self) -> tuple: ...

    def to_json(self) -> dict: ...


# ----------------------------------------------------------------------
# sampled (numerical) paths


def chord_point(point: Any) -> np.ndarray:
    xyz = getattr(point, "xyz", None)
    if xyz is not None:
        return np.asarray(xyz, dtype=float)
    return np.asarray(point, dtype=float)


def _segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Euclidean distances between closed segments [p0,p1] and [q0,q1], row-wise."""
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (p0, p1, q0, q1))
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    dot = lambda u, v: np.einsum("ij,ij->i", u, v)
    a, e, f, c, b = dot(d1, d1), dot(d2, d2), dot(d2, r), dot(d1, r), dot(d1, d2)
    tiny = 1e-300
    a_ = np.where(a > tiny, a, 1.0)
    e_ = np.where(e > tiny, e, 1.0)
    denom = a * e - b * b
    s = np.where(denom > tiny, np.clip((b * f - c * e) / np.where(denom > tiny, denom, 1.0), 0, 1), 0.0)
    t = (b * s + f) / e_
    low, high = t < 0, t > 1
    s = np.where(low, np.clip(-c / a_, 0, 1), np.where(high, np.clip((b - c) / a_, 0, 1), s))
    t = np.clip(t, 0, 1)
    # degenerate segments are points
    pa, pe = a <= tiny, e <= tiny
    s = np.where(pa, 0.0, s)
    t = np.where(pa, np.clip(f / e_, 0, 1), t)
    s = np.where(pe & ~pa, np.clip(-c / a_, 0, 1), s)
    t = np.where(pe, 0.0, t)
    return np.linalg.norm(p0 + s[:, None] * d1 - (q0 + t[:, None] * d2), axis=1)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Polyline samples ``points[i]`` at arc-length parameters ``params[i]``.

    Points live in the ambient chart of the space (R^3 for the sphere models),
    and every distance below is measured there.
    """

    params: np.ndarray
    points: np.ndarray
    margin: float = 1e-2
    exact = False

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        if params.ndim != 1 or len(params) < 2:
            raise BlockingError("sampled path needs at least two samples")
        if params[0] != 0.0 or np.any(np.diff(params) <= 0):
            raise BlockingError("sample parameters must increase strictly from 0")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @property
    def length(self) -> float:
        return float(self.params[-1])

    def point_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.params, self.points[:, k])
                         for k in range(self.points.shape[1])])

    def locate(self, point: Any, tol: float) -> list[float]:
        # tube test: within tol of the polyline at a parameter in (tol, L - tol)
        if tol <= 0:
            raise BlockingError("sampled paths need a positive tolerance")
        p = chord_point(point)
        a = self.points[:-1]
        d = self.points[1:] - a
        dd = np.einsum("ij,ij->i", d, d)
        s = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        foot = a + s[:, None] * d
        dist = np.linalg.norm(foot - p, axis=1)
        t = self.params[:-1] + s * np.diff(self.params)
        idx = np.flatnonzero(dist <= tol)
        if len(idx) == 0:
            return []
        # one parameter per passage, its closest approach; passages that
        # bottom out at an endpoint are the endpoint itself
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        found = (float(t[run[np.argmin(dist[run])]]) for run in runs)
        return [v for v in found if tol < v < self.length - tol]

    def _interior(self) -> np.ndarray:
        keep = (self.params > self.margin) & (self.params < self.length - self.margin)
        return self.points[keep]

    @cached_property
    def _tree(self) -> tuple[np.ndarray, cKDTree | None, float]:
        pts = self._interior()
        if len(pts) < 2:
            return pts, None, 0.0
        seg = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        return pts, cKDTree(pts), seg

    def interiors_meet(self, other: "SampledPath", tol: float) -> bool:
        if tol <= 0:
            raise BlockingError("tol = 0 is only meaningful for exact paths")
        a, ta, sa = self._tree
        b, tb, sb = other._tree
        if ta is None or tb is None:
            return False
        # a few nearest samples of b within reach of every sample of a
        dist, nb = tb.query(a, k=min(8, len(b)), distance_upper_bound=tol + 2 * max(sa, sb))
        ii, kk = np.nonzero(np.isfinite(dist))
        if len(ii) == 0:
            return False
        jj = nb[ii, kk]
        # the segments on either side of each close sample pair
        i = np.concatenate([ii - 1, ii] * 2)
        j = np.concatenate([jj - 1] * 2 + [jj] * 2)
        ok = (i >= 0) & (i < len(a) - 1) & (j >= 0) & (j < len(b) - 1)
        i, j = i[ok], j[ok]
        if len(i) == 0:
            return False
        return bool(np.any(_segment_distance(a[i], a[i + 1], b[j], b[j + 1]) <= tol))

    def min_gap(self, other: "SampledPath") -> float:
        a, _, _ = self._tree
        b, tb, _ = other._tree
        if len(a) == 0 or tb is None:
            return math.inf
        return float(tb.query(a, k=1)[0].min())

    def reversed(self) -> "SampledPath":
        L = self.length
        return SampledPath(L - self.params[::-1], self.points[::-1].copy(), self.margin)

    def sort_key(self) -> tuple:
        mid = self.point_at(self.length / 2)
        return tuple(round(float(v), 9) for v in (*self.points[0], *mid, *self.points[-1]))

    def to_json(self) -> dict:
        return {"kind": "sampled",
                "params": [float(v) for v in self.params],
                "points": [[float(c) for c in p] for p in self.points]}


# ----------------------------------------------------------------------
# rays and results


@dataclass(frozen=True, eq=False)
class LightRay:
    rid: str
    source: Any
    target: Any
    length: float
    path: Any
    space: str

    def __post_init__(self):
        if not self.length > 0:
            raise BlockingError(f"ray {self.rid} has non-positive length")

    def sort_key(self) -> tuple:
        return (round(self.length, 12), self.path.sort_key(), self.rid)

    def reversed(self, rid: str | None = None) -> "LightRay":
        return LightRay(rid or self.rid + "~", self.target, self.source, self.length,
                        self.path.reversed(), self.space)

    def to_json(self) -> dict:
        return {"id": self.rid, "space": self.space,
                "source": _point_json(self.source), "target": _point_json(self.target),
                "length": float(self.length), "path": self.path.to_json()}


def _point_json(p: Any) -> Any:
    if hasattr(p, "to_json"):
        return p.to_json()
    if isinstance(p, Fraction):
        return str(p)
    if isinstance(p, (tuple, list)):
        return [_point_json(v) for v in p]
    return p


@dataclass(frozen=True)
class Hit:
    blocker: int
    t: float
    # position along the ray as a fraction of its length, exact when available
    frac: Fraction | float

    def to_json(self) -> dict:
        return {"blocker": self.blocker, "t": float(self.t), "frac": _point_json(self.frac)}


@dataclass(frozen=True)
class BlockingCertificate:
    blockers: tuple
    hits: dict[str, Hit]
    tolerance: float
    rays: tuple[LightRay, ...] = field(default=(), repr=False)

    @property
    def size(self) -> int:
        """Number of blockers actually used by some hit."""
        return len({h.blocker for h in self.hits.values()})

    def to_json(self, with_paths: bool = True) -> dict:
        out = {"kind": "certificate", "tolerance": self.tolerance,
               "blockers": [_point_json(b) for b in self.blockers],
               "used": self.size,
               "hits": {rid: h.to_json() for rid, h in self.hits.items()}}
        if with_paths:
            out["rays"] = [r.to_json() for r in self.rays]
        return out


@dataclass(frozen=True)
class FailureWitness:
    ray: LightRay
    blockers: tuple

    def __bool__(self) -> bool:
        return False

    def to_json(self) -> dict:
        return {"kind": "failure", "blockers": [_point_json(b) for b in self.blockers],
                "ray": self.ray.to_json()}


@dataclass(frozen=True)
class DisjointFamily:
    rays: tuple[str, ...]
    pairwise_gap: float
    exact: bool
    maximum: bool

    def __len__(self) -> int:
        return len(self.rays)

    def to_json(self) -> dict:
        return {"rays": list(self.rays), "size": len(self.rays),
                "pairwise_gap": None if math.isinf(self.pairwise_gap) else self.pairwise_gap,
                "exact": self.exact, "maximum": self.maximum}


CONSISTENT = "cross-blocked-consistent"
VIOLATED = "cross-blocked-violated"
SPHERE_CONSISTENT = "sphere-blocked-consistent"
SPHERE_VIOLATED = "sphere-blocked-violated"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class PairReport:
    x: Any
    y: Any
    horizon: float
    m_T: int
    lower_bound: int
    upper_bound: int | None
    classification: str
    distance: float
    diameter: float
    family: DisjointFamily | None = None
    continuum: bool = False

    def __post_init__(self):
        if self.upper_bound is not None and self.lower_bound > self.upper_bound:
            raise BlockingError("lower bound exceeds upper bound")

    def to_json(self) -> dict:
        return {"kind": "pair-report", "x": _point_json(self.x), "y": _point_json(self.y),
                "horizon": self.horizon, "horizon_relative": True,
                "m_T": self.m_T, "lower_bound": self.lower_bound,
                "upper_bound": "unknown" if self.upper_bound is None else self.upper_bound,
                "classification": self.classification,
                "distance": self.distance, "diameter": self.diameter,
                "continuum": self.continuum,
                "family": None if self.family is None else self.family.to_json()}


# ----------------------------------------------------------------------
# operations


def canonical_order(rays: Iterable[LightRay]) -> list[LightRay]:
    return sorted(rays, key=LightRay.sort_key)


def _check_same_space(rays: Sequence[LightRay]) -> None:
    tags = {r.space for r in rays}
    if len(tags) > 1:
        raise BlockingError(f"rays come from different spaces: {sorted(tags)}")


def interiors_disjoint(a: LightRay, b: LightRay, tol: float = 0.0) -> bool:
    if a.space != b.space:
        raise BlockingError(f"space mismatch: {a.space} vs {b.space}")
    if tol == 0 and not (a.path.exact and b.path.exact):
        raise BlockingError("tol = 0 requested on sampled paths")
    if tol < 0:
        raise BlockingError("negative tolerance")
    return not a.path.interiors_meet(b.path, tol)


def _conflict_graph(rays: Sequence[LightRay], tol: float) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(len(rays)))
    for i, j in itertools.combinations(range(len(rays)), 2):
        if not interiors_disjoint(rays[i], rays[j], tol):
            g.add_edge(i, j)
    return g


def _family_gap(rays: Sequence[LightRay]) -> float:
    gap = math.inf
    for a, b in itertools.combinations(rays, 2):
        if not a.path.exact:
            gap = min(gap, a.path.min_gap(b.path))
    return gap


def blocking_lower_bound(rays: Sequence[LightRay], exact_limit: int = 24,
                         tol: float = 0.0) -> DisjointFamily:
    """Largest family of rays with pairwise disjoint interiors.

    Exhaustive (maximum clique in the complement of the conflict graph) for
    at most ``exact_limit`` rays, greedy by length with one-for-two swaps
    otherwise.
    """
    if not rays:
        raise BlockingError("empty ray list")
    _check_same_space(rays)
    ends = {(repr(r.source), repr(r.target)) for r in rays}
    if len(ends) > 1:
        raise BlockingError("rays do not share (source, target)")
    rays = canonical_order(rays)
    if len(rays) <= exact_limit:
        conflicts = _conflict_graph(rays, tol)
        clique, _ = nx.max_weight_clique(nx.complement(conflicts), weight=None)
        chosen = sorted(clique)
        maximum = True
    else:
        chosen = _greedy_independent(rays, tol)
        maximum = False
    picked = [rays[i] for i in chosen]
    exact = all(r.path.exact for r in picked)
    return DisjointFamily(tuple(r.rid for r in picked),
                          math.inf if exact else _family_gap(picked), exact, maximum)


def _greedy_independent(rays: Sequence[LightRay], tol: float) -> list[int]:
    memo: dict[tuple[int, int], bool] = {}

    def clash(i: int, j: int) -> bool:
        key = (min(i, j), max(i, j))
        if key not in memo:
            memo[key] = not interiors_disjoint(rays[key[0]], rays[key[1]], tol)
        return memo[key]

    chosen: list[int] = []
    for v in range(len(rays)):
        if not any(clash(u, v) for u in chosen):
            chosen.append(v)
    improved = True
    while improved:
        improved = False
        # local augmentation: drop one member, add two free rays
        hits = {u: [c for c in chosen if clash(u, c)] for u in range(len(rays)) if u not in chosen}
        for v in sorted(chosen):
            free = sorted(u for u, cs in hits.items() if not cs or cs == [v])
            pair = next(((p, q) for p, q in itertools.combinations(free, 2) if not clash(p, q)), None)
            if pair is not None:
                chosen = sorted((set(chosen) - {v}) | set(pair))
                improved = True
                break
    return sorted(chosen)


def _hits_for(ray: LightRay, blockers: Sequence[Any], tol: float) -> list[tuple[int, Fraction | float]]:
    found = []
    for i, b in enumerate(blockers):
        for t in ray.path.locate(b, tol):
            found.append((i, t))
    return found


def _as_hit(ray: LightRay, index: int, t: Fraction | float) -> Hit:
    if isinstance(t, Fraction):
        # exact paths report the position as a fraction of the ray
        return Hit(index, float(t) * ray.length, t)
    return Hit(index, float(t), float(t) / ray.length)


def _best_hit(ray: LightRay, found) -> Hit | None:
    if not found:
        return None
    hits = [_as_hit(ray, i, t) for i, t in found]
    # prefer the hit nearest the midpoint, then earlier, then lower index
    return min(hits, key=lambda h: (abs(float(h.frac) - 0.5), float(h.frac), h.blocker))


def _certify(ray: LightRay, blockers: Sequence[Any], tol: float) -> Hit | None:
    probe = getattr(ray.path, "hits_at", None)
    if probe is not None:
        # exact paths: a midpoint hit is always the preferred one
        half = Fraction(1, 2)
        for i, b in enumerate(blockers):
            if probe(b, half):
                return _as_hit(ray, i, half)
    return _best_hit(ray, _hits_for(ray, blockers, tol))


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def verify_blocking(blockers: Sequence[Any], rays: Sequence[LightRay], tol: float = 0.0,
                    workers: int = 1) -> BlockingCertificate | FailureWitness:
    if not rays:
        raise BlockingError("no rays to verify")
    _check_same_space(rays)
    if tol == 0 and not all(r.path.exact for r in rays):
        raise BlockingError("tol = 0 requested on sampled paths")
    if len({r.rid for r in rays}) != len(rays):
        raise BlockingError("duplicate ray ids")
    rays = canonical_order(rays)
    blockers = tuple(blockers)
    results = _map(lambda r: _certify(r, blockers, tol), rays, workers)
    hits: dict[str, Hit] = {}
    for ray, hit in zip(rays, results):
        if hit is None:
            return FailureWitness(ray, blockers)
        hits[ray.rid] = hit
    return BlockingCertificate(blockers, hits, tol, tuple(rays))


def replay(cert: BlockingCertificate) -> bool:
    """Re-check every recorded hit of a certificate against its rays."""
    by_id = {r.rid: r for r in cert.rays}
    if set(by_id) != set(cert.hits):
        return False
    for rid, hit in cert.hits.items():
        ray = by_id[rid]
        if not 0 < hit.t < ray.length:
            return False
        located = ray.path.locate(cert.blockers[hit.blocker], cert.tolerance)
        if isinstance(hit.frac, Fraction):
            if hit.frac not in located:
                return False
        elif not any(abs(t - hit.t) <= max(cert.tolerance, 1e-9) * 10 for t in located):
            return False
    return True


def min_blockers(rays: Sequence[LightRay], candidates: Sequence[Any],
                 tol: float = 0.0) -> tuple[int, list]:
    """Exact minimum hitting set over a candidate pool.

    Branch and bound over candidates in pool order (include before exclude),
    pruned by a greedy disjoint-ray lower bound. Among minimum sets the one
    that is lexicographically first in candidate order is returned.
    """
    if not rays:
        return 0, []
    _check_same_space(rays)
    rays = canonical_order(rays)
    covers = []  # covers[c] = bitmask of rays hit by candidate c
    hit_by = []  # hit_by[r] = bitmask of candidates hitting ray r
    for c in candidates:
        mask = 0
        for k, ray in enumerate(rays):
            if ray.path.locate(c, tol):
                mask |= 1 << k
        covers.append(mask)
    for k, ray in enumerate(rays):
        m = 0
        for c, mask in enumerate(covers):
            if mask >> k & 1:
                m |= 1 << c
        if m == 0:
            raise CandidatePoolError(ray)
        hit_by.append(m)

    n_c = len(candidates)
    full = (1 << len(rays)) - 1
    greedy = _greedy_cover(covers, full)
    # one above greedy so that an equally small, lexicographically earlier set wins
    best_size = len(greedy) + 1
    best: list[int] | None = None

    def lower(uncovered: int, allowed: int) -> int:
        # rays pairwise sharing no allowed candidate need distinct blockers
        used = 0
        count = 0
        rest = uncovered
        while rest:
            k = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            cands = hit_by[k] & allowed
            if cands & used == 0:
                used |= cands
                count += 1
        return count

    def search(i: int, chosen: list[int], uncovered: int, allowed: int) -> None:
        nonlocal best, best_size
        if uncovered == 0:
            if len(chosen) < best_size:
                best, best_size = list(chosen), len(chosen)
            return
        if i >= n_c or len(chosen) + lower(uncovered, allowed) >= best_size:
            return
        if covers[i] & uncovered:
            chosen.append(i)
            search(i + 1, chosen, uncovered & ~covers[i], allowed)
            chosen.pop()
        rest_allowed = allowed & ~(1 << i)
        # excluding i is only viable if every uncovered ray keeps a candidate
        r = uncovered
        while r:
            k = (r & -r).bit_length() - 1
            r &= r - 1
            if hit_by[k] & rest_allowed == 0:
                return
        search(i + 1, chosen, uncovered, rest_allowed)

    search(0, [], full, (1 << n_c) - 1)
    assert best is not None
    return len(best), [candidates[i] for i in best]


def _greedy_cover(covers: list[int], full: int) -> list[int]:
    uncovered = full
    chosen = []
    while uncovered:
        i = max(range(len(covers)), key=lambda c: (bin(covers[c] & uncovered).count("1"), -c))
        chosen.append(i)
        uncovered &= ~covers[i]
    return sorted(chosen)


class Space(Protocol):
    tag: str

    def enumerate_light(self, x: Any, y: Any, T: float) -> list[LightRay]: ...

    def distance(self, x: Any, y: Any) -> float: ...

    def diameter(self) -> float: ...


def classify_pair(space: Space, x: Any, y: Any, T: float, tol: float = 0.0,
                  exact_limit: int = 24, rays: Sequence[LightRay] | None = None,
                  blockers: Sequence[Any] | None = None) -> PairReport:
    """Cross-blocking (x != y) or sphere-blocking (x == y) report at horizon T.

    Conclusions are relative to the enumerated horizon. ``blockers``, when
    given and verified, supplies the finite upper bound.
    """
    if rays is None:
        rays = space.enumerate_light(x, y, T)
    continuum = bool(getattr(rays, "continuum", False))
    rays = list(rays)
    same = space.same_point(x, y) if hasattr(space, "same_point") else x == y
    d = 0.0 if same else space.distance(x, y)
    diam = space.diameter()
    if not rays:
        return PairReport(x, y, T, 0, 0, 0, INDETERMINATE, d, diam, None, continuum)
    family = blocking_lower_bound(rays, exact_limit, tol)
    lower = len(family)
    upper = None
    if blockers is not None:
        cert = verify_blocking(blockers, rays, tol)
        if cert:
            upper = cert.size
    if same:
        label = SPHERE_VIOLATED if lower >= 2 else SPHERE_CONSISTENT
    elif 0 < d < diam - tol:
        label = VIOLATED if lower >= 3 else CONSISTENT
    else:
        label = INDETERMINATE
    return PairReport(x, y, T, len(rays), lower, upper, label, d, diam, family, continuum)
