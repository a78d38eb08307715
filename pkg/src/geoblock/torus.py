"""Flat tori R^n / Λ with exact rational arithmetic.

Lattice generators are the rows of ``basis``. Points are stored as the
cartesian coordinates of their representative in the half-open fundamental
parallelepiped. All membership questions (does a segment pass through a
lift of x, does a blocker sit on a ray) are decided over the rationals.

A segment x̄ → x̄ + v with v = ȳ − x̄ + λ is a light ray iff, writing v in
lattice coordinates as u / D with u integral and D a common denominator of
ȳ − x̄, we have gcd(u) <= D. Both "passes through a lift of x" and "passes
through a lift of y" reduce to gcd(u) > D.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

from .core import LightRay

Vec = tuple[Fraction, ...]


def rational(value) -> Fraction:
    """Parse an exact rational: int, Fraction, or a string like "3/2" or "0.25"."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"{value!r} is not an exact rational (floats are rejected)")


def rational_vector(values) -> Vec:
    if isinstance(values, str):
        values = values.split(",")
    return tuple(rational(v) for v in values)


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def _det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(m)
    a = [list(r) for r in m]
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def _inverse(m: Sequence[Sequence[Fraction]]) -> tuple[Vec, ...]:
    n = len(m)
    a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        p = a[c][c]
        a[c] = [x / p for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return tuple(tuple(r[n:]) for r in a)


def _dot(u, v) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def _vecmat(v, m) -> Vec:
    return tuple(sum((v[i] * m[i][j] for i in range(len(v))), Fraction(0))
                 for j in range(len(m[0])))


def _reduce_basis(rows: list[Vec]) -> tuple[list[Vec], list[list[int]]]:
    """Lagrange reduction in rank 2, pairwise size reduction otherwise.

    Returns the reduced rows and the unimodular matrix U with reduced = U·basis.
    """
    n = len(rows)
    b = [list(r) for r in rows]
    u = [[int(i == j) for j in range(n)] for i in range(n)]
    changed = True
    while changed:
        changed = False
        for i, j in itertools.permutations(range(n), 2):
            nj = _dot(b[j], b[j])
            q = round(_dot(b[i], b[j]) / nj)
            if q == 0:
                continue
            cand = [x - q * y for x, y in zip(b[i], b[j])]
            if _dot(cand, cand) < _dot(b[i], b[i]):
                b[i] = cand
                u[i] = [x - q * y for x, y in zip(u[i], u[j])]
                changed = True
    order = sorted(range(n), key=lambda i: (_dot(b[i], b[i]), i))
    return [tuple(b[i]) for i in order], [u[i] for i in order]


@dataclass(frozen=True)
class TorusPoint:
    coords: Vec

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash(self.coords)
            object.__setattr__(self, "_hash", h)
        return h

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coords]

    def __repr__(self) -> str:
        return "TorusPoint(" + ",".join(str(c) for c in self.coords) + ")"


def _affine_hits(base: Vec, direction: Vec, lo: Fraction, hi: Fraction) -> list[Fraction]:
    """All μ in the open interval (lo, hi) with base + μ·direction integral."""
    nz = [i for i, d in enumerate(direction) if d != 0]
    if not nz:
        return []
    den = _lcm(v.denominator for v in (*base, *direction))
    B = [int(v * den) for v in base]
    W = [int(v * den) for v in direction]
    i = min(nz, key=lambda k: (abs(W[k]), k))
    wi = W[i]
    # μ = (den·k − B_i) / W_i with k integral; k ranges so that μ ∈ (lo, hi)
    ends = sorted(((lo * wi + B[i]) / den, (hi * wi + B[i]) / den))
    k0 = math.floor(ends[0]) + 1
    k1 = math.ceil(ends[1]) - 1
    out = []
    for k in range(k0, k1 + 1):
        num = den * k - B[i]
        # base_j + μ W_j/den must be an integer: (B_j·W_i + num·W_j) ≡ 0 mod den·W_i
        if all((B[j] * wi + num * W[j]) % (den * wi) == 0 for j in range(len(W)) if j != i):
            out.append(Fraction(num, wi))
    return sorted(out)


@dataclass(frozen=True, eq=False)
class ExactSegment:
    """Straight segment in the plane cover, kept in lattice coordinates."""

    torus: "TorusSpace"
    lat_start: Vec
    lat_disp: Vec
    exact = True

    @property
    def _lat(self) -> tuple[Vec, Vec]:
        return self.lat_start, self.lat_disp

    @cached_property
    def start(self) -> Vec:
        return self.torus.cartesian(self.lat_start)

    @cached_property
    def disp(self) -> Vec:
        return self.torus.cartesian(self.lat_disp)

    @cached_property
    def length_sq(self) -> Fraction:
        return _dot(self.disp, self.disp)

    @property
    def end(self) -> Vec:
        return tuple(a + b for a, b in zip(self.start, self.disp))

    def locate(self, point: TorusPoint, tol: float = 0.0) -> list[Fraction]:
        """Fractions s in (0, 1) with start + s·disp ≡ point (mod Λ)."""
        a, w = self._lat
        beta = self.torus.point_lattice(point)
        return _affine_hits(tuple(p - q for p, q in zip(a, beta)), w, Fraction(0), Fraction(1))

    @cached_property
    def _scaled(self) -> tuple[int, list[int], list[int]]:
        den = _lcm(v.denominator for v in (*self.lat_start, *self.lat_disp))
        return den, [int(v * den) for v in self.lat_start], [int(v * den) for v in self.lat_disp]

    def hits_at(self, point: TorusPoint, frac: Fraction) -> bool:
        """Whether start + frac·disp ≡ point (mod Λ), in integer arithmetic."""
        den, A, W = self._scaled
        bd, bn = self.torus.point_scaled(point)
        p, q = frac.numerator, frac.denominator
        M = _lcm((q * den, bd))
        f, g = M // (q * den), M // bd
        return all(((a * q + p * w) * f - b * g) % M == 0 for a, w, b in zip(A, W, bn))

    def interiors_meet(self, other: "ExactSegment", tol: float = 0.0) -> bool:
        a, v = self._lat
        b, w = other._lat
        c = tuple(p - q for p, q in zip(a, b))
        n = len(v)
        # s·v − t·w ≡ −c (mod Z^n) for s, t in (0, 1)
        pivots = next(((i, j) for i, j in itertools.combinations(range(n), 2)
                       if v[i] * w[j] - v[j] * w[i] != 0), None)
        if pivots is None:
            # parallel: w = α v, so s − α t sweeps an open interval
            k = next(i for i in range(n) if v[i] != 0)
            alpha = w[k] / v[k]
            lo, hi = (-alpha, Fraction(1)) if alpha > 0 else (Fraction(0), 1 - alpha)
            return bool(_affine_hits(c, v, lo, hi))
        i, j = pivots
        det = v[i] * w[j] - v[j] * w[i]

        def span(k):
            lo = c[k] + min(0, v[k]) - max(0, w[k])
            hi = c[k] + max(0, v[k]) - min(0, w[k])
            return range(math.floor(lo), math.ceil(hi) + 1)

        for ki in span(i):
            for kj in span(j):
                ri, rj = ki - c[i], kj - c[j]
                # s v_k − t w_k = r_k for k = i, j
                s = (ri * (-w[j]) - rj * (-w[i])) / (-det)
                t = (v[i] * rj - v[j] * ri) / (-det)
                if not (0 < s < 1 and 0 < t < 1):
                    continue
                if all((c[k] + s * v[k] - t * w[k]).denominator == 1 for k in range(n)):
                    return True
        return False

    @property
    def length(self) -> float:
        return math.sqrt(self.length_sq)

    def ray_id(self) -> str:
        return "t[" + ",".join(str(v) for v in self.lat_disp) + "]"

    def sub(self, a: Fraction, b: Fraction) -> "ExactSegment":
        """The piece between fractions a < b, started at its canonical lift."""
        start = tuple(s + a * w for s, w in zip(*self._lat))
        start = tuple(c - math.floor(c) for c in start)
        return ExactSegment(self.torus, start, tuple((b - a) * w for w in self.lat_disp))

    def light_part(self, x: TorusPoint, y: TorusPoint) -> "ExactSegment":
        """Restriction from the last visit of x to the next visit of y.

        For a segment from x to y with displacement u/D, g = gcd(u), the
        start recurs at s = k D / g and the end at 1 - k D / g, so the last
        return to x is at k = ceil(g / D) - 1 and y is next met at s = 1.
        """
        if self.torus.point_lattice(x) != self.lat_start:
            raise ValueError("segment does not start at x")
        den = _lcm(v.denominator for v in self.lat_disp)
        g = reduce(math.gcd, (abs(int(v * den)) for v in self.lat_disp), 0)
        k = (g - 1) // den
        return self.sub(Fraction(k * den, g), Fraction(1)) if k else self

    def reversed(self) -> "ExactSegment":
        end = tuple(a + b for a, b in zip(*self._lat))
        start = tuple(c - math.floor(c) for c in end)
        return ExactSegment(self.torus, start, tuple(-d for d in self.lat_disp))

    def sort_key(self) -> tuple:
        return (self.lat_disp,)

    def to_json(self) -> dict:
        return {"kind": "exact-segment",
                "start": [str(c) for c in self.start],
                "end": [str(c) for c in self.end],
                "length_sq": str(self.length_sq)}


def _floor_bound(value: Fraction, dtype):
    # q <= value  <=>  q <= floor(value) for integral q
    b = math.floor(value)
    return min(b, 2 ** 62) if dtype != object else b


@dataclass(frozen=True)
class BallCensus:
    """Lattice vectors v = ȳ − x̄ + λ in a closed ball, in integer form.

    ``u`` holds D·(lattice coordinates of v) per row, ``q`` holds
    D²·E·|v|² (E the Gram denominator), ``light`` the light-ray mask.
    """

    u: np.ndarray
    D: int
    scale: int
    q: np.ndarray
    light: np.ndarray

    def lengths(self) -> np.ndarray:
        return np.sqrt(self.q.astype(float) / float(self.scale))


@dataclass(frozen=True, eq=False)
class TorusSpace:
    basis: tuple[Vec, ...]
    tag: str = "torus"

    def __post_init__(self):
        rows = tuple(rational_vector(r) for r in self.basis)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("basis must be a square matrix")
        if _det(rows) == 0:
            raise ValueError("basis rows are linearly dependent")
        object.__setattr__(self, "basis", rows)

    @classmethod
    def unit(cls, n: int = 2) -> "TorusSpace":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)))

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @cached_property
    def _inv(self) -> tuple[Vec, ...]:
        return _inverse(self.basis)

    @cached_property
    def reduced(self) -> tuple[tuple[Vec, ...], tuple[tuple[int, ...], ...]]:
        rows, u = _reduce_basis(list(self.basis))
        return tuple(rows), tuple(tuple(r) for r in u)

    def lattice_coords(self, cart: Sequence[Fraction]) -> Vec:
        return _vecmat(tuple(cart), self._inv)

    @lru_cache(maxsize=1 << 16)
    def point_lattice(self, point: TorusPoint) -> Vec:
        return self.lattice_coords(point.coords)

    @lru_cache(maxsize=1 << 16)
    def point_scaled(self, point: TorusPoint) -> tuple[int, list[int]]:
        lat = self.point_lattice(point)
        d = _lcm(v.denominator for v in lat)
        return d, [int(v * d) for v in lat]

    def cartesian(self, lat: Sequence[Fraction]) -> Vec:
        return _vecmat(tuple(lat), self.basis)

    def point(self, coords) -> TorusPoint:
        lat = self.lattice_coords(rational_vector(coords))
        frac = tuple(c - math.floor(c) for c in lat)
        return TorusPoint(self.cartesian(frac))

    def same_point(self, x: TorusPoint, y: TorusPoint) -> bool:
        return self.point(x.coords) == self.point(y.coords)

    # -- lattice invariants

    @cached_property
    def shortest_sq(self) -> Fraction:
        rows, _ = self.reduced
        bound = min(_dot(r, r) for r in rows)
        census = self._ball((Fraction(0),) * self.dimension, math.sqrt(bound) * (1 + 1e-12) + 1e-12)
        return Fraction(int(census.q.min()), census.scale)

    @property
    def shortest_vector_length(self) -> float:
        return math.sqrt(self.shortest_sq)

    @property
    def injectivity_radius(self) -> float:
        return self.shortest_vector_length / 2

    @cached_property
    def _covering_radius(self) -> float:
        rows, _ = self.reduced
        R = np.array([[float(c) for c in r] for r in rows])
        n = self.dimension
        if n == 1:
            return abs(R[0, 0]) / 2
        from scipy.spatial import Voronoi
        ks = np.array(list(itertools.product(range(-2, 3), repeat=n)), dtype=float)
        pts = ks @ R
        vor = Voronoi(pts)
        origin = int(np.flatnonzero(np.all(ks == 0, axis=1))[0])
        region = vor.regions[vor.point_region[origin]]
        return float(max(np.linalg.norm(vor.vertices[region], axis=1)))

    def diameter(self) -> float:
        """Covering radius of the lattice (float)."""
        return self._covering_radius

    def distance(self, x: TorusPoint, y: TorusPoint) -> float:
        if self.same_point(x, y):
            return 0.0
        census = self._ball(self._offset(x, y), self.diameter() * (1 + 1e-9) + 1e-9)
        return math.sqrt(Fraction(int(census.q.min()), census.scale))

    # -- enumeration

    def _offset(self, x: TorusPoint, y: TorusPoint) -> Vec:
        return tuple(b - a for a, b in zip(self.point(x.coords).coords, self.point(y.coords).coords))

    def _ball(self, offset: Vec, T) -> BallCensus:
        """Vectors offset + λ, λ ∈ Λ, with 0 < |offset + λ| <= T."""
        n = self.dimension
        rows, U = self.reduced
        inv_r = _inverse(rows)
        c = _vecmat(offset, inv_r)  # lattice coordinates w.r.t. the reduced basis
        D = _lcm(v.denominator for v in c)
        p = [int(v * D) for v in c]
        gram = [[_dot(rows[i], rows[j]) for j in range(n)] for i in range(n)]
        E = _lcm(g.denominator for row in gram for g in row)
        Q = [[int(g * E) for g in row] for row in gram]
        T = Fraction(T) if not isinstance(T, Fraction) else T
        T2 = T * T
        # |v_i| <= T · |column i of the inverse| bounds the box
        dual = [math.sqrt(sum(float(inv_r[k][i]) ** 2 for k in range(n))) for i in range(n)]
        ranges = []
        for i in range(n):
            r = float(T) * dual[i] + 1
            ranges.append(np.arange(math.floor(-float(c[i]) - r), math.ceil(-float(c[i]) + r) + 1))
        ks = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, n)
        big = max(abs(int(k)) for k in ks.ravel()) * D + max(abs(v) for v in p) + 1
        qmax = max(abs(x) for row in Q for x in row)
        dtype = np.int64 if n * n * qmax * big * big < 2 ** 62 else object
        u = ks.astype(dtype) * D + np.array(p, dtype=dtype)
        q = np.einsum("ki,ij,kj->k", u, np.array(Q, dtype=dtype), u)
        scale = D * D * E
        keep = (q <= _floor_bound(scale * T2, dtype)) & np.any(u != 0, axis=1)
        u, q = u[keep], q[keep]
        # back to coordinates in the original basis: v_red · R = v_orig · B, R = U·B
        Um = np.array(U, dtype=dtype)
        u_orig = u @ Um
        if dtype is object:
            g = np.array([reduce(math.gcd, (int(a) for a in row), 0) for row in u_orig], dtype=object)
        else:
            g = np.gcd.reduce(np.abs(u_orig), axis=1)
        light = g <= D
        order = np.lexsort(tuple(u_orig[:, k] for k in reversed(range(n))) + (q,))
        return BallCensus(u_orig[order], D, scale, q[order], light[order])

    def _rays(self, x: TorusPoint, y: TorusPoint, T, light_only: bool) -> list[LightRay]:
        x, y = self.point(x.coords), self.point(y.coords)
        census = self._ball(self._offset(x, y), T)
        start = self.point_lattice(x)
        s_den, s_num = self.point_scaled(x)
        den = _lcm((s_den, census.D))
        A = [a * (den // s_den) for a in s_num]
        rays = []
        for row, q, ok in zip(census.u, census.q, census.light):
            if light_only and not ok:
                continue
            lat = tuple(Fraction(int(a), census.D) for a in row)
            rid = "t[" + ",".join(str(v) for v in lat) + "]"
            length = math.sqrt(Fraction(int(q), census.scale))
            seg = ExactSegment(self, start, lat)
            # prime the integer form used by the midpoint test
            seg.__dict__["_scaled"] = (den, A, [int(a) * (den // census.D) for a in row])
            rays.append(LightRay(rid, x, y, length, seg, self.tag))
        return rays

    def enumerate_geodesics(self, x: TorusPoint, y: TorusPoint, T) -> list[LightRay]:
        if not T > 0:
            raise ValueError("horizon must be positive")
        return self._rays(x, y, T, light_only=False)

    def enumerate_light(self, x: TorusPoint, y: TorusPoint, T) -> list[LightRay]:
        if not T > 0:
            raise ValueError("horizon must be positive")
        return self._rays(x, y, T, light_only=True)

    def counts(self, x: TorusPoint, y: TorusPoint, T) -> tuple[int, int]:
        census = self._ball(self._offset(self.point(x.coords), self.point(y.coords)), T)
        return len(census.q), int(np.count_nonzero(census.light))

    def midpoint_blocking_set(self, x: TorusPoint, y: TorusPoint) -> list[TorusPoint]:
        """The 2^n points (x̄ + ȳ + λ)/2, λ over coset representatives of Λ/2Λ."""
        x, y = self.point(x.coords), self.point(y.coords)
        out = []
        for bits in itertools.product((0, 1), repeat=self.dimension):
            lam = self.cartesian(tuple(Fraction(b) for b in reversed(bits)))
            out.append(self.point(tuple((a + b + l) / 2 for a, b, l in zip(x.coords, y.coords, lam))))
        return out

    def growth_series(self, x: TorusPoint, y: TorusPoint, T_max, step) -> list[tuple[float, int, int]]:
        if not 0 < step <= T_max:
            raise ValueError("need 0 < step <= T_max")
        census = self._ball(self._offset(self.point(x.coords), self.point(y.coords)), T_max)
        light = census.light.astype(bool)
        out = []
        k = 1
        while k * step <= T_max * (1 + 1e-12):
            T = k * step
            inside = census.q <= _floor_bound(census.scale * Fraction(T) ** 2, census.q.dtype)
            out.append((T, int(np.count_nonzero(inside)), int(np.count_nonzero(inside & light))))
            k += 1
        return out

    def to_json(self) -> dict:
        return {"space": "torus", "dimension": self.dimension,
                "basis": [[str(c) for c in r] for r in self.basis]}
