"""Reflection groups of a box and the types of midpoints.

The chamber is the box ``prod [0, side_i]``. Reflecting in its facets
generates a product of infinite dihedral groups; the translations by
``2 * side_i`` form a finite-index subgroup of index ``m = 2^r``. The type of
a point is its image under the folding map, which per axis is a triangle
wave onto ``[0, side_i]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import BlockingCertificate, LightRay, verify_blocking
from .torus import Vec, rational, rational_vector


class WindowError(ValueError):
    """The search window is too small for the requested computation."""


def fold_axis(p: Fraction, side: Fraction) -> Fraction:
    t = p % (2 * side)
    return 2 * side - t if t > side else t


@dataclass(frozen=True)
class TypedPoint:
    position: Vec
    type: Vec

    def to_json(self) -> dict:
        return {"position": [str(c) for c in self.position], "type": [str(c) for c in self.type]}


@dataclass(frozen=True, eq=False)
class ApartmentSegment:
    group: "ApartmentGroup"
    start: Vec
    disp: Vec
    exact = True

    @property
    def end(self) -> Vec:
        return tuple(a + d for a, d in zip(self.start, self.disp))

    def _type(self, point) -> Vec:
        return point.type if isinstance(point, TypedPoint) else tuple(point)

    def hits_at(self, point, frac: Fraction) -> bool:
        pos = tuple(a + frac * d for a, d in zip(self.start, self.disp))
        return self.group.fold(pos) == self._type(point)

    def locate(self, point, tol: float = 0.0) -> list[Fraction]:
        """Fractions s in (0, 1) where the segment passes a point of the given type."""
        target = self._type(point)
        found: set[Fraction] | None = None
        for a, d, b, side in zip(self.start, self.disp, target, self.group.sides):
            if d == 0:
                if fold_axis(a, side) != b:
                    return []
                continue
            # a + s d = ±b + 2k side
            ss = set()
            for sign in (1, -1):
                lo, hi = sorted((a - sign * b, a + d - sign * b))
                for k in range(math.floor(lo / (2 * side)), math.ceil(hi / (2 * side)) + 1):
                    s = (sign * b + 2 * k * side - a) / d
                    if 0 < s < 1:
                        ss.add(s)
            found = ss if found is None else found & ss
            if not found:
                return []
        if found is None:  # zero displacement never happens for emitted rays
            return []
        return sorted(found)

    def interiors_meet(self, other, tol: float = 0.0) -> bool:
        raise NotImplementedError("apartment segments are only used for midpoint checks")

    def reversed(self) -> "ApartmentSegment":
        return ApartmentSegment(self.group, self.end, tuple(-d for d in self.disp))

    def sort_key(self) -> tuple:
        return (sum(d * d for d in self.disp), self.disp)

    def to_json(self) -> dict:
        return {"kind": "apartment-segment", "start": [str(c) for c in self.start],
                "end": [str(c) for c in self.end]}


@dataclass(frozen=True, eq=False)
class ApartmentGroup:
    sides: Vec
    tag: str = "apartment"

    def __post_init__(self):
        sides = rational_vector(self.sides)
        if not sides or any(s <= 0 for s in sides):
            raise ValueError("box sides must be positive rationals")
        object.__setattr__(self, "sides", sides)

    @property
    def rank(self) -> int:
        return len(self.sides)

    @property
    def index(self) -> int:
        """[Λ : Λ'] for the translation subgroup by twice the sides."""
        return 2 ** self.rank

    @property
    def type_bound(self) -> int:
        return 2 ** self.rank * self.index ** 2

    def fold(self, position) -> Vec:
        position = tuple(rational(p) if not isinstance(p, Fraction) else p for p in position)
        return tuple(fold_axis(p, s) for p, s in zip(position, self.sides))

    def typed(self, position) -> TypedPoint:
        position = rational_vector(position)
        return TypedPoint(position, self.fold(position))

    def reflect(self, position: Vec, axis: int, facet: int) -> Vec:
        """Reflection in the facet x_axis = facet * side (facet 0 or 1)."""
        wall = facet * self.sides[axis]
        out = list(position)
        out[axis] = 2 * wall - out[axis]
        return tuple(out)

    def in_chamber(self, t: Vec) -> bool:
        return len(t) == self.rank and all(0 <= c <= s for c, s in zip(t, self.sides))

    def default_window(self, periods: int = 2) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(0), 2 * periods * s) for s in self.sides]

    def orbit_points(self, t, window: Sequence[tuple]) -> list[Vec]:
        t = rational_vector(t)
        if not self.in_chamber(t):
            raise ValueError(f"type {t} is not in the chamber")
        axes = []
        for c, s, (lo, hi) in zip(t, self.sides, window):
            lo, hi = Fraction(lo), Fraction(hi)
            pts = set()
            for sign in (1, -1):
                for k in range(math.floor((lo - sign * c) / (2 * s)), math.ceil((hi - sign * c) / (2 * s)) + 1):
                    p = sign * c + 2 * k * s
                    if lo <= p <= hi:
                        pts.add(p)
            axes.append(sorted(pts))
        return [tuple(p) for p in itertools.product(*axes)]

    def _midpoint_types(self, x_type: Vec, y_type: Vec, window) -> set[Vec]:
        xs = self.orbit_points(x_type, window)
        ys = self.orbit_points(y_type, window)
        return {self.fold(tuple((a + b) / 2 for a, b in zip(p, q))) for p in xs for q in ys}

    def midpoint_types(self, x_type, y_type, window=None) -> list[Vec]:
        """Types of all midpoints between the orbits of two types.

        Completeness is certified by saturation: enlarging the window by one
        translation period per axis must not add a type.
        """
        x_type, y_type = rational_vector(x_type), rational_vector(y_type)
        if window is None:
            window = self.default_window()
        window = [(Fraction(lo), Fraction(hi)) for lo, hi in window]
        for (lo, hi), s in zip(window, self.sides):
            if hi - lo < 4 * s:
                raise WindowError("window must span two translation periods per axis")
        found = self._midpoint_types(x_type, y_type, window)
        bigger = [(lo, hi + 2 * s) for (lo, hi), s in zip(window, self.sides)]
        if self._midpoint_types(x_type, y_type, bigger) != found:
            raise WindowError("midpoint types not saturated in the window")
        return sorted(found)

    def verify_apartment_blocking(self, x: TypedPoint, y: TypedPoint, T,
                                  window=None) -> BlockingCertificate:
        """Check that every midpoint x̄ -> q, q of y's type, has a listed type."""
        T = Fraction(T)
        if window is None:
            window = [(a - Fraction(math.ceil(T)), a + Fraction(math.ceil(T))) for a in x.position]
        window = [(Fraction(lo), Fraction(hi)) for lo, hi in window]
        if any(lo > a - T or hi < a + T for a, (lo, hi) in zip(x.position, window)):
            raise WindowError("window does not contain the ball of radius T around x")
        types = self.midpoint_types(x.type, y.type)
        rays = []
        T2 = T * T
        for q in self.orbit_points(y.type, window):
            d = tuple(b - a for a, b in zip(x.position, q))
            l2 = sum(c * c for c in d)
            if 0 < l2 <= T2:
                rid = "a[" + ",".join(str(c) for c in q) + "]"
                rays.append(LightRay(rid, x, TypedPoint(q, y.type), math.sqrt(l2),
                                     ApartmentSegment(self, x.position, d), self.tag))
        blockers = tuple(types)
        if not rays:
            return BlockingCertificate(blockers, {}, 0.0, ())
        cert = verify_blocking(blockers, rays, 0.0)
        if not cert:
            raise AssertionError(f"midpoint of {cert.ray.rid} has an unlisted type")
        return cert

    def to_json(self) -> dict:
        return {"space": "apartment", "rank": self.rank, "sides": [str(s) for s in self.sides]}
