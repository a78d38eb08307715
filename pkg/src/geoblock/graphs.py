"""Finite graphs as quotients of their universal-cover trees.

Every edge has length 1. Edge ``e = (u, v)`` gives two directed edges,
``2e`` (u -> v) and ``2e + 1`` (v -> u); reversing a directed edge flips the
low bit. Geodesics of the quotient are projections of tree geodesics, i.e.
non-backtracking walks, possibly starting and ending part way along an edge.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .apartment import ApartmentGroup
from .core import LightRay
from .torus import rational


class GraphError(ValueError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"power iteration did not converge after {iterations} iterations "
                         f"(relative change {residual:.3g})")
        self.iterations = iterations


@dataclass(frozen=True)
class GraphPoint:
    vertex: int | None = None
    edge: int | None = None
    offset: Fraction | None = None

    def to_json(self):
        if self.vertex is not None:
            return {"vertex": self.vertex}
        return {"edge": self.edge, "offset": str(self.offset)}

    def __repr__(self) -> str:
        if self.vertex is not None:
            return f"v{self.vertex}"
        return f"e{self.edge}@{self.offset}"


# a piece traverses directed edge ``d`` from parameter s0 to s1 (0 <= s0 < s1 <= 1)
Piece = tuple[int, Fraction, Fraction]


@dataclass(frozen=True, eq=False)
class GraphPath:
    graph: "QuotientGraph"
    pieces: tuple[Piece, ...]
    exact = True

    @cached_property
    def length_exact(self) -> Fraction:
        return sum((s1 - s0 for _, s0, s1 in self.pieces), Fraction(0))

    @property
    def length(self) -> float:
        return float(self.length_exact)

    def ray_id(self) -> str:
        return _ray_id(self.pieces)

    def _offset(self, d: int, s: Fraction) -> Fraction:
        return s if d % 2 == 0 else 1 - s

    @cached_property
    def junctions(self) -> list[tuple[Fraction, int]]:
        """(arc length, vertex) of every vertex strictly inside the path."""
        out = []
        arc = Fraction(0)
        for d, s0, s1 in self.pieces[:-1]:
            arc += s1 - s0
            out.append((arc, self.graph.head(d)))
        return out

    @cached_property
    def start_point(self) -> GraphPoint:
        d, s0, _ = self.pieces[0]
        return self.graph.point_on(d, s0)

    @cached_property
    def end_point(self) -> GraphPoint:
        d, _, s1 = self.pieces[-1]
        return self.graph.point_on(d, s1)

    def _passes(self, point: GraphPoint) -> list[Fraction]:
        """Arc lengths where the path is at ``point``, ends included."""
        out = []
        arc = Fraction(0)
        for k, (d, s0, s1) in enumerate(self.pieces):
            if point.vertex is None and d // 2 == point.edge:
                p = self._offset(d, point.offset)
                if s0 <= p <= s1:
                    out.append(arc + p - s0)
            elif point.vertex is not None:
                if k == 0 and s0 == 0 and self.graph.tail(d) == point.vertex:
                    out.append(arc)
                if s1 == 1 and self.graph.head(d) == point.vertex:
                    out.append(arc + 1 - s0)
            arc += s1 - s0
        return sorted(set(out))

    def locate(self, point: GraphPoint, tol: float = 0.0) -> list[Fraction]:
        """Fractions of the length at which the path passes ``point`` in its interior."""
        L = self.length_exact
        return [a / L for a in self._passes(point) if 0 < a < L]

    def hits_at(self, point: GraphPoint, frac: Fraction) -> bool:
        return frac in self.locate(point)

    @cached_property
    def _interior(self) -> tuple[frozenset, dict]:
        verts = frozenset(v for _, v in self.junctions)
        spans: dict[int, list[tuple[Fraction, Fraction]]] = {}
        for d, s0, s1 in self.pieces:
            lo, hi = sorted((self._offset(d, s0), self._offset(d, s1)))
            spans.setdefault(d // 2, []).append((lo, hi))
        return verts, spans

    def interiors_meet(self, other: "GraphPath", tol: float = 0.0) -> bool:
        va, sa = self._interior
        vb, sb = other._interior
        if va & vb:
            return True
        for e in sa.keys() & sb.keys():
            for (a0, a1), (b0, b1) in itertools.product(sa[e], sb[e]):
                if max(a0, b0) < min(a1, b1):
                    return True
        return False

    def reversed(self) -> "GraphPath":
        return GraphPath(self.graph, tuple((d ^ 1, 1 - s1, 1 - s0) for d, s0, s1 in reversed(self.pieces)))

    def light_part(self, x: GraphPoint, y: GraphPoint) -> "GraphPath":
        """Restriction from the last visit of x to the next visit of y."""
        L = self.length_exact
        t1 = max(a for a in self._passes(x) if a < L)
        t2 = min(a for a in self._passes(y) if a > t1)
        return self.sub(t1, t2)

    def sub(self, a: Fraction, b: Fraction) -> "GraphPath":
        out = []
        arc = Fraction(0)
        for d, s0, s1 in self.pieces:
            lo, hi = arc, arc + s1 - s0
            c0, c1 = max(lo, a), min(hi, b)
            if c0 < c1:
                out.append((d, s0 + c0 - lo, s0 + c1 - lo))
            arc = hi
        return GraphPath(self.graph, tuple(out))

    def key(self) -> tuple:
        return self.pieces

    def sort_key(self) -> tuple:
        return tuple((d, s0, s1) for d, s0, s1 in self.pieces)

    def points(self) -> list[GraphPoint]:
        return [self.start_point, *(GraphPoint(vertex=v) for _, v in self.junctions), self.end_point]

    def to_json(self) -> dict:
        return {"kind": "graph-walk",
                "pieces": [[d, str(s0), str(s1)] for d, s0, s1 in self.pieces],
                "points": [p.to_json() for p in self.points()],
                "length": str(self.length_exact)}


def _ray_id(pieces) -> str:
    ds = ",".join(str(d) for d, _, _ in pieces)
    return f"g[{pieces[0][1]}|{ds}|{pieces[-1][2]}]"


@dataclass(frozen=True)
class MidpointCensus:
    """Light rays up to a horizon, tallied by the blocker at their midpoint."""

    horizon: Fraction
    rays: int
    hits: tuple[int, ...]
    unblocked: int
    witness: str | None = None

    @property
    def passed(self) -> bool:
        return self.unblocked == 0

    @property
    def size(self) -> int:
        return sum(1 for h in self.hits if h)

    def to_json(self) -> dict:
        return {"horizon": str(self.horizon), "rays": self.rays, "hits": list(self.hits),
                "used": self.size, "unblocked": self.unblocked, "witness": self.witness}


@dataclass(frozen=True, eq=False)
class QuotientGraph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    tag: str = "graph"

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n_vertices < 1 or not edges:
            raise GraphError("graph needs vertices and edges")
        for u, v in edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GraphError(f"edge ({u}, {v}) uses an unknown vertex")
        deg = [0] * self.n_vertices
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        if min(deg) < 2:
            raise GraphError("every vertex needs degree >= 2 (loops count twice)")
        if len(self._bfs(0)) != self.n_vertices:
            raise GraphError("graph is not connected")

    @classmethod
    def wedge(cls, k: int = 2) -> "QuotientGraph":
        return cls(1, tuple((0, 0) for _ in range(k)))

    @classmethod
    def theta(cls, k: int = 3) -> "QuotientGraph":
        return cls(2, tuple((0, 1) for _ in range(k)))

    @classmethod
    def cycle(cls, n: int) -> "QuotientGraph":
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    # -- directed edges

    def tail(self, d: int) -> int:
        u, v = self.edges[d // 2]
        return u if d % 2 == 0 else v

    def head(self, d: int) -> int:
        u, v = self.edges[d // 2]
        return v if d % 2 == 0 else u

    @cached_property
    def out_edges(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_vertices)]
        for d in range(2 * len(self.edges)):
            out[self.tail(d)].append(d)
        return out

    def successors(self, d: int) -> list[int]:
        return [d2 for d2 in self.out_edges[self.head(d)] if d2 != d ^ 1]

    # -- points

    def point(self, spec) -> GraphPoint:
        """A vertex id, or an (edge, offset) pair with a rational offset."""
        if isinstance(spec, GraphPoint):
            spec = spec.vertex if spec.vertex is not None else (spec.edge, spec.offset)
        if isinstance(spec, int):
            if not 0 <= spec < self.n_vertices:
                raise GraphError(f"unknown vertex {spec}")
            return GraphPoint(vertex=spec)
        e, off = spec
        off = rational(off) if not isinstance(off, Fraction) else off
        if not 0 <= e < len(self.edges):
            raise GraphError(f"unknown edge {e}")
        if not 0 <= off <= 1:
            raise GraphError("offset must lie in [0, 1]")
        if off == 0:
            return GraphPoint(vertex=self.edges[e][0])
        if off == 1:
            return GraphPoint(vertex=self.edges[e][1])
        return GraphPoint(edge=e, offset=off)

    def point_on(self, d: int, s: Fraction) -> GraphPoint:
        return self.point((d // 2, s if d % 2 == 0 else 1 - s))

    def same_point(self, x: GraphPoint, y: GraphPoint) -> bool:
        return self.point(x) == self.point(y)

    def _param(self, p: GraphPoint, d: int) -> Fraction | None:
        if p.vertex is not None or p.edge != d // 2:
            return None
        return p.offset if d % 2 == 0 else 1 - p.offset

    def _starts(self, x: GraphPoint) -> list[tuple[int, Fraction]]:
        if x.vertex is not None:
            return [(d, Fraction(0)) for d in self.out_edges[x.vertex]]
        return [(2 * x.edge, x.offset), (2 * x.edge + 1, 1 - x.offset)]

    # -- enumeration

    def _walks(self, x: GraphPoint, y: GraphPoint, T, light: bool):
        """Depth-first over the tree cover; yields piece tuples of geodesics x -> y."""
        T = Fraction(T)
        stack = [(d, s0, (), Fraction(0)) for d, s0 in reversed(self._starts(x))]
        while stack:
            d, s0, done, arc = stack.pop()
            py = self._param(y, d)
            px = self._param(x, d)
            if light and px is not None and s0 < px and (py is None or px < py):
                continue  # passes x before reaching y
            if py is not None and py > s0:
                if arc + py - s0 <= T:
                    yield done + ((d, s0, py),)
                if light:
                    continue
            end = arc + 1 - s0
            if end > T:
                continue
            h = self.head(d)
            piece = ((d, s0, Fraction(1)),)
            if y.vertex == h:
                yield done + piece
                if light:
                    continue
            if light and x.vertex == h:
                continue
            for d2 in reversed(self.successors(d)):
                stack.append((d2, Fraction(0), done + piece, end))

    def _rays(self, x, y, T, light: bool) -> list[LightRay]:
        x, y = self.point(x), self.point(y)
        rays = []
        for pieces in self._walks(x, y, T, light):
            path = GraphPath(self, pieces)
            if path.length_exact > 0:
                rays.append(LightRay(_ray_id(pieces), x, y, float(path.length_exact), path, self.tag))
        rays.sort(key=lambda r: (r.path.length_exact, r.path.sort_key()))
        return rays

    def enumerate_light(self, x, y, T) -> list[LightRay]:
        if not T > 0:
            raise ValueError("horizon must be positive")
        return self._rays(x, y, T, light=True)

    def enumerate_geodesics(self, x, y, T) -> list[LightRay]:
        if not T > 0:
            raise ValueError("horizon must be positive")
        return self._rays(x, y, T, light=False)

    def count_geodesics(self, x, y, T) -> int:
        """n_T(x, y) by dynamic programming over directed edges (no materialisation)."""
        return self.count_series(x, y, [T])[0]

    def count_series(self, x, y, horizons) -> list[int]:
        x, y = self.point(x), self.point(y)
        horizons = [Fraction(h) for h in horizons]
        Tmax = max(horizons)
        n_d = 2 * len(self.edges)
        arrivals: list[tuple[Fraction, int]] = []
        groups: dict[Fraction, list[int]] = {}
        for d, s0 in self._starts(x):
            py = self._param(y, d)
            if py is not None and py > s0:
                arrivals.append((py - s0, 1))
            groups.setdefault(1 - s0, [0] * n_d)[d] += 1
        # counts[d] = number of walks that have just fully traversed d
        for arc, counts in sorted(groups.items()):
            while arc <= Tmax:
                nxt = [0] * n_d
                for d, c in enumerate(counts):
                    if not c:
                        continue
                    if y.vertex == self.head(d):
                        arrivals.append((arc, c))
                    for d2 in self.successors(d):
                        nxt[d2] += c
                        py = self._param(y, d2)
                        if py is not None:
                            arrivals.append((arc + py, c))
                counts = nxt
                arc += 1
        return [sum(c for length, c in arrivals if 0 < length <= h) for h in horizons]

    # -- blocking

    def types(self, p: GraphPoint) -> list[Fraction]:
        """Chamber types of a point, over-approximated as {a, 1 - a}.

        The quotient need not respect a labelling of the cover (a loop joins a
        vertex to itself), so both orientations of every edge are admitted.
        """
        p = self.point(p)
        a = Fraction(0) if p.vertex is not None else p.offset
        return sorted({a, 1 - a})

    def type_blocking_set(self, x, y) -> list[GraphPoint]:
        """All points whose type is a midpoint type of the types of x and y."""
        x, y = self.point(x), self.point(y)
        unit = ApartmentGroup((Fraction(1),))
        mids: set[Fraction] = set()
        for a in self.types(x):
            for b in self.types(y):
                mids.update(t[0] for t in unit.midpoint_types((a,), (b,)))
        out = []
        if mids & {Fraction(0), Fraction(1)}:
            out.extend(GraphPoint(vertex=v) for v in range(self.n_vertices))
        inner = sorted({t for t in mids if 0 < t < 1} | {1 - t for t in mids if 0 < t < 1})
        for e in range(len(self.edges)):
            out.extend(GraphPoint(edge=e, offset=t) for t in inner)
        return out

    def midpoint_census(self, x, y, T, blockers) -> MidpointCensus:
        """Walk every light ray of length <= T and look its midpoint up among ``blockers``.

        Same walk as :meth:`enumerate_light`, but in integer units of 1/D with
        no rays materialised, so horizons with millions of rays stay cheap.
        """
        x, y = self.point(x), self.point(y)
        D = 2 * math.lcm(1, *(p.offset.denominator for p in (x, y) if p.vertex is None))
        TD = math.floor(Fraction(T) * D)

        def param(p, d):
            if p.vertex is not None or p.edge != d // 2:
                return None
            o = int(p.offset * D)
            return o if d % 2 == 0 else D - o

        index = {}
        for i, b in enumerate(blockers):
            b = self.point(b)
            if b.vertex is not None:
                index.setdefault(("v", b.vertex), i)
            elif (b.offset * D).denominator == 1:
                index.setdefault((b.edge, int(b.offset * D)), i)
            # other offsets can never be a midpoint, every midpoint lies in (1/D)Z

        nd = 2 * len(self.edges)
        heads = [self.head(d) for d in range(nd)]
        tails = [self.tail(d) for d in range(nd)]
        succ = [self.successors(d) for d in range(nd)]
        px_of = [param(x, d) for d in range(nd)]
        py_of = [param(y, d) for d in range(nd)]
        hits = [0] * len(blockers)
        rays = unblocked = 0
        witness = None

        def midpoint(L, node):
            half = L // 2
            while node[2] > half:
                node = node[3]
            d, s0, arc, _ = node
            p = s0 + half - arc
            if p == 0:
                return ("v", tails[d])
            return (d // 2, p if d % 2 == 0 else D - p)

        if x.vertex is not None:
            starts = [(d, 0) for d in self.out_edges[x.vertex]]
        else:
            o = int(x.offset * D)
            starts = [(2 * x.edge, o), (2 * x.edge + 1, D - o)]
        stack = [(d, s0, 0, None) for d, s0 in reversed(starts)]
        while stack:
            node = stack.pop()
            d, s0, arc, _ = node
            py, px = py_of[d], px_of[d]
            if px is not None and s0 < px and (py is None or px < py):
                continue
            if py is not None and py > s0:
                L = arc + py - s0
                if L > TD or L == 0:
                    continue
            else:
                L = arc + D - s0
                if L > TD:
                    continue
                h = heads[d]
                if y.vertex != h:
                    if x.vertex != h:
                        stack.extend((d2, 0, L, node) for d2 in reversed(succ[d]))
                    continue
            rays += 1
            i = index.get(midpoint(L, node))
            if i is None:
                unblocked += 1
                if witness is None:
                    witness = self._witness(node, L, D)
            else:
                hits[i] += 1
        return MidpointCensus(Fraction(T), rays, tuple(hits), unblocked, witness)

    def _witness(self, node, L, D) -> str:
        pieces = []
        end = L
        while node is not None:
            d, s0, arc, parent = node
            pieces.append((d, Fraction(s0, D), Fraction(s0 + end - arc, D)))
            end, node = arc, parent
        return _ray_id(pieces[::-1])

    # -- spectral growth

    def hashimoto(self) -> np.ndarray:
        n = 2 * len(self.edges)
        B = np.zeros((n, n))
        for d in range(n):
            for d2 in self.successors(d):
                B[d, d2] = 1.0
        return B

    def growth_oracle(self, rtol: float = 1e-10, max_iter: int = 200000) -> float:
        """Spectral radius of the non-backtracking operator by power iteration.

        Iterates on B + I, which is primitive whenever B is irreducible, so
        periodic graphs (bipartite, cycles) converge too.
        """
        B = self.hashimoto() + np.eye(2 * len(self.edges))
        v = np.ones(B.shape[0]) / B.shape[0]
        lam = 0.0
        change = np.inf
        for it in range(1, max_iter + 1):
            w = B @ v
            new = float(w.sum())  # v has unit 1-norm and is nonnegative
            v = w / new
            change = abs(new - lam) / new
            lam = new
            if change < rtol and it > 10:
                return lam - 1.0
        raise NonConvergence(max_iter, change)

    # -- metric

    def _bfs(self, src: int) -> dict[int, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for d in self.out_edges[u]:
                w = self.head(d)
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    @cached_property
    def vertex_distances(self) -> list[dict[int, int]]:
        return [self._bfs(v) for v in range(self.n_vertices)]

    def _to_vertices(self, p: GraphPoint) -> dict[int, Fraction]:
        D = self.vertex_distances
        if p.vertex is not None:
            return {w: Fraction(d) for w, d in D[p.vertex].items()}
        u, v = self.edges[p.edge]
        return {w: min(p.offset + D[u][w], 1 - p.offset + D[v][w]) for w in range(self.n_vertices)}

    def distance_exact(self, x, y) -> Fraction:
        x, y = self.point(x), self.point(y)
        dx = self._to_vertices(x)
        if y.vertex is not None:
            best = dx[y.vertex]
        else:
            u, v = self.edges[y.edge]
            best = min(dx[u] + y.offset, dx[v] + 1 - y.offset)
        if x.vertex is None and y.vertex is None and x.edge == y.edge:
            best = min(best, abs(x.offset - y.offset))
        return best

    def distance(self, x, y) -> float:
        return float(self.distance_exact(x, y))

    def diameter(self) -> float:
        # the max of a min of affine functions with slopes ±1 sits on the 1/4 grid
        grid = [Fraction(k, 4) for k in range(5)]
        pts = {self.point((e, t)) for e in range(len(self.edges)) for t in grid}
        pts = sorted(pts, key=repr)
        best = Fraction(0)
        for p, q in itertools.combinations_with_replacement(pts, 2):
            best = max(best, self.distance_exact(p, q))
        return float(best)

    def to_json(self) -> dict:
        return {"space": "graph", "vertices": self.n_vertices, "edges": [list(e) for e in self.edges]}
