"""Brute-force torus census, kept independent of the fast path.

Nothing here reuses the reduced-basis lattice ball or the gcd light test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np


def _solve(basis: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """Coordinates c with c · basis = v, by Gaussian elimination over Q."""
    n = len(basis)
    # columns of the system are the basis rows
    A = [[Fraction(basis[j][i]) for j in range(n)] + [Fraction(v[i])] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return tuple(A[i][n] / A[i][i] for i in range(n))


def torus_census(basis, x, y, T) -> list[tuple[tuple[Fraction, ...], Fraction, bool]]:
    """Every translate v = y - x + λ with 0 < |v| <= T, with |v|^2 and a light flag.

    The flag is decided by direct membership: every lattice point μ in the
    bounding box of the segment is tested for μ = t v and μ + (y - x) = t v
    with 0 < t < 1. Work is done in lattice coordinates, where the lattice
    is Z^n and membership on a segment is unchanged.
    """
    n = len(basis)
    basis = [[Fraction(c) for c in row] for row in basis]
    gram = [[sum(a * b for a, b in zip(basis[i], basis[j])) for j in range(n)] for i in range(n)]
    off = _solve(basis, [Fraction(b) - Fraction(a) for a, b in zip(x, y)])
    # |c_i| <= T * |column i of the inverse basis|
    inv = np.linalg.inv(np.array([[float(c) for c in row] for row in basis]))
    reach = [float(T) * float(np.linalg.norm(inv[:, i])) + 2 for i in range(n)]
    T2 = Fraction(T) ** 2
    out = []
    ranges = [range(math.floor(-float(off[i]) - reach[i]), math.ceil(-float(off[i]) + reach[i]) + 1)
              for i in range(n)]
    for lam in itertools.product(*ranges):
        v = tuple(o + l for o, l in zip(off, lam))
        L2 = sum(v[i] * gram[i][j] * v[j] for i in range(n) for j in range(n))
        if L2 == 0 or L2 > T2:
            continue
        light = True
        box = [range(math.floor(min(0, c)) - 1, math.ceil(max(0, c)) + 2) for c in v]
        for mu in itertools.product(*box):
            for shift in ((0,) * n, off):
                w = tuple(m + s for m, s in zip(mu, shift))
                t = _ratio(w, v)
                if t is not None and 0 < t < 1:
                    light = False
                    break
            if not light:
                break
        out.append((v, L2, light))
    return out


def _ratio(w, v) -> Fraction | None:
    """t with w = t v, or None."""
    t = None
    for a, b in zip(w, v):
        if b == 0:
            if a != 0:
                return None
            continue
        r = a / b
        if t is None:
            t = r
        elif r != t:
            return None
    return t


def census_counts(census, T) -> tuple[int, int]:
    T2 = Fraction(T) ** 2
    inside = [light for _, L2, light in census if L2 <= T2]
    return len(inside), sum(inside)

