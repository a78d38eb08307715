from fractions import Fraction

import numpy as np

from geoblock import experiments as E
from geoblock.torus import TorusSpace

F = Fraction


def test_random_multigraph_cap():
    rng = np.random.default_rng(3)
    for _ in range(5):
        g = E.random_multigraph(rng)
        assert len(g.edges) <= 6 and g.growth_oracle() <= 3 + 1e-9


def test_random_basis_ranges():
    S = E.random_basis(np.random.default_rng(1))
    (a, b), (c, d) = S.basis
    assert b == 0 and F(3, 4) <= a <= F(3, 2) and F(3, 4) <= d <= F(3, 2) and abs(c) <= F(1, 2)


def test_exact_series_small():
    U = TorusSpace.unit(2)
    x, y = U.point((0, F(4, 5))), U.point((0, F(7, 10)))
    s, proj, agree = E.exact_series(U, x, y, 3)
    assert agree
    assert s.horizons[:2] == (0.1, 0.9) and s.n[:4] == (1, 2, 4, 5) and s.m[:4] == (1, 2, 4, 4)


def test_blocker_split_outcome_is_stable():
    a, b = E.blocker_split(1, 0, T=8), E.blocker_split(8, 0, T=8)
    assert a.passed and a.artifact_bytes() == b.artifact_bytes()
