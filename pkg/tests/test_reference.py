import random
from fractions import Fraction

import numpy as np
import pytest

from bmatch.core import Instance, check_lp1_feasibility
from bmatch.reference import (
    MAX_SEARCH,
    brute_force_bmatching,
    brute_force_matching,
    exact_bmatching,
    oddset_universe,
)
from bmatch.rounding import max_weight_matching

D16 = Fraction(1, 16)


def random_instance(rng, nmax=6, capacitated=False):
    n = rng.randint(2, nmax)
    maxm = n * (n - 1) // 2
    pairs = rng.sample(
        [(i, j) for i in range(n) for j in range(i + 1, n)],
        rng.randint(1, min(maxm, 9)),
    )
    b = [rng.randint(1, 3) for _ in range(n)]
    edges = [(i, j, rng.randint(1, 10)) for i, j in pairs]
    if capacitated:
        c = [rng.randint(0, min(b[i], b[j])) for (i, j) in pairs]
        return Instance(n, edges, b, c=c, capacitated=True)
    return Instance(n, edges, b)


class TestBruteForce:
    def test_known_values(self):
        tri = Instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 1, 1])
        assert brute_force_bmatching(tri).value == 1
        path = Instance(
            3, [(0, 1, 1), (1, 2, 1)], [3, 4, 3], c=[3, 2], capacitated=True
        )
        # the middle vertex allows 4 units total; caps allow 3 + 2
        assert brute_force_bmatching(path).value == 4

    def test_assignment_is_feasible_and_achieves_value(self):
        rng = random.Random(83)
        for _ in range(60):
            inst = random_instance(rng, capacitated=rng.random() < 0.5)
            res = brute_force_bmatching(inst)
            y = np.array(res.assignment, dtype=float)
            ok, msg = check_lp1_feasibility(y, inst)
            assert ok, msg
            val = sum(
                Fraction(e[2]) * a for e, a in zip(inst.edges, res.assignment)
            )
            assert val == res.value

    def test_search_guard(self):
        # 21 edges at b=4 endpoints: the DFS space bound trips the guard
        n = 7
        edges = [(i, j, 1) for i in range(n) for j in range(i + 1, n)]
        inst = Instance(n, edges, [4] * n)
        with pytest.raises(ValueError, match="search space"):
            brute_force_bmatching(inst)
        assert MAX_SEARCH == 10 ** 7

    def test_agrees_with_blossom_reduction(self):
        rng = random.Random(89)
        for _ in range(120):
            inst = random_instance(rng, capacitated=rng.random() < 0.5)
            assert brute_force_bmatching(inst).value == exact_bmatching(inst)


class TestBruteForceMatching:
    def test_agrees_with_blossom(self):
        rng = random.Random(97)
        for _ in range(40):
            n = rng.randint(2, 8)
            maxm = n * (n - 1) // 2
            pairs = rng.sample(
                [(i, j) for i in range(n) for j in range(i + 1, n)],
                rng.randint(1, maxm),
            )
            edges = [(i, j, rng.randint(1, 10)) for i, j in pairs]
            mate = max_weight_matching(edges)
            lookup = {frozenset((i, j)): w for i, j, w in edges}
            blossom = sum(lookup[p] for p in mate)
            assert brute_force_matching(n, edges) == blossom


class TestOddsetUniverse:
    def test_triangle(self):
        tri = Instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 1, 1])
        universe = oddset_universe(tri, D16)
        assert frozenset({0, 1, 2}) in universe
        for u in universe:
            nb = sum(tri.b[v] for v in u)
            assert nb % 2 == 1 and 3 <= nb <= 16

    def test_respects_bnorm_ceiling(self):
        # singletons have b-norm 9 and qualify; the pair (b-norm 18) does not
        inst = Instance(2, [(0, 1, 1)], [9, 9])
        assert set(oddset_universe(inst, D16)) == {
            frozenset({0}), frozenset({1}),
        }
