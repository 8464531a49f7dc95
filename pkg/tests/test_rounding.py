import random

import numpy as np
import pytest

from bmatch.core import Instance, check_lp1_feasibility
from bmatch.greedy import greedy_bmatching
from bmatch.reference import exact_bmatching
from bmatch.rounding import max_weight_matching, round_cap, round_uncap


def random_instance(rng, nmax=8, bmax=4, capacitated=False, bscale=1):
    n = rng.randint(2, nmax)
    maxm = n * (n - 1) // 2
    pairs = rng.sample(
        [(i, j) for i in range(n) for j in range(i + 1, n)],
        rng.randint(1, maxm),
    )
    b = [bscale * rng.randint(1, bmax) for _ in range(n)]
    edges = [(i, j, rng.randint(1, 10)) for i, j in pairs]
    if capacitated:
        c = [rng.randint(1, min(b[i], b[j])) for (i, j) in pairs]
        return Instance(n, edges, b, c=c, capacitated=True)
    return Instance(n, edges, b)


def random_fractional(rng, inst, k=4):
    """Convex combination of integral b-matchings: always inside the odd-set
    polytope, so it is a legal rounding input."""
    sols = []
    for _ in range(k):
        wts = [rng.uniform(0, 10) for _ in range(inst.m)]
        order = list(range(inst.m))
        rng.shuffle(order)
        g = greedy_bmatching(inst, weights=wts, order=order,
                             use_caps=inst.capacitated)
        sols.append(np.array(g.y, dtype=float))
    mix = np.array([rng.uniform(0, 1) for _ in sols])
    mix /= mix.sum()
    return sum(a * s for a, s in zip(mix, sols))


def check_integral_feasible(y, inst):
    assert np.allclose(y, np.round(y))
    ok, msg = check_lp1_feasibility(np.round(y), inst)
    assert ok, msg
    if inst.capacitated:
        assert all(y[k] <= inst.c[k] + 1e-9 for k in range(inst.m))


class TestRoundUncap:
    def test_rejects_wrong_variant(self):
        cap = Instance(2, [(0, 1, 1)], [1, 1], c=[1], capacitated=True)
        with pytest.raises(ValueError):
            round_uncap(np.array([0.5]), cap, 1 / 16)
        with pytest.raises(ValueError):
            round_cap(np.array([0.5]), Instance(2, [(0, 1, 1)], [1, 1]), 1 / 16)

    def test_random_inputs(self):
        rng = random.Random(67)
        delta = 1 / 16
        for _ in range(150):
            inst = random_instance(rng)
            y = random_fractional(rng, inst)
            w = np.array([e[2] for e in inst.edges], dtype=float)
            res = round_uncap(y, inst, delta)
            check_integral_feasible(res.y, inst)
            assert res.value >= (1 - 2 * delta) * float(w @ y) - 1e-9
            assert res.value == pytest.approx(float(w @ res.y))

    def test_large_multiplicities_and_splits(self):
        # scaled-up b forces phase 1 extraction and phase 2 vertex splitting
        rng = random.Random(71)
        delta = 1 / 16
        for _ in range(15):
            inst = random_instance(rng, nmax=6, bscale=60)
            y = random_fractional(rng, inst) + 0.4
            if not check_lp1_feasibility(y, inst)[0]:
                y = y - 0.4
            w = np.array([e[2] for e in inst.edges], dtype=float)
            res = round_uncap(y, inst, delta)
            check_integral_feasible(res.y, inst)
            assert res.value >= (1 - 2 * delta) * float(w @ y) - 1e-9
            assert np.any(res.extracted > 0)

    def test_single_heavy_edge(self):
        inst = Instance(2, [(0, 1, 2)], [200, 200])
        res = round_uncap(np.array([100.4]), inst, 1 / 16)
        assert res.y[0] >= (1 - 2 / 16) * 100.4
        assert res.y[0] <= 200


class TestRoundCap:
    def test_random_inputs(self):
        rng = random.Random(73)
        delta = 1 / 16
        for _ in range(120):
            inst = random_instance(rng, nmax=6, capacitated=True)
            y = random_fractional(rng, inst)
            w = np.array([e[2] for e in inst.edges], dtype=float)
            res = round_cap(y, inst, delta)
            check_integral_feasible(res.y, inst)
            beta = float(exact_bmatching(inst))
            assert res.value >= (1 - delta) * float(w @ y) - delta * beta - 1e-9

    def test_capacity_binds(self):
        inst = Instance(2, [(0, 1, 5)], [10, 10], c=[3], capacitated=True)
        res = round_cap(np.array([3.0]), inst, 1 / 16)
        assert res.y[0] == 3

    def test_scaled_up_caps(self):
        # the exact blossom oracle is too slow at b ~ 200, so bound the
        # optimum from above by the capped LP relaxation instead (a weaker
        # but still implied form of the guarantee)
        from scipy.optimize import linprog

        rng = random.Random(79)
        delta = 1 / 16
        for _ in range(10):
            inst = random_instance(rng, nmax=5, capacitated=True, bscale=50)
            y = random_fractional(rng, inst)
            w = np.array([e[2] for e in inst.edges], dtype=float)
            res = round_cap(y, inst, delta)
            check_integral_feasible(res.y, inst)
            A = np.zeros((inst.n, inst.m))
            for k, (i, j, _) in enumerate(inst.edges):
                A[i, k] = A[j, k] = 1.0
            lp = linprog(-w, A_ub=A, b_ub=np.array(inst.b, dtype=float),
                         bounds=[(0, inst.c[k]) for k in range(inst.m)])
            upper = -lp.fun
            assert res.value >= (1 - delta) * float(w @ y) - delta * upper - 1e-9


class TestMaxWeightMatching:
    def test_empty(self):
        assert max_weight_matching([]) == set()

    def test_triangle_takes_one_edge(self):
        mate = max_weight_matching([(0, 1, 2.0), (1, 2, 3.0), (0, 2, 1.0)])
        assert mate == {frozenset({1, 2})}
