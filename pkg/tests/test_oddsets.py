import random
from fractions import Fraction

import numpy as np
import pytest

from bmatch.core import Instance, perturbed_oddset_bound
from bmatch.oddsets import (
    build_level_graph,
    build_phi_graph,
    find_violated_family,
    normalize,
    phi_value,
)
from bmatch.reference import brute_force_violated_oddsets

D16 = Fraction(1, 16)


def random_pair(rng, nmax=7, scale=1.6):
    """Random (instance, y) pair; y inflated so odd sets are often violated."""
    n = rng.randint(3, nmax)
    maxm = n * (n - 1) // 2
    pairs = rng.sample(
        [(i, j) for i in range(n) for j in range(i + 1, n)],
        rng.randint(1, maxm),
    )
    inst = Instance(
        n, [(i, j, rng.randint(1, 10)) for i, j in pairs],
        [rng.randint(1, 3) for _ in range(n)],
    )
    y = []
    for (i, j) in pairs:
        cap = min(inst.b[i], inst.b[j])
        y.append(Fraction(rng.randint(0, int(4 * scale * cap)), 4))
    return inst, y


class TestNormalize:
    def test_scales_to_vertex_feasibility(self):
        inst = Instance(2, [(0, 1, 1)], [2, 3])
        under, yhat = normalize([Fraction(5)], inst)
        assert under == Fraction(5, 2)
        assert yhat == [Fraction(2)]

    def test_identity_when_feasible(self):
        inst = Instance(2, [(0, 1, 1)], [2, 3])
        under, yhat = normalize([Fraction(1)], inst)
        assert under == 1 and yhat == [Fraction(1)]

    def test_rejects_load_on_zero_b(self):
        inst = Instance(2, [(0, 1, 1)], [0, 3])
        with pytest.raises(ValueError):
            normalize([Fraction(1)], inst)


class TestPhiGraph:
    def test_phi_value(self):
        assert phi_value(D16) == 50 * 16 ** 4

    def test_triangle_discretization(self):
        inst = Instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 1, 1])
        under, yhat = normalize([Fraction(1, 2)] * 3, inst)
        pg = build_phi_graph(yhat, inst, D16)
        assert under == 1
        assert set(pg.groups) == {0, 1, 2}
        assert all(m == pg.phi // 2 for m in pg.p.values())

    def test_level_graph_guards(self):
        inst = Instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 1, 1])
        _, yhat = normalize([Fraction(1, 2)] * 3, inst)
        pg = build_phi_graph(yhat, inst, D16)
        with pytest.raises(ValueError):
            build_level_graph(pg, 4, Fraction(3, 2), D16)
        g, kappa = build_level_graph(pg, 3, Fraction(3, 2), D16)
        assert kappa > 0 and ("s",) in g.index


class TestFindViolatedFamily:
    def test_triangle(self):
        inst = Instance(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 1, 1])
        rep = find_violated_family([Fraction(1, 2)] * 3, inst, D16)
        assert rep.lam_exact == Fraction(3, 2) / Fraction(1015, 1024)
        assert [set(u) for u, _ in rep.family] == [{0, 1, 2}]

    def test_empty_input(self):
        inst = Instance(3, [(0, 1, 1)], [1, 1, 1])
        rep = find_violated_family([Fraction(0)], inst, D16)
        assert rep.lam == 0 and rep.family == []

    def test_matches_brute_force(self):
        rng = random.Random(23)
        exercised = 0
        for _ in range(120):
            inst, y = random_pair(rng)
            rep = find_violated_family(y, inst, D16)
            lam_bf, fam_bf = brute_force_violated_oddsets(y, inst, D16)
            lam_all = max(lam_bf, max(
                (rep.lambda_vertex[i] for i in range(inst.n)), default=0.0
            ))
            if rep.lam_exact <= 1 + 8 * D16:
                # below the exit line only the verdict is certified
                assert lam_bf <= Fraction(rep.lam_exact)
                continue
            exercised += 1
            assert rep.lam_exact == lam_bf
            got = {u for u, _ in rep.family}
            expect = {u for u in fam_bf}
            assert got == expect
        assert exercised >= 60  # the generator must actually exercise the oracle

    def test_family_laminar_above_exit(self):
        rng = random.Random(29)
        for _ in range(60):
            inst, y = random_pair(rng, nmax=6, scale=2.0)
            rep = find_violated_family(y, inst, D16)
            fam = [u for u, _ in rep.family]
            for a_i, a in enumerate(fam):
                for b in fam[a_i + 1:]:
                    assert not (a & b) or a <= b or b <= a

    def test_threads_agree(self):
        rng = random.Random(31)
        for _ in range(5):
            inst, y = random_pair(rng)
            r1 = find_violated_family(y, inst, D16, threads=1)
            r2 = find_violated_family(y, inst, D16, threads=4)
            assert r1.lam_exact == r2.lam_exact
            assert {u for u, _ in r1.family} == {u for u, _ in r2.family}
