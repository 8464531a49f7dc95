"""Brute-force ground truth used by the test suite.

Everything here is exhaustive and exact (rational arithmetic); nothing is
shared with the solver's own code paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Optional

import numpy as np

from .core import Instance, perturbed_oddset_bound, perturbed_vertex_bound

MAX_SEARCH = 10 ** 7


@dataclass
class OracleResult:
    value: Fraction
    assignment: tuple[int, ...]
    nodes: int


def brute_force_bmatching(inst: Instance) -> OracleResult:
    """Exact optimum integral (capacitated) b-matching by DFS enumeration.

    The odd-set LP has an integral optimum for integral b (and c), so this is
    also the fractional optimum.  Search space is guarded by MAX_SEARCH.
    """
    ub_edge = []
    for k, (i, j, _) in enumerate(inst.edges):
        u = min(inst.b[i], inst.b[j])
        if inst.capacitated:
            u = min(u, inst.c[k])
        ub_edge.append(u)
    space = 1
    for u in ub_edge:
        space *= u + 1
        if space > MAX_SEARCH:
            raise ValueError("search space too large for brute force")

    w = [Fraction(inst.edges[k][2]) for k in range(inst.m)]
    # optimistic tail bound: remaining edges at their individual caps
    tail = [Fraction(0)] * (inst.m + 1)
    for k in range(inst.m - 1, -1, -1):
        tail[k] = tail[k + 1] + w[k] * ub_edge[k]

    best = Fraction(0)
    best_y: list[int] = [0] * inst.m
    cur = [0] * inst.m
    resid = list(inst.b)
    nodes = 0

    def rec(k: int, val: Fraction) -> None:
        nonlocal best, best_y, nodes
        nodes += 1
        if val + tail[k] <= best and k < inst.m:
            return
        if k == inst.m:
            if val > best:
                best = val
                best_y = cur.copy()
            return
        i, j, _ = inst.edges[k]
        hi = min(ub_edge[k], resid[i], resid[j])
        for x in range(hi, -1, -1):
            cur[k] = x
            resid[i] -= x
            resid[j] -= x
            rec(k + 1, val + w[k] * x)
            resid[i] += x
            resid[j] += x
        cur[k] = 0

    rec(0, Fraction(0))
    return OracleResult(best, tuple(best_y), nodes)


def exact_bmatching(inst: Instance) -> Fraction:
    """Exact optimum by reduction to maximum weight matching.

    Vertex i becomes b_i copies.  Uncapacitated edges become complete
    bipartite connections between the copy sets (y_ij = number of matched
    copy pairs).  A capacitated edge becomes c_ij two-vertex gadgets: using
    a gadget scores 2w, leaving it idle scores w, so the matching optimum
    exceeds sum(w*c) by exactly the b-matching optimum.  Exact for integer
    weights (the blossom implementation does exact arithmetic on them).
    """
    import networkx as nx

    g = nx.Graph()
    copies = [[("v", i, t) for t in range(inst.b[i])] for i in range(inst.n)]
    offset = Fraction(0)
    for k, (i, j, w) in enumerate(inst.edges):
        if inst.capacitated:
            for t in range(inst.c[k]):
                u, v = ("e", k, t, 0), ("e", k, t, 1)
                g.add_edge(u, v, weight=w)
                offset += Fraction(w)
                for a in copies[i]:
                    g.add_edge(a, u, weight=w)
                for b in copies[j]:
                    g.add_edge(v, b, weight=w)
        else:
            for a in copies[i]:
                for b in copies[j]:
                    g.add_edge(a, b, weight=w)
    if g.number_of_edges() == 0:
        return Fraction(0)
    mate = nx.max_weight_matching(g)
    total = sum(Fraction(g[u][v]["weight"]) for u, v in mate)
    return total - offset


def oddset_universe(inst: Instance, delta: Fraction) -> list[frozenset[int]]:
    """All odd sets over vertices with b_i >= 1, b-norm odd in [3, floor(1/delta)]."""
    limit = int(Fraction(1) / Fraction(delta))
    verts = [i for i in range(inst.n) if inst.b[i] >= 1]
    out = []
    for r in range(1, len(verts) + 1):
        if r > limit:
            break
        for comb in combinations(verts, r):
            nb = sum(inst.b[i] for i in comb)
            if nb % 2 == 1 and 3 <= nb <= limit:
                out.append(frozenset(comb))
    return out


def brute_force_violated_oddsets(
    y,
    inst: Instance,
    delta: Fraction,
) -> tuple[Fraction, list[frozenset[int]]]:
    """Exact (lambda, {U : lambda_U >= lambda - delta^3/10}) by enumeration.

    lambda is the maximum perturbed violation ratio over vertices and the odd
    set universe; all arithmetic is rational (floats converted exactly).
    """
    if inst.n > 22:
        raise ValueError("odd-set enumeration limited to n <= 22")
    delta = Fraction(delta)
    yx = [Fraction(v) for v in y]
    lam = Fraction(0)
    loads = [Fraction(0)] * inst.n
    for k, (i, j, _) in enumerate(inst.edges):
        loads[i] += yx[k]
        loads[j] += yx[k]
    for i in range(inst.n):
        bt = Fraction(perturbed_vertex_bound(inst.b[i], delta))
        if bt > 0:
            lam = max(lam, loads[i] / bt)
        elif loads[i] > 0:
            raise ValueError(f"positive load on zero-capacity vertex {i}")
    sets = []
    for members in oddset_universe(inst, delta):
        nb = sum(inst.b[i] for i in members)
        total = sum(
            yx[k] for k, (i, j, _) in enumerate(inst.edges)
            if i in members and j in members
        )
        lam_u = total / Fraction(perturbed_oddset_bound(nb, delta))
        sets.append((members, lam_u))
        lam = max(lam, lam_u)
    thresh = lam - delta ** 3 / 10
    family = [members for members, lam_u in sets if lam_u >= thresh]
    return lam, family


def brute_force_min_cut(
    weights: dict[tuple[int, int], int],
    vertices: list,
    s,
    t,
) -> int:
    """Min s-t cut by enumeration over all separating bipartitions."""
    others = [v for v in vertices if v not in (s, t)]
    best: Optional[int] = None
    for mask in range(1 << len(others)):
        side = {s} | {v for b, v in enumerate(others) if (mask >> b) & 1}
        cut = sum(
            w for (u, v), w in weights.items()
            if (u in side) != (v in side)
        )
        if best is None or cut < best:
            best = cut
    return best


def brute_force_matching(n: int, edges: list[tuple[int, int, float]]) -> float:
    """Exact maximum weight matching by DFS over edges (test scale)."""
    best = 0.0

    def rec(k: int, used: set[int], val: float) -> None:
        nonlocal best
        if val > best:
            best = val
        if k == len(edges):
            return
        rem = sum(w for (i, j, w) in edges[k:])
        if val + rem <= best:
            return
        i, j, w = edges[k]
        if i not in used and j not in used:
            used.add(i)
            used.add(j)
            rec(k + 1, used, val + w)
            used.remove(i)
            used.remove(j)
        rec(k + 1, used, val)

    rec(0, set(), 0.0)
    return best
