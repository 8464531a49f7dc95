"""Rounding feasible fractional (capacitated) b-matchings to integral ones.

Three phases: edges with large multiplicity are extracted outright (losing at
most one unit each, negligible at multiplicity >= 2/delta); vertices whose
remaining fractional load is large are split into copies of moderate load;
the residual bounded problem is blown up into a unit-capacity graph whose
maximum weight matching -- computed exactly by the blossom algorithm --
merges back into an integral b-matching.  The capacitated variant threads
edge capacities through the same phases with a two-vertex gadget per
capacity unit and a saturation-repair pass, so merged edges meet their
capacity exactly and the weight accounting stays an offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Instance


@dataclass
class RoundingResult:
    y: np.ndarray            # integral assignment, one entry per edge
    value: float
    extracted: np.ndarray    # phase-1 integral part (included in y)
    splits: int              # vertex copies created in phase 2
    gadget_vertices: int     # size of the unit matching instance


def max_weight_matching(edges, epsilon: float = 0.0) -> set[frozenset]:
    """Maximum weight matching on a unit graph, (1-epsilon)-approximate.

    ``edges`` is an iterable of (u, v, weight) with hashable endpoints.  The
    backend is the exact blossom implementation, so epsilon is honored
    trivially; it stays in the signature for callers that track it.
    """
    import networkx as nx

    g = nx.Graph()
    for u, v, w in edges:
        g.add_edge(u, v, weight=w)
    if g.number_of_edges() == 0:
        return set()
    mate = nx.max_weight_matching(g)
    return {frozenset(e) for e in mate}


def _split_vertices(inst: Instance, y1, b1, t: int):
    """Phase 2: split vertices of fractional load >= 3t into copies whose
    load lies in [t, 2t] (prefix sums in input edge order; each edge value
    is below t after phase 1).

    Returns (owner, b2) where owner[k] = (left copy id, right copy id) for
    every edge and b2 maps copy id -> integral capacity.  Copy id 0..n-1 is
    the original vertex.
    """
    owner = [[i, j] for (i, j, _) in inst.edges]
    # incident[v] lists (edge id, side) still assigned to copy v, input order
    incident: dict[int, list[tuple[int, int]]] = {v: [] for v in range(inst.n)}
    for k, (i, j, _) in enumerate(inst.edges):
        if y1[k] > 0:
            incident[i].append((k, 0))
            incident[j].append((k, 1))
    b2: dict[int, int] = {v: b1[v] for v in range(inst.n)}
    next_id = inst.n
    splits = 0

    queue = list(range(inst.n))
    while queue:
        v = queue.pop()
        while sum(y1[k] for k, _ in incident[v]) >= 3 * t:
            acc = 0.0
            cut = 0
            for k, _ in incident[v]:
                acc += y1[k]
                cut += 1
                if acc >= t:
                    break
            assert t <= acc <= 2 * t
            prefix, incident[v] = incident[v][:cut], incident[v][cut:]
            new = next_id
            next_id += 1
            splits += 1
            incident[new] = prefix
            b2[new] = math.floor(acc)
            for k, side in prefix:
                owner[k][side] = new
    return [tuple(o) for o in owner], b2, splits


def round_uncap(y, inst: Instance, delta) -> RoundingResult:
    """Round a fractional solution of the odd-set LP to an integral
    b-matching of weight at least (1 - 2*delta) times its value."""
    if inst.capacitated:
        raise ValueError("use round_cap for capacitated instances")
    delta = float(delta)
    y = np.asarray(y, dtype=float)
    w = np.array([e[2] for e in inst.edges], dtype=float)
    t = math.ceil(2 / delta)

    # phase 1: strip large multiplicities
    big = y >= t
    y0 = np.where(big, np.floor(y) - 1, 0.0)
    y1 = np.where(big, 0.0, y)
    load0 = inst.loads(y0)
    load1 = inst.loads(y1)
    b1 = []
    for i in range(inst.n):
        cap = inst.b[i] - int(round(load0[i]))
        if cap < 0:
            raise ValueError("input infeasible: extracted part exceeds b")
        b1.append(min(cap, math.ceil(load1[i] - 1e-12) + 1))

    # phase 2: split heavy vertices
    owner, b2, splits = _split_vertices(inst, y1, b1, t)

    # phase 3: unit blow-up and exact matching
    gadget = []
    for k, (i, j, _) in enumerate(inst.edges):
        if y1[k] <= 0 or w[k] <= 0:
            continue
        ci, cj = owner[k]
        for a in range(max(b2[ci], 0)):
            for b in range(max(b2[cj], 0)):
                gadget.append(((ci, a), (cj, b), w[k], k))
    nverts = len({u for (u, v, _, _) in gadget} | {v for (_, v, _, _) in gadget})
    lookup = {}
    for u, v, wk, k in gadget:
        lookup[frozenset((u, v))] = k
    mate = max_weight_matching([(u, v, wk) for u, v, wk, _ in gadget])

    y_int = y0.copy()
    for pair in mate:
        y_int[lookup[pair]] += 1
    value = float(w @ y_int)
    return RoundingResult(y_int, value, y0, splits, nverts)


def round_cap(y, inst: Instance, delta, R_bound=None) -> RoundingResult:
    """Capacitated rounding: integral, respects c, weight at least
    (1 - delta) * w'y - delta * (capacitated optimum).

    R_bound is the solver's support-weight multiple; it would set the
    matching accuracy delta/(28*R_bound) under an approximate backend and is
    unused with the exact one.
    """
    if not inst.capacitated:
        raise ValueError("use round_uncap for uncapacitated instances")
    delta = float(delta)
    y = np.asarray(y, dtype=float)
    w = np.array([e[2] for e in inst.edges], dtype=float)
    t = math.ceil(2 / delta)

    big = y >= t
    y0 = np.where(big, np.floor(y) - 1, 0.0)
    y1 = np.where(big, 0.0, y)
    load0 = inst.loads(y0)
    load1 = inst.loads(y1)
    b1 = []
    for i in range(inst.n):
        cap = inst.b[i] - int(round(load0[i]))
        if cap < 0:
            raise ValueError("input infeasible: extracted part exceeds b")
        b1.append(min(cap, math.ceil(load1[i] - 1e-12) + 1))
    c1 = [min(inst.c[k], math.ceil(y1[k] - 1e-12) + 1) for k in range(inst.m)]

    owner, b2, splits = _split_vertices(inst, y1, b1, t)

    # unit graph: per capacity unit of edge k a two-vertex gadget whose
    # internal edge carries w_k, flanked by complete bipartite connections
    # to the endpoint copies, also at w_k
    edges3 = []
    for k, (i, j, _) in enumerate(inst.edges):
        if y1[k] <= 0 or w[k] <= 0:
            continue
        ci, cj = owner[k]
        for ell in range(c1[k]):
            pi, pj = ("p", k, ell, 0), ("p", k, ell, 1)
            edges3.append((pi, pj, w[k]))
            for a in range(max(b2[ci], 0)):
                edges3.append(((ci, a), pi, w[k]))
            for b in range(max(b2[cj], 0)):
                edges3.append((pj, (cj, b), w[k]))
    nverts = len({u for (u, v, _) in edges3} | {v for (_, v, _) in edges3})
    mate = max_weight_matching(edges3)

    # saturation repair: make every gadget vertex matched at equal weight,
    # so merged p-vertices sit exactly at capacity and the count of
    # copy-to-gadget edges is the edge's integral multiplicity
    matched_of: dict = {}
    for pair in mate:
        u, v = tuple(pair)
        matched_of[u] = v
        matched_of[v] = u
    for k, (i, j, _) in enumerate(inst.edges):
        if y1[k] <= 0 or w[k] <= 0:
            continue
        for ell in range(c1[k]):
            pi, pj = ("p", k, ell, 0), ("p", k, ell, 1)
            mi, mj = matched_of.get(pi), matched_of.get(pj)
            if mi is None and mj is None:
                matched_of[pi], matched_of[pj] = pj, pi
            elif mi is None:
                # drop pj's matching edge (same weight w_k), pair them up
                del matched_of[mj]
                matched_of[pi], matched_of[pj] = pj, pi
            elif mj is None:
                del matched_of[mi]
                matched_of[pi], matched_of[pj] = pj, pi

    y_int = y0.copy()
    for k in range(inst.m):
        if y1[k] <= 0 or w[k] <= 0:
            continue
        a_e = sum(
            1 for ell in range(c1[k])
            if matched_of.get(("p", k, ell, 0), ("p",))[0] != "p"
        )
        b_e = sum(
            1 for ell in range(c1[k])
            if matched_of.get(("p", k, ell, 1), ("p",))[0] != "p"
        )
        assert a_e == b_e, "saturation repair left the gadget unbalanced"
        y_int[k] += a_e
    value = float(w @ y_int)
    return RoundingResult(y_int, value, y0, splits, nverts)
