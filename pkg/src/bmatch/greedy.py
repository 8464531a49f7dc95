"""Linear-time primal-dual greedy for (capacitated) b-matching.

Edges arrive in a fixed order; an edge is taken at the largest multiplicity
allowed by its endpoints (and its capacity), evicting the cheapest currently
held units at both endpoints to make room.  Free capacity acts as zero-weight
units and is evicted first.  The duals p_i certify a 1/7 approximation of the
bipartite relaxation in the capacitated case and 1/6 uncapacitated.

Iterating the greedy on residual edge capacities boosts the ratio to
1 - (6/7)^q after q rounds at the price of vertex loads up to q * b_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class GreedyResult:
    y: list            # integral multiplicities, one per edge
    p: list            # vertex duals; p_i/b_i + p_j/b_j >= w_ij on dropped edges
    value: float       # objective under the weights the greedy saw


def greedy_bmatching(inst, weights=None, use_caps=None, order=None) -> GreedyResult:
    """One greedy pass.  ``weights`` overrides instance weights (may contain
    nonpositive entries, which are skipped); ``use_caps`` defaults to the
    instance's capacitated flag; ``order`` permutes edge processing."""
    n, m = inst.n, inst.m
    w = [e[2] for e in inst.edges] if weights is None else list(weights)
    if use_caps is None:
        use_caps = inst.capacitated
    y = [0] * m
    load = [0] * n
    p = [0] * n
    incident: list[set[int]] = [set() for _ in range(n)]  # edge ids ever held

    def evict(v: int, units: int) -> None:
        # free capacity counts as weight-0 units, so only the overflow
        # beyond the current slack costs real evictions
        need = units - (inst.b[v] - load[v])
        if need <= 0:
            return
        held = sorted(
            (k for k in incident[v] if y[k] > 0),
            key=lambda k: (w[k], k),
        )
        for k in held:
            if need <= 0:
                break
            take = min(y[k], need)
            y[k] -= take
            a, bb, _ = inst.edges[k]
            load[a] -= take
            load[bb] -= take
            need -= take
        assert need <= 0

    def incident_value(v: int):
        return 2 * sum(w[k] * y[k] for k in incident[v] if y[k] > 0)

    for k in (order if order is not None else range(m)):
        i, j, _ = inst.edges[k]
        if w[k] <= 0 or inst.b[i] == 0 or inst.b[j] == 0:
            continue
        if p[i] / inst.b[i] + p[j] / inst.b[j] >= w[k]:
            continue
        x = min(inst.b[i], inst.b[j])
        if use_caps:
            x = min(x, inst.c[k])
        if x == 0:
            continue
        evict(i, x)
        evict(j, x)
        y[k] += x
        load[i] += x
        load[j] += x
        incident[i].add(k)
        incident[j].add(k)
        p[i] = max(p[i], incident_value(i))
        p[j] = max(p[j], incident_value(j))

    value = sum(w[k] * y[k] for k in range(m) if y[k])
    return GreedyResult(y, p, value)


def default_rounds(delta) -> int:
    return math.ceil(7 * math.log(2 / float(delta)))


@dataclass
class IteratedGreedyResult:
    y: list                        # summed multiplicities, y_ij <= c_ij
    value: float
    rounds: int
    round_values: list = field(default_factory=list)
    # per round: sum of w * (that round's residual capacity) over its support
    support_weights: list = field(default_factory=list)


def iterated_greedy(inst, weights=None, rounds=None, delta=None,
                    stop_tol=None) -> IteratedGreedyResult:
    """Repeated greedy on residual edge capacities (capacitated instances
    with c_ij <= min(b_i, b_j)); each round's solution saturates its support,
    so round value equals the support's residual-capacity weight.

    With ``stop_tol`` set, rounds end early once the certified remaining gap
    is below stop_tol * value: a round gaining g on top of value v implies
    the bipartite optimum is at most v + 7g, so the gap after it is at most
    6g."""
    if not inst.capacitated:
        raise ValueError("iterated greedy needs a capacitated instance")
    if rounds is None:
        rounds = default_rounds(delta)
    w = [e[2] for e in inst.edges] if weights is None else list(weights)
    total = [0] * inst.m
    resid = list(inst.c)
    round_values = []
    support_weights = []
    done = 0

    class _View:
        n = inst.n
        m = inst.m
        edges = inst.edges
        b = inst.b
        capacitated = True
        c = resid

    for _ in range(rounds):
        res = greedy_bmatching(_View, weights=w, use_caps=True)
        if not any(res.y):
            break
        done += 1
        round_values.append(res.value)
        support_weights.append(
            sum(w[k] * resid[k] for k in range(inst.m) if res.y[k] > 0)
        )
        for k in range(inst.m):
            total[k] += res.y[k]
            resid[k] -= res.y[k]
            assert resid[k] >= 0
        if stop_tol is not None:
            value_so_far = sum(round_values)
            if 6 * res.value <= stop_tol * value_so_far:
                break
    value = sum(w[k] * total[k] for k in range(inst.m) if total[k])
    return IteratedGreedyResult(total, value, done, round_values, support_weights)
