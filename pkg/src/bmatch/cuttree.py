"""Low s-t cut trees on unweighted multigraphs and the maximal odd-set sweep.

A "low cut tree" for threshold kappa represents all pairwise minimum cuts of
value <= kappa: tree nodes are disjoint vertex subsets (any two vertices in the
same subset have mincut > kappa) and for vertices in different subsets the
minimum tree-edge weight on the connecting path equals their mincut.

The tree is a genuine Gomory-Hu tree (built with contraction, so removing a
tree edge yields a partition realizing that cut value), which the maximal
odd-set collection below relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow


class Multigraph:
    """Undirected multigraph; parallel edges stored as integer multiplicities."""

    def __init__(
        self,
        nodes: Iterable[Hashable],
        edges: Iterable[tuple[Hashable, Hashable, int]] = (),
    ):
        self.nodes = list(dict.fromkeys(nodes))
        self.index = {v: k for k, v in enumerate(self.nodes)}
        self.mult: Dict[tuple[int, int], int] = {}
        for (u, v, m) in edges:
            self.add_edge(u, v, m)

    def add_edge(self, u: Hashable, v: Hashable, m: int) -> None:
        if m < 0:
            raise ValueError("multiplicity must be nonnegative")
        if m == 0:
            return
        iu, iv = self.index[u], self.index[v]
        if iu == iv:
            return  # self loops never affect cuts
        key = (min(iu, iv), max(iu, iv))
        self.mult[key] = self.mult.get(key, 0) + int(m)

    def capped(self, kappa: int) -> "Multigraph":
        """Copy with multiplicities capped at kappa+1 (cut values <= kappa
        are preserved exactly; larger cuts stay larger than kappa)."""
        g = Multigraph(self.nodes)
        cap = int(kappa) + 1
        for (iu, iv), m in self.mult.items():
            g.add_edge(self.nodes[iu], self.nodes[iv], min(m, cap))
        return g

    def cut_value(self, side: set) -> int:
        idx = {self.index[v] for v in side}
        return sum(
            m for (iu, iv), m in self.mult.items()
            if (iu in idx) != (iv in idx)
        )

    def quotient(self, groups: dict[Hashable, Hashable]) -> "Multigraph":
        """Contract vertices; ``groups`` maps each vertex to its group token."""
        g = Multigraph(dict.fromkeys(groups[v] for v in self.nodes))
        for (iu, iv), m in self.mult.items():
            g.add_edge(groups[self.nodes[iu]], groups[self.nodes[iv]], m)
        return g


def min_cut(g: Multigraph, s: Hashable, t: Hashable) -> tuple[int, set]:
    """Minimum s-t cut value and the minimal minimizing side containing s."""
    if s == t:
        raise ValueError("s and t must differ")
    n = len(g.nodes)
    si, ti = g.index[s], g.index[t]
    if not g.mult:
        return 0, {s}
    rows, cols, data = [], [], []
    for (iu, iv), m in g.mult.items():
        rows += [iu, iv]
        cols += [iv, iu]
        data += [m, m]
    cap = csr_matrix((np.array(data, dtype=np.int32), (rows, cols)), shape=(n, n))
    res = maximum_flow(cap, si, ti)
    residual = (cap - res.flow).toarray()
    # forward BFS over positive residual capacity gives the minimal s-side
    seen = np.zeros(n, dtype=bool)
    seen[si] = True
    stack = [si]
    while stack:
        u = stack.pop()
        for v in np.nonzero(residual[u] > 0)[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    side = {g.nodes[i] for i in np.nonzero(seen)[0]}
    return int(res.flow_value), side


def min_cut_bfs(g: Multigraph, s: Hashable, t: Hashable) -> tuple[int, set]:
    """Reference Edmonds-Karp (BFS augmenting paths); cross-checked in tests."""
    if s == t:
        raise ValueError("s and t must differ")
    n = len(g.nodes)
    residual = np.zeros((n, n), dtype=np.int64)
    for (iu, iv), m in g.mult.items():
        residual[iu, iv] += m
        residual[iv, iu] += m
    si, ti = g.index[s], g.index[t]
    value = 0
    while True:
        parent = np.full(n, -1)
        parent[si] = si
        queue = [si]
        while queue:
            u = queue.pop(0)
            for v in np.nonzero(residual[u] > 0)[0]:
                if parent[v] < 0:
                    parent[v] = u
                    queue.append(int(v))
        if parent[ti] < 0:
            break
        bottleneck = None
        v = ti
        while v != si:
            u = int(parent[v])
            b = residual[u, v]
            bottleneck = b if bottleneck is None else min(bottleneck, b)
            v = u
        v = ti
        while v != si:
            u = int(parent[v])
            residual[u, v] -= bottleneck
            residual[v, u] += bottleneck
            v = u
        value += int(bottleneck)
    side = {g.nodes[i] for i in range(n) if parent[i] >= 0}
    return value, side


def gomory_hu_tree(g: Multigraph) -> list[tuple[frozenset, frozenset, int]]:
    """Gomory-Hu tree with contraction.

    Returns tree edges (A, B, w) between disjoint singleton groups... the
    classic recursive splitting: removing edge (A, B, w) splits the vertex set
    into two sides whose cut in g equals w (the cut property, which Gusfield's
    simplification does not provide).
    """
    # tree nodes: list of vertex sets; tree adjacency: node -> {node: weight}
    nodes: list[set] = [set(g.nodes)]
    adj: list[dict[int, int]] = [{}]

    def subtree_vertices(start: int, banned: int) -> set:
        out: set = set()
        stack = [start]
        seen = {start, banned}
        while stack:
            a = stack.pop()
            out |= nodes[a]
            for bnb in adj[a]:
                if bnb not in seen:
                    seen.add(bnb)
                    stack.append(bnb)
        return out

    while True:
        split = next((k for k, ns in enumerate(nodes) if len(ns) > 1), None)
        if split is None:
            break
        it = iter(sorted(nodes[split], key=_vkey))
        s, t = next(it), next(it)
        # contract each neighbouring subtree of `split` into one token
        groups = {v: v for v in nodes[split]}
        tokens = {}
        for nb in adj[split]:
            token = ("__sub__", nb)
            tokens[nb] = token
            for v in subtree_vertices(nb, split):
                groups[v] = token
        gq = g.quotient(groups)
        w, side = min_cut(gq, s, t)
        s_part = {v for v in nodes[split] if v in side}
        t_part = nodes[split] - s_part
        new = len(nodes)
        nodes[split] = s_part
        nodes.append(t_part)
        adj.append({})
        old_neighbours = list(adj[split].items())
        adj[split] = {}
        for nb, wn in old_neighbours:
            target = split if tokens[nb] in side else new
            adj[target][nb] = wn
            del adj[nb][split]
            adj[nb][target] = wn
        adj[split][new] = w
        adj[new][split] = w

    out = []
    seen_pairs = set()
    for a in range(len(nodes)):
        for b, w in adj[a].items():
            if (min(a, b), max(a, b)) in seen_pairs:
                continue
            seen_pairs.add((min(a, b), max(a, b)))
            out.append((frozenset(nodes[a]), frozenset(nodes[b]), w))
    return out


def _vkey(v):
    return (0, v, "") if isinstance(v, int) else (1, 0, repr(v))


@dataclass
class CutTree:
    """Low cut tree: disjoint node subsets joined by edges of weight <= kappa."""

    node_sets: list[frozenset]
    edges: list[tuple[int, int, int]]
    kappa: int

    def node_of(self, v) -> int:
        for k, ns in enumerate(self.node_sets):
            if v in ns:
                return k
        raise KeyError(v)

    def path_min(self, u, v) -> Optional[int]:
        """Minimum edge weight on the tree path, or None if same node."""
        a, b = self.node_of(u), self.node_of(v)
        if a == b:
            return None
        adj: dict[int, list[tuple[int, int]]] = {}
        for (x, y, w) in self.edges:
            adj.setdefault(x, []).append((y, w))
            adj.setdefault(y, []).append((x, w))
        best = {a: None}
        stack = [a]
        while stack:
            x = stack.pop()
            for (y, w) in adj.get(x, []):
                if y not in best:
                    best[y] = w if best[x] is None else min(best[x], w)
                    stack.append(y)
        return best[b]


def build_low_cut_tree(g: Multigraph, kappa: int) -> CutTree:
    """Gomory-Hu tree of the kappa-capped graph, with >kappa edges contracted."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    tree = gomory_hu_tree(g.capped(kappa))
    parent = {v: v for v in g.nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    reps = {}
    for (sa, sb, w) in tree:
        for group in (sa, sb):
            vs = sorted(group, key=_vkey)
            reps[group] = vs[0]
            for v in vs[1:]:
                parent[find(v)] = find(vs[0])
        if w > kappa:
            parent[find(reps[sa])] = find(reps[sb])
    clusters: dict = {}
    for v in g.nodes:
        clusters.setdefault(find(v), set()).add(v)
    order = sorted(clusters, key=_vkey)
    node_sets = [frozenset(clusters[r]) for r in order]
    where = {r: k for k, r in enumerate(order)}
    edges = []
    for (sa, sb, w) in tree:
        if w <= kappa:
            a, b = where[find(reps[sa])], where[find(reps[sb])]
            if a != b:
                edges.append((min(a, b), max(a, b), w))
    return CutTree(node_sets, edges, kappa)


def maximal_oddset_collection(
    g: Multigraph,
    kappa: int,
    root: Hashable,
    parity: dict[Hashable, int],
) -> list[frozenset]:
    """Disjoint odd sets avoiding ``root`` with Cut <= kappa, maximal in the
    sense that every other such odd set intersects one of them.

    Repeatedly: contract everything already absorbed into the root, give the
    root a duplicity of 1 or 2 so the total parity is even, build the low cut
    tree, orient it towards the root's node and accept the topmost tree edges
    whose descendant parity is odd (recomputing the cut in the graph as a
    guard).  Accepted sets are merged into the root and the sweep repeats.
    """
    absorbed = {root}
    collected: list[frozenset] = []
    max_rounds = math.ceil(math.log2(max(len(g.nodes), 2))) + 1
    token = ("__root__",)
    for _ in range(max_rounds):
        groups = {v: (token if v in absorbed else v) for v in g.nodes}
        gq = g.quotient(groups)
        if len(gq.nodes) <= 1:
            break
        tree = build_low_cut_tree(gq, kappa)
        rnode = tree.node_of(token)
        children: dict[int, list[int]] = {k: [] for k in range(len(tree.node_sets))}
        adj: dict[int, list[tuple[int, int]]] = {k: [] for k in children}
        for (a, b, w) in tree.edges:
            adj[a].append((b, w))
            adj[b].append((a, w))
        order = []
        par = {rnode: None}
        stack = [rnode]
        while stack:
            x = stack.pop()
            order.append(x)
            for (y, _) in sorted(adj[x], key=lambda e: _vkey(min(tree.node_sets[e[0]], key=_vkey))):
                if y not in par:
                    par[y] = x
                    children[x].append(y)
                    stack.append(y)
        # descendant parity per tree node (root component excluded from picks)
        par_sum = {
            k: sum(parity.get(v, 0) for v in tree.node_sets[k] if v != token)
            for k in range(len(tree.node_sets))
        }
        for x in reversed(order):
            for y in children[x]:
                par_sum[x] += par_sum[y]

        found: list[frozenset] = []

        def descend(x: int) -> None:
            for y in sorted(children[x], key=lambda k: _vkey(min(tree.node_sets[k], key=_vkey))):
                if par_sum[y] % 2 == 1:
                    members = set()
                    stack2 = [y]
                    while stack2:
                        z = stack2.pop()
                        members |= set(tree.node_sets[z])
                        stack2.extend(children[z])
                    if gq.cut_value(members) <= kappa:
                        found.append(frozenset(members))
                        continue
                descend(y)

        descend(rnode)
        if not found:
            break
        collected.extend(found)
        for u in found:
            absorbed |= u
    return collected
