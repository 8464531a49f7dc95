"""Problem instances, perturbation formulas and feasibility checking.

A b-matching instance is an undirected graph without self loops or parallel
edges, a nonnegative integer capacity b_i per vertex and (optionally) a
nonnegative integer capacity c_ij per edge.  A fractional solution assigns a
nonnegative multiplicity y_ij to every edge; the matching polytope additionally
constrains every "odd set" U (a vertex subset whose b-norm sum(b_i, i in U) is
odd) by

    sum(y_ij : i, j both in U)  <=  floor(bnorm(U) / 2).

The solver works against a perturbed system in which b_i is replaced by
(1 - 4*delta)*b_i and floor(bnorm/2) by floor(bnorm/2) - delta^2*bnorm^2/4;
the helpers here provide both exact-rational and float views of those bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

Number = Union[int, float, Fraction]

DELTA_MAX = Fraction(1, 16)


def _check_delta(delta: Number) -> None:
    if not 0 < delta <= DELTA_MAX:
        raise ValueError(f"delta must be in (0, 1/16], got {delta!r}")


def perturbed_vertex_bound(b_i: int, delta: Number) -> Number:
    """Perturbed vertex capacity (1 - 4*delta) * b_i."""
    _check_delta(delta)
    if b_i < 0:
        raise ValueError("vertex capacity must be nonnegative")
    return (1 - 4 * delta) * b_i


def perturbed_oddset_bound(bnorm: int, delta: Number) -> Number:
    """Perturbed odd-set capacity floor(bnorm/2) - delta^2 * bnorm^2 / 4.

    Exact when ``delta`` is a Fraction.  ``bnorm`` must be odd and >= 3.
    """
    _check_delta(delta)
    if bnorm % 2 == 0:
        raise ValueError(f"odd-set b-norm must be odd, got {bnorm}")
    if bnorm < 3:
        raise ValueError(f"odd-set b-norm must be >= 3, got {bnorm}")
    return bnorm // 2 - delta * delta * bnorm * bnorm / 4


class Instance:
    """Immutable b-matching instance.

    Edges are stored as (i, j, w) with i < j, in input order; the edge index in
    this list is the canonical edge id used by every array-valued function in
    the package.
    """

    def __init__(
        self,
        n: int,
        edges: Sequence[tuple[int, int, Number]],
        b: Sequence[int],
        c: Optional[Sequence[int]] = None,
        capacitated: bool = False,
    ):
        if len(b) != n:
            raise ValueError("len(b) must equal n")
        self.n = n
        self.b = tuple(int(x) for x in b)
        if any(x < 0 for x in self.b):
            raise ValueError("vertex capacities must be nonnegative")
        seen = set()
        norm_edges = []
        for (i, j, w) in edges:
            if i == j:
                raise ValueError(f"self loop at vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range")
            if w < 0:
                raise ValueError("edge weights must be nonnegative")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"parallel edge ({i},{j})")
            seen.add(key)
            norm_edges.append((key[0], key[1], w))
        self.edges = tuple(norm_edges)
        self.m = len(self.edges)
        self.capacitated = bool(capacitated)
        if capacitated:
            if c is None or len(c) != self.m:
                raise ValueError("capacitated instance needs one c per edge")
            self.c = tuple(int(x) for x in c)
            for k, (i, j, _) in enumerate(self.edges):
                if self.c[k] < 0:
                    raise ValueError("edge capacities must be nonnegative")
                if self.c[k] > min(self.b[i], self.b[j]):
                    raise ValueError(
                        f"edge capacity c={self.c[k]} on ({i},{j}) exceeds "
                        f"min(b_i, b_j)={min(self.b[i], self.b[j])}"
                    )
        else:
            self.c = None
        # adjacency: vertex -> list of (edge index, neighbour)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for k, (i, j, _) in enumerate(self.edges):
            adj[i].append((k, j))
            adj[j].append((k, i))
        self.adj = tuple(tuple(a) for a in adj)
        self.w = np.array([float(w) for (_, _, w) in self.edges])
        self.edge_index = {(i, j): k for k, (i, j, _) in enumerate(self.edges)}

    def weight_exact(self, k: int) -> Fraction:
        return Fraction(self.edges[k][2])

    def loads(self, y: np.ndarray) -> np.ndarray:
        """Per-vertex incident multiplicity sums."""
        out = np.zeros(self.n)
        for k, (i, j, _) in enumerate(self.edges):
            out[i] += y[k]
            out[j] += y[k]
        return out

    def __repr__(self) -> str:
        cap = ", capacitated" if self.capacitated else ""
        return f"Instance(n={self.n}, m={self.m}{cap})"


def as_dict(y: np.ndarray, inst: Instance) -> dict[tuple[int, int], float]:
    """Sparse {(i, j): y_ij} view of an edge-indexed vector."""
    return {
        (i, j): float(y[k])
        for k, (i, j, _) in enumerate(inst.edges)
        if y[k] != 0
    }


def from_dict(d: Mapping[tuple[int, int], Number], inst: Instance) -> np.ndarray:
    y = np.zeros(inst.m)
    for (i, j), v in d.items():
        key = (min(i, j), max(i, j))
        if key not in inst.edge_index:
            raise ValueError(f"({i},{j}) is not an edge of the instance")
        if v < 0:
            raise ValueError("multiplicities must be nonnegative")
        y[inst.edge_index[key]] = float(v)
    return y


def objective(y: np.ndarray, inst: Instance) -> float:
    return float(np.dot(inst.w, np.asarray(y, dtype=float)))


def objective_exact(y: Sequence[Number], inst: Instance) -> Fraction:
    return sum(
        (Fraction(inst.edges[k][2]) * Fraction(y[k]) for k in range(inst.m)),
        Fraction(0),
    )


def bnorm(members: Iterable[int], inst: Instance) -> int:
    return sum(inst.b[i] for i in members)


@dataclass(frozen=True)
class OddSet:
    members: frozenset[int]
    bnorm: int

    @classmethod
    def of(cls, members: Iterable[int], inst: Instance) -> "OddSet":
        ms = frozenset(members)
        return cls(ms, bnorm(ms, inst))


@dataclass
class ViolationReport:
    """Max constraint-violation ratios of the perturbed system."""

    lam: float
    lambda_vertex: list[float]
    family: list[tuple[frozenset[int], float]] = field(default_factory=list)
    lam_exact: Optional[Fraction] = None


def internal_edges(members: frozenset[int], inst: Instance) -> list[int]:
    return [
        k for k, (i, j, _) in enumerate(inst.edges)
        if i in members and j in members
    ]


def violation_report(
    y: np.ndarray,
    inst: Instance,
    family: Sequence[frozenset[int]],
    delta: Number,
) -> ViolationReport:
    """Violation ratios lambda_i, lambda_U for the supplied sets.

    A zero perturbed bound with positive load reports an infinite ratio;
    with zero load the ratio is 0.
    """
    _check_delta(delta)
    d = float(delta)
    loads = inst.loads(y)
    lam_v = []
    for i in range(inst.n):
        bt = (1 - 4 * d) * inst.b[i]
        if bt == 0:
            lam_v.append(float("inf") if loads[i] > 0 else 0.0)
        else:
            lam_v.append(loads[i] / bt)
    fam_out = []
    for members in family:
        nb = bnorm(members, inst)
        if nb % 2 == 0:
            raise ValueError(f"set {sorted(members)} has even b-norm {nb}")
        total = sum(y[k] for k in internal_edges(members, inst))
        if nb < 3:
            lam_u = float("inf") if total > 0 else 0.0
        else:
            bt = float(perturbed_oddset_bound(nb, delta))
            lam_u = total / bt if bt > 0 else (float("inf") if total > 0 else 0.0)
        fam_out.append((frozenset(members), lam_u))
    lam = max([0.0] + lam_v + [v for _, v in fam_out])
    return ViolationReport(lam=lam, lambda_vertex=lam_v, family=fam_out)


def check_lp1_feasibility(
    y: np.ndarray,
    inst: Instance,
    rel_tol: float = 1e-9,
) -> tuple[bool, Optional[str]]:
    """Exhaustive feasibility check against the unperturbed polytope.

    Checks every vertex constraint and every odd-set constraint (all 2^n
    subsets), with relative tolerance ``rel_tol``.  Intended for test scale;
    n > 22 is rejected.
    """
    if inst.n > 22:
        raise ValueError("exhaustive feasibility check limited to n <= 22")
    y = np.asarray(y, dtype=float)
    if np.any(y < -rel_tol):
        k = int(np.argmin(y))
        return False, f"negative multiplicity on edge {inst.edges[k][:2]}"
    loads = inst.loads(y)
    for i in range(inst.n):
        if loads[i] > inst.b[i] * (1 + rel_tol) + (0 if inst.b[i] else rel_tol):
            return False, f"vertex {i}: load {loads[i]} > b={inst.b[i]}"
    if inst.capacitated:
        for k in range(inst.m):
            if y[k] > inst.c[k] * (1 + rel_tol) + (0 if inst.c[k] else rel_tol):
                i, j, _ = inst.edges[k]
                return False, f"edge ({i},{j}): y={y[k]} > c={inst.c[k]}"
    masks = np.arange(1 << inst.n, dtype=np.int64)
    bn = np.zeros(1 << inst.n, dtype=np.int64)
    for i in range(inst.n):
        bn += inst.b[i] * ((masks >> i) & 1)
    inner = np.zeros(1 << inst.n)
    for k, (i, j, _) in enumerate(inst.edges):
        inner += y[k] * (((masks >> i) & 1) & ((masks >> j) & 1))
    odd = (bn % 2) == 1
    cap = bn // 2
    bad = odd & (inner > cap * (1 + rel_tol) + np.where(cap == 0, rel_tol, 0))
    if np.any(bad):
        mask = int(masks[bad][np.argmax((inner - cap)[bad])])
        members = [i for i in range(inst.n) if (mask >> i) & 1]
        return False, (
            f"odd set {members}: inner sum {inner[mask]:.12g} > "
            f"floor(bnorm/2) = {cap[mask]}"
        )
    return True, None


# ---------------------------------------------------------------------------
# Instance text format
#
#   p bm <n> <m> [cap]
#   v <id> <b>            (1-based ids)
#   e <i> <j> <w> [<c>]   (c only in cap mode)
#
# '#' starts a comment; blank lines are ignored.
# ---------------------------------------------------------------------------

def parse_instance(text: str) -> Instance:
    n = m = None
    capacitated = False
    b: list[int] = []
    edges: list[tuple[int, int, Number]] = []
    caps: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "p":
                if n is not None:
                    raise ValueError("duplicate problem line")
                if parts[1] != "bm" or len(parts) not in (4, 5):
                    raise ValueError("problem line must be 'p bm <n> <m> [cap]'")
                n, m = int(parts[2]), int(parts[3])
                if len(parts) == 5:
                    if parts[4] != "cap":
                        raise ValueError(f"unknown problem flag {parts[4]!r}")
                    capacitated = True
                b = [0] * n
            elif tag == "v":
                if n is None:
                    raise ValueError("vertex line before problem line")
                vid = int(parts[1])
                if not 1 <= vid <= n:
                    raise ValueError(f"vertex id {vid} out of range")
                b[vid - 1] = int(parts[2])
            elif tag == "e":
                if n is None:
                    raise ValueError("edge line before problem line")
                want = 5 if capacitated else 4
                if len(parts) != want:
                    raise ValueError(f"edge line needs {want - 1} fields")
                i, j = int(parts[1]) - 1, int(parts[2]) - 1
                w = _parse_weight(parts[3])
                edges.append((i, j, w))
                if capacitated:
                    caps.append(int(parts[4]))
            else:
                raise ValueError(f"unknown line tag {tag!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if n is None:
        raise ValueError("missing problem line")
    if len(edges) != m:
        raise ValueError(f"expected {m} edges, found {len(edges)}")
    return Instance(n, edges, b, caps if capacitated else None, capacitated)


def _parse_weight(token: str) -> Number:
    try:
        return int(token)
    except ValueError:
        pass
    if "/" in token:
        return Fraction(token)
    return float(token)


def format_instance(inst: Instance) -> str:
    lines = [f"p bm {inst.n} {inst.m}" + (" cap" if inst.capacitated else "")]
    for i in range(inst.n):
        lines.append(f"v {i + 1} {inst.b[i]}")
    for k, (i, j, w) in enumerate(inst.edges):
        line = f"e {i + 1} {j + 1} {w}"
        if inst.capacitated:
            line += f" {inst.c[k]}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read())
