"""Fractional capacitated b-matching FPTAS on the subdivided representation.

Each edge (i, j) with capacity c is split by two subdivision vertices p_i, p_j
carrying b = c, into three long edges of weights w/2, 0, w/2.  Saturation
equalities (the two outer long edges carry y, the middle one c - y) turn the
capacitated polytope into an uncapacitated one on the long graph, where the
primal-dual loop of the uncapacitated solver applies: thresholded exponential
duals on near-maximally violated vertex and small odd-set constraints, a
Lagrangian budget search for an improving direction, and small convex steps.

Two capacitated specifics.  The budget oracle works in short space -- the
iterated greedy on residual capacities, whose round count puts it inside the
long relaxed polytope without any scaling -- and its answer is lifted back by
the affine long transform, so edge capacities hold at every iterate.  And the
violated odd sets of the long graph have structure: a subdivision vertex only
ever appears together with one of its edge's endpoints, so the maximally
violated set decomposes into an original-vertex part S and a per-edge choice
among {none, p_i, p_j, both}, which a small dynamic program over edges solves
exactly for every S and every added b-norm at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .budget import solve_budgeted
from .core import Instance, perturbed_oddset_bound
from .greedy import iterated_greedy
from .solver import IterationLimit, SolverConfig, iteration_bound


def cap_lambda0(delta) -> float:
    return 14 * math.log(2 / float(delta))


def cap_rounds(delta) -> int:
    """Greedy rounds: enough for a 1 - delta/2 bipartite ratio while total
    vertex loads stay within cap_lambda0 / 2 times b."""
    return math.ceil(math.log(2 / float(delta)) / math.log(7 / 6))


# ---------------------------------------------------------------------------
# long/short transforms


@dataclass
class LongInstance:
    base: Instance
    long: Instance   # uncapacitated, n + 2m vertices, 3m edges

    def p_vertices(self, k: int) -> tuple[int, int]:
        return self.base.n + 2 * k, self.base.n + 2 * k + 1


def to_long(inst: Instance) -> LongInstance:
    """Subdivide every edge: vertices p_{k,0} (near i) and p_{k,1} (near j)
    with b = c_k; long edges 3k = (i, p0, w/2), 3k+1 = (p0, p1, 0),
    3k+2 = (p1, j, w/2)."""
    if not inst.capacitated:
        raise ValueError("to_long needs a capacitated instance")
    n = inst.n
    b = list(inst.b)
    edges = []
    for k, (i, j, w) in enumerate(inst.edges):
        p0, p1 = n + 2 * k, n + 2 * k + 1
        b += [inst.c[k], inst.c[k]]
        edges += [(i, p0, w / 2), (p0, p1, 0.0), (p1, j, w / 2)]
    return LongInstance(inst, Instance(n + 2 * inst.m, edges, b))


def ylong(y, inst: Instance) -> np.ndarray:
    """Lift a short assignment with y <= c to the long graph: outer edges
    carry y, the middle edge c - y (so the saturation equalities hold)."""
    y = np.asarray(y, dtype=float)
    c = np.array(inst.c, dtype=float)
    if np.any(y > c * (1 + 1e-9) + 1e-9):
        raise ValueError("ylong: assignment exceeds an edge capacity")
    out = np.empty(3 * inst.m)
    out[0::3] = y
    out[1::3] = c - y
    out[2::3] = y
    return out


def yshort(yc, inst: Instance) -> np.ndarray:
    """Inverse of ylong (reads the outer edges)."""
    yc = np.asarray(yc, dtype=float)
    if yc.shape != (3 * inst.m,):
        raise ValueError("yshort: expected a long assignment (3m entries)")
    return yc[0::3].copy()


def _check_saturation(yc, inst: Instance, tol: float = 1e-7) -> None:
    c = np.array(inst.c, dtype=float)
    scale = np.maximum(c, 1.0)
    if (np.any(np.abs(yc[0::3] + yc[1::3] - c) > tol * scale)
            or np.any(np.abs(yc[1::3] + yc[2::3] - c) > tol * scale)):
        raise ValueError("saturation equalities violated")


def unperturb_cap(yc, inst: Instance, delta) -> np.ndarray:
    """Scale a converged long iterate (violation ratio <= 1 + 8*delta on the
    perturbed system) by (1-delta)/(1+8*delta) in short space and re-lift, so
    the middle edges re-absorb the slack and every long odd-set constraint
    holds."""
    yc = np.asarray(yc, dtype=float)
    _check_saturation(yc, inst)
    deltaf = float(delta)
    return ylong((1 - deltaf) / (1 + 8 * deltaf) * yshort(yc, inst), inst)


# ---------------------------------------------------------------------------
# violated odd sets of the long graph, exactly, by DP over per-edge choices


class _StructuredFamilies:
    """For every nonempty S over original vertices (b-norm <= 1/delta) and
    every added b-norm ell from subdivision vertices, the best achievable
    inner y-sum of S union P over admissible P (a subdivision vertex may only
    join when one of its edge's endpoints is in S), with backpointers.

    All long edges touch a subdivision vertex, so the inner sum is entirely
    the DP's; a cell's violation ratio is best / btilde(bnorm_S + ell).
    """

    def __init__(self, inst: Instance, delta_exact: Fraction):
        self.inst = inst
        self.limit = int(Fraction(1) / delta_exact)
        masks = np.arange(1, 1 << inst.n, dtype=np.int64)
        bn = np.zeros(masks.shape, dtype=np.int64)
        for i in range(inst.n):
            bn += inst.b[i] * ((masks >> i) & 1)
        keep = bn <= self.limit
        self.masks = masks[keep]
        self.bnorm = bn[keep]
        self.iin = []  # per edge: bool over S of "i in S", "j in S"
        self.jin = []
        for (i, j, _) in inst.edges:
            self.iin.append(((self.masks >> i) & 1).astype(bool))
            self.jin.append(((self.masks >> j) & 1).astype(bool))
        self.btilde = np.full(self.limit + 1, np.inf)
        for t in range(3, self.limit + 1, 2):
            self.btilde[t] = float(perturbed_oddset_bound(t, delta_exact))
        total = self.bnorm[:, None] + np.arange(self.limit + 1)[None, :]
        self.valid = (total % 2 == 1) & (3 <= total) & (total <= self.limit)
        self.cell_bt = np.where(
            self.valid, self.btilde[np.minimum(total, self.limit)], np.inf
        )
        self.n_cells = int(self.valid.sum())

    def run(self, y) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (lam_cells, choices): lam_cells[s, ell] is the exact best
        violation ratio over structured sets built on S index s with added
        b-norm ell; choices[k][s, ell] in {0: none, 1: p_i, 2: p_j, 3: both}
        records edge k's decision on the optimal path."""
        L = self.limit
        nS = len(self.masks)
        best = np.full((nS, L + 1), -np.inf)
        best[:, 0] = 0.0
        choices = []
        neg = -np.inf
        for k, (i, j, _) in enumerate(self.inst.edges):
            c = self.inst.c[k]
            touch = self.iin[k] | self.jin[k]
            cand = np.stack([best] + [np.full_like(best, neg)] * 3)
            if 0 < c <= L:
                g1 = np.where(touch, y[k] * self.iin[k], neg)
                g2 = np.where(touch, y[k] * self.jin[k], neg)
                cand[1, :, c:] = best[:, :L + 1 - c] + g1[:, None]
                cand[2, :, c:] = best[:, :L + 1 - c] + g2[:, None]
                if 2 * c <= L:
                    g3 = np.where(
                        touch,
                        y[k] * self.iin[k] + (c - y[k]) + y[k] * self.jin[k],
                        neg,
                    )
                    cand[3, :, 2 * c:] = best[:, :L + 1 - 2 * c] + g3[:, None]
            ch = np.argmax(cand, axis=0).astype(np.int8)
            best = np.max(cand, axis=0)
            choices.append(ch)
        ok = self.valid & (best > neg)
        lam_cells = np.full(best.shape, -np.inf)
        np.divide(best, self.cell_bt, out=lam_cells, where=ok)
        return lam_cells, choices

    def reconstruct(self, s: int, ell: int, choices) -> tuple[np.ndarray, float]:
        """Walk the backpointers of cell (s, ell): returns (coeff, shift)
        with the set's inner y-sum equal to coeff . y + shift, where
        coeff_k = [i,p_i in U] - [p_i,p_j in U] + [p_j,j in U]."""
        inst = self.inst
        coeff = np.zeros(inst.m)
        shift = 0.0
        for k in range(inst.m - 1, -1, -1):
            ch = int(choices[k][s, ell])
            if ch == 0:
                continue
            c = inst.c[k]
            if ch == 1:
                coeff[k] = float(self.iin[k][s])
                ell -= c
            elif ch == 2:
                coeff[k] = float(self.jin[k][s])
                ell -= c
            else:
                coeff[k] = float(self.iin[k][s]) + float(self.jin[k][s]) - 1.0
                shift += c
                ell -= 2 * c
        assert ell == 0, "backpointer walk did not consume the added b-norm"
        return coeff, shift


def eta_costs(x, fam_z, fam_coeff, fam_shift, inst: Instance):
    """Short-space budget costs from long-graph duals.

    x is the per-original-vertex dual (subdivision vertices never carry dual
    weight: their violation ratio is pinned at 1/(1-4*delta), below every
    threshold window while the loop runs); fam_* describe the odd-set duals
    through the reconstruction coefficients.  Returns (shortcost, shiftcost):
    shortcost_ij = x_i + x_j + sum_U z_U coeff_U[ij] >= 0 and
    shiftcost = sum_U z_U shift_U, the y-independent part of the long costs.
    """
    shortcost = np.zeros(inst.m)
    for k, (i, j, _) in enumerate(inst.edges):
        shortcost[k] = x[i] + x[j]
    if len(fam_z):
        shortcost += fam_coeff.T @ fam_z
    assert shortcost.min(initial=0.0) > -1e-9, "negative eta-bar: bug"
    np.maximum(shortcost, 0.0, out=shortcost)
    shiftcost = float(fam_z @ fam_shift) if len(fam_z) else 0.0
    return shortcost, shiftcost


# ---------------------------------------------------------------------------
# the solve loop


@dataclass
class CapSolveResult:
    y: np.ndarray                 # short space, feasible capacitated output
    objective: float
    beta_final: float
    lambda_final: float
    iterations: int
    phases: int
    superphases: int
    passes: int                   # greedy rounds consumed by budget searches
    oracle_invocations: int
    family_size_max: int
    alpha_final: float
    converged: bool
    support_weight_ledger: float  # sum of w*c over the support of y
    R: int                        # oracle pass count for the ledger bound
    phase_lambdas: list = field(default_factory=list)
    trace: list = field(default_factory=list)  # (lambda, max(y - c)) per iterate


def initial_solution_cap(inst: Instance, delta: float):
    """Iterated greedy: y <= c with loads <= rounds * b <= (lambda0c/2) * b,
    hence inside the relaxed long polytope with no scaling; beta by the same
    formula as the uncapacitated start."""
    g = iterated_greedy(inst, rounds=cap_rounds(delta))
    y = np.array(g.y, dtype=float)
    beta = (1 - delta) / (1 - delta / 2) * g.value
    return y, beta


def solve_cap(inst: Instance, delta,
              config: Optional[SolverConfig] = None) -> CapSolveResult:
    cfg = config or SolverConfig()
    if not inst.capacitated:
        raise ValueError("solve_cap needs a capacitated instance")
    deltaf = float(delta)
    delta_exact = Fraction(delta)
    if not 0 < delta_exact <= Fraction(1, 16):
        raise ValueError("delta must be in (0, 1/16]")
    n_long = inst.n + 2 * inst.m
    if deltaf <= 1 / math.sqrt(5 * n_long):
        import warnings
        warnings.warn("delta at or below 1/sqrt(5n); guarantees may not bind")
    if inst.n > 16:
        raise ValueError(
            "capacitated solve enumerates original-vertex subsets; n <= 16"
        )

    n, m = inst.n, inst.m
    LAM0 = cap_lambda0(deltaf)
    w = np.array([e[2] for e in inst.edges], dtype=float)
    cvec = np.array(inst.c, dtype=float)
    btv = (1 - 4 * deltaf) * np.array(inst.b, dtype=float)
    btv_safe = np.where(btv > 0, btv, 1.0)
    Vinc = np.zeros((n, m))
    for e, (i, j, _) in enumerate(inst.edges):
        Vinc[i, e] = 1.0
        Vinc[j, e] = 1.0
    fams = _StructuredFamilies(inst, delta_exact)
    # subdivision vertices sit exactly at capacity, a constant ratio below
    # every exit line for delta <= 1/16
    lam_p = 1 / (1 - 4 * deltaf) if m else 0.0

    y, beta = initial_solution_cap(inst, deltaf)
    if beta <= 0:
        return CapSolveResult(
            np.zeros(m), 0.0, 0.0, lam_p, 0, phases=0, superphases=0,
            passes=0, oracle_invocations=0, family_size_max=0,
            alpha_final=0.0, converged=True, support_weight_ledger=0.0, R=0,
        )
    exit_bound = 1 + 8 * deltaf

    if cfg.alpha is not None:
        alpha = cfg.alpha
    else:
        alpha = max(4.0, math.log(max(n + fams.n_cells, 3)) / (2 * deltaf))
    alpha_cap = min(50 * deltaf ** -3 * math.log(max(n_long, 3)), 16 * alpha)
    alpha0 = alpha
    adaptive = cfg.alpha is None
    eps = 1 / 8
    lambda_t = LAM0
    shrink = cfg.phase_shrink if cfg.phase_shrink is not None else 1 - deltaf
    if cfg.threshold_window is not None:
        thresh_gap = float(cfg.threshold_window)
        if not deltaf ** 3 / 10 <= thresh_gap <= deltaf:
            raise ValueError("threshold_window must lie in [delta^3/10, delta]")
    else:
        thresh_gap = deltaf
    linesearch = cfg.step == "linesearch"
    beta_drop_cap = math.ceil(math.log(LAM0) / -math.log(1 - deltaf)) + 2

    def _rescue_lp(beta_now):
        """Best short assignment at the exit level, by cutting planes.

        Mirrors the uncapacitated plateau escape: when the greedy-backed
        budget search has no direction left that moves lambda, solve the LP
        over vertex rows and capacity bounds, separate with the structured-
        set DP (exact for the long odd-set maximum), and add the violated
        rows until the point passes -- or certify beta unreachable at the
        exit level, which is a FAIL.  Returns (ystar, beta drops) or None.
        """
        from scipy.optimize import linprog

        vrows = [i for i in range(n) if btv[i] > 0]
        A = Vinc[vrows] / btv[vrows, None]
        rhs = np.full(len(vrows), exit_bound)
        bounds = []
        for k, (i, j, _) in enumerate(inst.edges):
            hi = 0.0 if (btv[i] <= 0 or btv[j] <= 0) else float(cvec[k])
            bounds.append((0.0, hi))
        seen: set = set()
        for _ in range(200):
            res = linprog(-w, A_ub=A, b_ub=rhs, bounds=bounds)
            if not res.success:
                return None
            ystar = np.clip(res.x, 0.0, cvec)
            lv = (Vinc @ ystar) / btv_safe * (btv > 0)
            cells, ch = fams.run(ystar)
            lamstar = max(lv.max(initial=0.0),
                          float(cells.max(initial=0.0)))
            if lamstar <= exit_bound * (1 + 1e-9):
                if lamstar > exit_bound:
                    ystar = ystar * (exit_bound / lamstar)  # float slack
                wval = float(w @ ystar)
                drops = 0
                while (1 - deltaf) * beta_now > wval * (1 + 1e-12):
                    beta_now *= 1 - deltaf
                    drops += 1
                return ystar, drops
            viol = np.argwhere(cells > exit_bound)
            order = np.argsort(-cells[tuple(viol.T)])[:50]
            added = False
            for idx in order:
                s, ell = viol[idx]
                coeff, shift = fams.reconstruct(int(s), int(ell), ch)
                key = (coeff.tobytes(), round(float(shift), 9))
                if key in seen:
                    continue
                seen.add(key)
                bt = float(fams.cell_bt[s, ell])
                A = np.vstack([A, coeff[None, :] / bt])
                rhs = np.append(rhs, exit_bound - shift / bt)
                added = True
            if not added:
                return None
        return None

    iterations = phases = superphases = oracle_inv = 0
    # the initializer is itself an oracle pass: its support enters the
    # ledger, so the pass count starts at the greedy rounds it consumed
    passes = cap_rounds(deltaf)
    family_size_max = 0
    phase_lambdas: list[float] = []
    beta_drops = 0
    plateau_ref = math.inf
    plateau_count = 0
    converged = False
    dir_buf: list[tuple] = []
    trace: list[tuple] = []

    while True:
        assert np.all(y <= cvec * (1 + 1e-9) + 1e-9), "capacity violated"
        lam_v = (Vinc @ y) / btv_safe * (btv > 0)
        lam_cells, choices = fams.run(y)
        lam = max(lam_v.max(initial=0.0), float(lam_cells.max(initial=0.0)),
                  lam_p)
        if cfg.trace:
            trace.append((float(lam), float((y - cvec).max(initial=0.0))))
        if lam <= exit_bound:
            converged = True
            break
        if iterations >= (cfg.max_iters if cfg.max_iters is not None
                          else iteration_bound(n_long, deltaf, alpha, LAM0)):
            if cfg.on_limit == "return":
                break
            raise IterationLimit(
                f"no convergence in {iterations} iterations (lambda={lam:.6f})"
            )

        if lam < max(1 + 8 * eps, shrink * lambda_t):
            phase_lambdas.append(lam)
            lambda_t = lam
            phases += 1
        if lam < 1 + 8 * eps:
            superphases += 1
            while lam < 1 + 8 * eps and eps > deltaf:
                eps = max(2 * eps / 3, deltaf)

        # duals on the near-top constraints (common e^(alpha*lambda) factor
        # divided out); every kept cell contributes its argmax structured set
        keep_v = np.nonzero(lam_v > lam - thresh_gap)[0]
        u_v = np.exp(alpha * (lam_v[keep_v] - lam))
        cell_idx = np.argwhere(lam_cells > lam - thresh_gap)
        fam_coeff = np.zeros((len(cell_idx), m))
        fam_shift = np.zeros(len(cell_idx))
        fam_bt = np.zeros(len(cell_idx))
        for r, (s, ell) in enumerate(cell_idx):
            coeff, shift = fams.reconstruct(int(s), int(ell), choices)
            fam_coeff[r] = coeff
            fam_shift[r] = shift
            fam_bt[r] = fams.cell_bt[s, ell]
            assert abs((coeff @ y + shift) / fam_bt[r]
                       - lam_cells[s, ell]) < 1e-6 * max(1.0, lam)
        u_s = np.exp(alpha * (lam_cells[lam_cells > lam - thresh_gap] - lam))
        family_size_max = max(family_size_max, len(u_s))
        gamma = float(u_v.sum() + u_s.sum())

        x = np.zeros(n)
        x[keep_v] = u_v / btv[keep_v]
        fam_z = u_s / fam_bt if len(u_s) else u_s
        shortcost, shiftcost = eta_costs(x, fam_z, fam_coeff, fam_shift, inst)
        assert shiftcost <= gamma / (1 - deltaf) + 1e-9, "shift cost excess"
        f2 = gamma / (1 - deltaf) - shiftcost

        def oracle(rho: float) -> np.ndarray:
            res = iterated_greedy(
                inst, weights=(w - rho * shortcost).tolist(),
                rounds=cap_rounds(deltaf), stop_tol=deltaf / 2,
            )
            nonlocal_passes[0] += res.rounds
            return np.array(res.y, dtype=float)

        nonlocal_passes = [0]
        while True:
            oracle_inv += 1
            sol = solve_budgeted(oracle, w, shortcost, beta, f2, deltaf)
            if sol is not None:
                ytilde = sol.y
                break
            beta *= 1 - deltaf
            beta_drops += 1
            assert beta_drops <= beta_drop_cap, "beta collapsed: bug"
        passes += nonlocal_passes[0]

        t_lam_v = (Vinc @ ytilde) / btv_safe * (btv > 0)
        t_lam_s = ((fam_coeff @ ytilde + fam_shift) / fam_bt
                   if len(fam_bt) else fam_bt)
        if not dir_buf or not np.array_equal(dir_buf[-1][0], ytilde):
            dir_buf.append((ytilde,))
            if len(dir_buf) > 4:
                dir_buf.pop(0)

        sigma = eps / (4 * alpha * LAM0)
        if linesearch:
            # golden-section the max violation over the kept constraints
            # along the fresh direction and along the recent-direction
            # average (see the uncapacitated solver); the exit test and the
            # FAIL accounting are exact regardless of the step taken, so
            # this only affects speed
            base_s = (fam_coeff @ y + fam_shift) / fam_bt if len(fam_bt) else fam_bt
            base = np.concatenate([lam_v, base_s])
            cands = [ytilde]
            dirs = [np.concatenate([t_lam_v, t_lam_s]) - base]
            if len(dir_buf) >= 2:
                avg_y = sum(d[0] for d in dir_buf) / len(dir_buf)
                a_lam_v = (Vinc @ avg_y) / btv_safe * (btv > 0)
                a_lam_s = ((fam_coeff @ avg_y + fam_shift) / fam_bt
                           if len(fam_bt) else fam_bt)
                cands.append(avg_y)
                dirs.append(np.concatenate([a_lam_v, a_lam_s]) - base)
            invphi = (math.sqrt(5) - 1) / 2
            best = (float((base + sigma * dirs[0]).max(initial=0.0)), sigma, 0)
            for di, dvec in enumerate(dirs):
                lo, hi = math.log(sigma), 0.0
                x1 = hi - invphi * (hi - lo)
                x2 = lo + invphi * (hi - lo)
                f1v = float((base + math.exp(x1) * dvec).max(initial=0.0))
                f2v = float((base + math.exp(x2) * dvec).max(initial=0.0))
                for _ in range(32):
                    if f1v <= f2v:
                        hi, x2, f2v = x2, x1, f1v
                        x1 = hi - invphi * (hi - lo)
                        f1v = float((base + math.exp(x1) * dvec).max(initial=0.0))
                    else:
                        lo, x1, f1v = x1, x2, f2v
                        x2 = lo + invphi * (hi - lo)
                        f2v = float((base + math.exp(x2) * dvec).max(initial=0.0))
                s = math.exp((lo + hi) / 2)
                g = float((base + s * dvec).max(initial=0.0))
                if g < best[0]:
                    best = (g, s, di)
            sigma = best[1]
            if best[2] == 1:
                ytilde = cands[1]
        y = (1 - sigma) * y + sigma * ytilde
        iterations += 1

        if adaptive:
            plateau_count += 1
            if lam < plateau_ref - deltaf ** 2 / 4:
                plateau_ref = lam
                plateau_count = 0
            elif plateau_count >= min(500 * alpha / alpha0, 1000):
                if alpha < alpha_cap:
                    alpha = min(2 * alpha, alpha_cap)
                    dir_buf.clear()
                else:
                    # alpha is maxed and lambda still will not move; jump to
                    # the restricted-LP point at the exit level (dropping
                    # beta first when the LP certifies it unreachable there)
                    rescued = _rescue_lp(beta)
                    if rescued is not None:
                        ystar, drops = rescued
                        for _ in range(drops):
                            beta *= 1 - deltaf
                            beta_drops += 1
                            assert beta_drops <= beta_drop_cap, \
                                "beta collapsed: bug"
                        y = ystar
                        dir_buf.clear()
                plateau_ref = lam
                plateau_count = 0

    scale = (1 - deltaf) / (1 + 8 * deltaf) if converged else 1.0
    y_out = scale * y
    ledger = float(np.sum(w[y_out > 1e-12] * cvec[y_out > 1e-12]))
    return CapSolveResult(
        y_out, float(w @ y_out), beta, lam, iterations, phases, superphases,
        passes, oracle_inv, family_size_max, alpha, converged,
        ledger, passes, phase_lambdas, trace,
    )
