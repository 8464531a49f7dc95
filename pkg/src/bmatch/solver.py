"""Fractional uncapacitated b-matching FPTAS.

Primal-dual loop with thresholded dual weights: each iteration finds the
near-maximally violated constraints (vertices and small odd sets), puts
exponential weights on them only, and asks a Lagrangian budget search --
backed by the linear-time greedy -- for a direction that keeps the objective
at beta while its weighted violation stays near gamma.  The iterate moves by
a small convex step; when the maximum violation ratio lambda drops to
1 + 8*delta, scaling by (1-delta)/(1+8*delta) lands inside the full odd-set
polytope.

The aggressiveness knob alpha trades step size for dual focus: lambda can
only be driven down to about (average violation) + ln(#constraints)/alpha,
while the step size shrinks as 1/alpha.  The exit test and the FAIL
accounting are exact regardless of alpha, so correctness never depends on
it; the default picks ln(#constraints) divided by a fraction of the exit
margin and doubles whenever lambda still plateaus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional

import numpy as np

from .budget import solve_budgeted
from .core import Instance, perturbed_oddset_bound
from .greedy import greedy_bmatching
from .oddsets import find_violated_family

LAMBDA0 = 12.0


class IterationLimit(RuntimeError):
    """The solve loop hit its iteration cap (config.max_iters or the safety
    bound); indicates a bug or a deliberately truncated run."""


@dataclass
class SolverConfig:
    alpha: Optional[float] = None        # None: auto from constraint count
    phase_shrink: Optional[float] = None # lambda_t decay marking a phase end;
                                         # None: 1 - delta
    max_iters: Optional[int] = None
    on_limit: str = "error"              # "error" | "return" (partial result)
    family_method: str = "auto"          # auto | enumerate | oracle
    threads: int = 1
    shuffle_seed: Optional[int] = None   # permutes greedy edge order
    trace: bool = False                  # per-iteration lambda/psi/tail trace
    # dual threshold window f(delta): constraints with lambda_ell in
    # (lambda - window, lambda] carry dual weight.  Any window in
    # [delta^3/10, delta] is sound; None picks delta (widest), which lets a
    # moderate alpha separate the near-top constraints
    threshold_window: Optional[float] = None
    # "linesearch": per-iteration 1-D minimization of the max violation
    # along the mixing segment (never worse than the fixed step, which is
    # always a candidate); "paper": fixed sigma = eps/(4*alpha*lambda0)
    step: str = "linesearch"


@dataclass
class SolveResult:
    y: np.ndarray                 # unperturbed output (feasible for LP1)
    objective: float
    beta_final: float
    lambda_final: float
    iterations: int
    phases: int
    superphases: int
    passes: int                   # greedy invocations inside budget searches
    oracle_invocations: int       # budget searches actually run
    family_size_max: int
    alpha_final: float
    converged: bool
    phase_lambdas: list = field(default_factory=list)
    trace: list = field(default_factory=list)  # (lambda, log_psi, log_tail, log_gamma)


def iteration_bound(n: int, delta: float, alpha: float, lambda0: float = LAMBDA0) -> int:
    return math.ceil(
        10 * lambda0 * (math.log(4 * n) / delta ** 2
                        + alpha / delta + alpha * math.log(lambda0))
    )


def oddset_universe_masks(inst: Instance, delta: Fraction):
    """Edge-incidence rows for every odd set with b-norm in [3, 1/delta].

    Returns (sets, btilde, M) where M[k] is the 0/1 edge mask of set k.
    Only usable at enumeration scale; the solver falls back to the cut-tree
    oracle beyond it.
    """
    limit = int(Fraction(1) / Fraction(delta))
    verts = [i for i in range(inst.n) if inst.b[i] >= 1]
    sets, bt = [], []
    for r in range(1, min(len(verts), limit) + 1):
        for comb in combinations(verts, r):
            nb = sum(inst.b[i] for i in comb)
            if nb % 2 == 1 and 3 <= nb <= limit:
                sets.append(frozenset(comb))
                bt.append(float(perturbed_oddset_bound(nb, delta)))
    M = np.zeros((len(sets), inst.m))
    for k, u in enumerate(sets):
        for e, (i, j, _) in enumerate(inst.edges):
            if i in u and j in u:
                M[k, e] = 1.0
    return sets, np.array(bt), M


def _edge_mask(inst: Instance, members: frozenset) -> np.ndarray:
    return np.array(
        [1.0 if (i in members and j in members) else 0.0
         for (i, j, _) in inst.edges]
    )


def initial_solution(inst: Instance, delta: float, order=None):
    """lambda0/2 times the greedy: in Q[lambda0], value within [beta*, 6*beta-hat]."""
    g = greedy_bmatching(inst, use_caps=False, order=order)
    y = (LAMBDA0 / 2) * np.array(g.y, dtype=float)
    w = np.array([e[2] for e in inst.edges], dtype=float)
    val = float(w @ y)
    beta = (1 - delta) / (1 - delta / 2) * val
    return y, beta


def solve(inst: Instance, delta, config: Optional[SolverConfig] = None) -> SolveResult:
    cfg = config or SolverConfig()
    deltaf = float(delta)
    delta_exact = Fraction(delta)
    if not 0 < delta_exact <= Fraction(1, 16):
        raise ValueError("delta must be in (0, 1/16]")
    if inst.n >= 1 and deltaf <= 1 / math.sqrt(5 * inst.n):
        import warnings
        warnings.warn("delta at or below 1/sqrt(5n); guarantees may not bind")

    n, m = inst.n, inst.m
    w = np.array([e[2] for e in inst.edges], dtype=float)
    btv = (1 - 4 * deltaf) * np.array(inst.b, dtype=float)  # perturbed b_i
    btv_safe = np.where(btv > 0, btv, 1.0)
    Vinc = np.zeros((n, m))
    for e, (i, j, _) in enumerate(inst.edges):
        Vinc[i, e] = 1.0
        Vinc[j, e] = 1.0

    use_enum = cfg.family_method == "enumerate" or (
        cfg.family_method == "auto" and n <= 16
    )
    if use_enum:
        sets, bt_sets, M = oddset_universe_masks(inst, delta_exact)
        nsets = len(sets)
    else:
        nsets = 0

    order = None
    if cfg.shuffle_seed is not None:
        import random
        order = list(range(m))
        random.Random(cfg.shuffle_seed).shuffle(order)

    y, beta = initial_solution(inst, deltaf, order=order)
    exit_bound = 1 + 8 * deltaf
    if beta <= 0:
        return SolveResult(
            np.zeros(m), 0.0, 0.0, 0.0, 0, phases=0, superphases=0, passes=0,
            oracle_invocations=0, family_size_max=0, alpha_final=0.0,
            converged=True,
        )

    if cfg.alpha is not None:
        alpha = cfg.alpha
    else:
        # enough dual focus to pull lambda within ~2*delta of the budget
        # average, which sits well below the 1+8*delta exit line
        alpha = max(4.0, math.log(max(n + nsets, 3)) / (2 * deltaf))
    # doubling past ~an order of magnitude over the start is self-defeating:
    # the step size shrinks as 1/alpha, so convergence slows faster than the
    # sharper duals help
    alpha_cap = min(50 * deltaf ** -3 * math.log(max(n, 3)), 16 * alpha)
    alpha0 = alpha
    adaptive = cfg.alpha is None
    eps = 1 / 8
    lambda_t = LAMBDA0
    shrink = cfg.phase_shrink if cfg.phase_shrink is not None else 1 - deltaf
    # cut-tree oracle only reports sets within delta^3/10 of the max, so the
    # wide window is an enumeration-mode luxury
    if cfg.threshold_window is not None:
        thresh_gap = float(cfg.threshold_window)
        if not deltaf ** 3 / 10 <= thresh_gap <= deltaf:
            raise ValueError("threshold_window must lie in [delta^3/10, delta]")
    else:
        thresh_gap = deltaf if use_enum else deltaf ** 3 / 10
    if not use_enum:
        thresh_gap = min(thresh_gap, deltaf ** 3 / 10)
    linesearch = cfg.step == "linesearch"
    beta_drop_cap = math.ceil(math.log(LAMBDA0) / -math.log(1 - deltaf)) + 2

    iterations = phases = superphases = passes = oracle_inv = 0
    family_size_max = 0
    phase_lambdas: list[float] = []
    trace: list[tuple] = []
    beta_drops = 0
    plateau_ref = math.inf
    plateau_count = 0
    converged = False
    REFRESH = 4096  # recompute violation vectors from y to cancel drift

    # oracle mode accumulates every odd set the separation oracle ever
    # reports; their images give the line search something to measure (new
    # sets may still appear, but step length is a heuristic -- exactness
    # comes from the per-iteration separation call)
    acc_index: dict[frozenset, int] = {}
    acc_M = np.zeros((0, m))
    acc_bt = np.zeros(0)

    def fresh_views(yv):
        loads = Vinc @ yv
        lv = loads / btv_safe * (btv > 0)
        if use_enum and nsets:
            ls = (M @ yv) / bt_sets
        elif not use_enum and len(acc_bt):
            ls = (acc_M @ yv) / acc_bt
        else:
            ls = np.zeros(0)
        return lv, ls

    # edges pinned to zero because an endpoint has b=0 (loads must stay 0)
    zero_edge = np.array(
        [btv[i] <= 0 or btv[j] <= 0 for (i, j, _) in inst.edges]
    )

    def _rescue_lp(beta_now):
        """Best point at the exit level, found by direct LP.

        The greedy-backed budget search can only mix a handful of greedy
        outputs; on rare instances no such mixture approaches the exit line
        even though the polytope holds far better points, and lambda stalls.
        Solving the (small) restricted LP over the very rows the loop tracks
        either hands back a point at lambda <= 1+8*delta -- from which the
        loop exits -- or certifies that the current beta is unreachable at
        the exit level, which is exactly a FAIL, so beta drops by the same
        accounting.  Returns (ystar, drops) or None.
        """
        from scipy.optimize import linprog

        bounds = [(0.0, 0.0) if zero_edge[e] else (0.0, None)
                  for e in range(m)]
        vrows = [i for i in range(n) if btv[i] > 0]
        R = Vinc[vrows] / btv[vrows, None]
        known: list[frozenset] = []
        if use_enum:
            if nsets:
                R = np.vstack([R, M / bt_sets[:, None]])
            rounds = 1
        else:
            rounds = 2 * n + 2
        for _ in range(rounds):
            res = linprog(-w, A_ub=R, b_ub=np.full(R.shape[0], exit_bound),
                          bounds=bounds)
            if not res.success:
                return None
            ystar = np.maximum(res.x, 0.0)
            rep = (None if use_enum
                   else find_violated_family(ystar, inst, delta_exact,
                                             threads=cfg.threads))
            lv, ls = fresh_views(ystar)
            lamstar = max(lv.max(initial=0.0), ls.max(initial=0.0))
            if rep is not None:
                lamstar = max(lamstar, rep.lam)
            if lamstar > exit_bound:
                if lamstar <= exit_bound * (1 + 1e-9) or use_enum:
                    ystar = ystar * (exit_bound / lamstar)  # float slack only
                else:
                    new = [u for u, _ in rep.family if u not in known]
                    if not new:
                        return None
                    known.extend(new)
                    R = np.vstack(
                        [R] + [
                            _edge_mask(inst, u)
                            / float(perturbed_oddset_bound(
                                sum(inst.b[v] for v in u), delta_exact))
                            for u in new
                        ]
                    )
                    continue
            wval = float(w @ ystar)
            drops = 0
            while (1 - deltaf) * beta_now > wval * (1 + 1e-12):
                beta_now *= 1 - deltaf
                drops += 1
            return ystar, drops
        return None

    lam_v, lam_sets = fresh_views(y)
    # cached oracle direction and its constraint images
    c_y = None
    c_lam_v = c_lam_sets = None
    c_wval = 0.0
    # recent distinct oracle directions for averaged line search; every entry
    # keeps its value at (1-delta)*beta of its time, and beta only decreases,
    # so old entries never violate the value bound
    dir_buf: list[tuple] = []

    while True:
        if use_enum:
            lam = max(lam_v.max(initial=0.0), lam_sets.max(initial=0.0))
            if lam <= exit_bound:
                lam_v, lam_sets = fresh_views(y)  # cancel incremental drift
                lam = max(lam_v.max(initial=0.0), lam_sets.max(initial=0.0))
                if lam <= exit_bound:
                    converged = True
                    break
            keep_s = (
                np.nonzero(lam_sets > lam - thresh_gap)[0]
                if nsets else np.array([], dtype=int)
            )
            fam_lams = lam_sets[keep_s]
            fam_bt = bt_sets[keep_s]
        else:
            # the exact separation call dominates the iteration cost, so run
            # it periodically and whenever the cheap accumulated view claims
            # the exit line is reached (exit is always certified exactly);
            # in between, the duals run over the accumulated rows
            lam_acc = max(lam_v.max(initial=0.0), lam_sets.max(initial=0.0))
            if lam_acc <= exit_bound or iterations % 16 == 0:
                rep = find_violated_family(y, inst, delta_exact,
                                           threads=cfg.threads)
                lam = max(rep.lam, lam_v.max(initial=0.0))
                if lam <= exit_bound:
                    converged = True
                    break
                fam = [(u, lu) for (u, lu) in rep.family
                       if lu > lam - thresh_gap]
                fam_lams = np.array([lu for _, lu in fam])
                fam_bt = np.array(
                    [float(perturbed_oddset_bound(sum(inst.b[v] for v in u),
                                                  delta_exact))
                     for u, _ in fam]
                )
                fam_rows = (
                    np.vstack([_edge_mask(inst, u) for u, _ in fam])
                    if fam else np.zeros((0, m))
                )
                new_sets = [u for u, _ in rep.family if u not in acc_index]
                if new_sets:
                    for u in new_sets:
                        acc_index[u] = len(acc_index)
                    acc_M = np.vstack(
                        [acc_M] + [_edge_mask(inst, u) for u in new_sets]
                    )
                    acc_bt = np.append(acc_bt, [
                        float(perturbed_oddset_bound(
                            sum(inst.b[v] for v in u), delta_exact))
                        for u in new_sets
                    ])
                    lam_v, lam_sets = fresh_views(y)
                    dir_buf.clear()  # buffered images lack the new rows
                    c_y = None
            else:
                lam = lam_acc
                keep_acc = np.nonzero(lam_sets > lam - thresh_gap)[0]
                fam_lams = lam_sets[keep_acc]
                fam_bt = acc_bt[keep_acc]
                fam_rows = acc_M[keep_acc]
        family_size_max = max(family_size_max, len(fam_lams))

        if cfg.trace and use_enum:
            from scipy.special import logsumexp
            all_lams = np.concatenate([lam_v, lam_sets])
            kept_mask = all_lams > lam - thresh_gap
            dropped = all_lams[~kept_mask]
            trace.append((
                lam,
                logsumexp(alpha * all_lams),
                logsumexp(alpha * dropped) if dropped.size else -math.inf,
                logsumexp(alpha * all_lams[kept_mask]),
            ))

        if iterations >= (cfg.max_iters if cfg.max_iters is not None
                          else iteration_bound(n, deltaf, alpha)):
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

        # duals, with the common factor e^(alpha*lambda) divided out --
        # the budget search is invariant to that scale
        keep_v = np.nonzero(lam_v > lam - thresh_gap)[0]
        u_v = np.exp(alpha * (lam_v[keep_v] - lam))
        u_s = np.exp(alpha * (fam_lams - lam))
        gamma = float(u_v.sum() + u_s.sum())
        f2 = gamma / (1 - deltaf)
        xv = u_v / btv[keep_v]
        zs = u_s / fam_bt if len(u_s) else u_s

        reused = False
        if (use_enum and not linesearch and c_y is not None
                and c_wval >= (1 - deltaf) * beta):
            # h' c_y without materializing h: x_i (V c_y)_i = u_i c_lam_v_i
            # and likewise for sets, since the b-tilde factors cancel
            hc = float(u_v @ c_lam_v[keep_v]) if len(keep_v) else 0.0
            if len(u_s):
                hc += float(u_s @ c_lam_sets[keep_s])
            if hc <= f2:
                ytilde = c_y
                t_lam_v, t_lam_sets = c_lam_v, c_lam_sets
                reused = True

        if not reused:
            h = Vinc[keep_v].T @ xv if len(keep_v) else np.zeros(m)
            if len(u_s):
                h = h + (M[keep_s].T @ zs if use_enum else fam_rows.T @ zs)

            def oracle(rho: float) -> np.ndarray:
                res = greedy_bmatching(
                    inst, weights=(w - rho * h).tolist(),
                    use_caps=False, order=order,
                )
                return (LAMBDA0 / 2) * np.array(res.y, dtype=float)

            while True:
                oracle_inv += 1
                sol = solve_budgeted(oracle, w, h, beta, f2, deltaf)
                if sol is not None:
                    passes += sol.calls
                    ytilde = sol.y
                    break
                passes += 1
                beta *= 1 - deltaf
                beta_drops += 1
                assert beta_drops <= beta_drop_cap, "beta collapsed: bug"
            t_lam_v, t_lam_sets = fresh_views(ytilde)
            c_y, c_lam_v, c_lam_sets, c_wval = (
                ytilde, t_lam_v, t_lam_sets, float(w @ ytilde),
            )

        if not reused:
            if not dir_buf or not np.array_equal(dir_buf[-1][0], ytilde):
                dir_buf.append((ytilde, t_lam_v, t_lam_sets, c_wval))
                if len(dir_buf) > 4:
                    dir_buf.pop(0)

        sigma = eps / (4 * alpha * LAMBDA0)
        if linesearch:
            # the mixed max violation is convex in sigma, hence unimodal in
            # log(sigma); golden-section along the fresh direction AND along
            # the average of recent directions (oracle answers tend to
            # alternate between a few polytope vertices, and their mean cuts
            # through the zig-zag).  Either move is legal: every buffered
            # direction lies in Q[lambda0] with value >= (1-delta)*beta, and
            # beta only ever decreases.  The fixed step along the fresh
            # direction stays as the fallback, so this is never worse
            base = (np.concatenate([lam_v, lam_sets])
                    if lam_sets.size else lam_v)
            cands = [(t_lam_v, t_lam_sets, ytilde)]
            fresh = (np.concatenate([t_lam_v, t_lam_sets])
                     if lam_sets.size else t_lam_v)
            dirs = [fresh - base]
            if len(dir_buf) >= 2:
                avg_y = sum(d[0] for d in dir_buf) / len(dir_buf)
                avg_v = sum(d[1] for d in dir_buf) / len(dir_buf)
                avg_s = sum(d[2] for d in dir_buf) / len(dir_buf)
                cands.append((avg_v, avg_s, avg_y))
                av = (np.concatenate([avg_v, avg_s])
                      if lam_sets.size else avg_v)
                dirs.append(av - base)

            invphi = (math.sqrt(5) - 1) / 2
            best = (float((base + sigma * dirs[0]).max(initial=0.0)),
                    sigma, 0)
            for di, dvec in enumerate(dirs):
                # only ever lengthen the step: shortening it can stall
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
            if best[2] > 0:
                t_lam_v, t_lam_sets, ytilde = cands[best[2]]
        y = (1 - sigma) * y + sigma * ytilde
        lam_v = (1 - sigma) * lam_v + sigma * t_lam_v
        if lam_sets.size:
            lam_sets = (1 - sigma) * lam_sets + sigma * t_lam_sets
        iterations += 1
        if iterations % REFRESH == 0:
            lam_v, lam_sets = fresh_views(y)

        if adaptive:
            # double alpha when lambda stalls; the guarantees don't depend
            # on alpha, only progress speed does.  Legitimate progress slows
            # as 1/alpha, so the observation window stretches with alpha --
            # otherwise each doubling triggers the next one spuriously
            plateau_count += 1
            if lam < plateau_ref - deltaf ** 2 / 4:
                plateau_ref = lam
                plateau_count = 0
            elif plateau_count >= min(500 * alpha / alpha0, 1000):
                if alpha < alpha_cap:
                    alpha = min(2 * alpha, alpha_cap)
                    # sharper duals change the oracle's answers; directions
                    # collected under the old duals just steer back into
                    # the rut
                    dir_buf.clear()
                else:
                    # alpha is maxed and lambda still will not move: the
                    # budget search has run out of useful directions.  Jump
                    # to the restricted-LP point at the exit level (dropping
                    # beta first if the LP certifies it unreachable there)
                    rescued = _rescue_lp(beta)
                    if rescued is not None:
                        ystar, drops = rescued
                        for _ in range(drops):
                            beta *= 1 - deltaf
                            beta_drops += 1
                            assert beta_drops <= beta_drop_cap, \
                                "beta collapsed: bug"
                        y = ystar
                        lam_v, lam_sets = fresh_views(y)
                        c_y = None
                        dir_buf.clear()
                plateau_ref = lam
                plateau_count = 0

    scale = (1 - deltaf) / (1 + 8 * deltaf) if converged else 1.0
    y_out = scale * y
    return SolveResult(
        y_out, float(w @ y_out), beta, lam, iterations, phases, superphases,
        passes, oracle_inv, family_size_max, alpha, converged,
        phase_lambdas, trace,
    )
