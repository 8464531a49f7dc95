"""Approximate maximum weight b-matching and capacitated b-matching.

A (1-delta)-approximation for the fractional and integral problems on
general graphs: a thresholded primal-dual loop over the odd-set LP, exact
violated-odd-set separation, linear-time greedy initializers, Lagrangian
budget search, and blossom-backed rounding, plus brute-force reference
oracles for verification at test scale.
"""

from .core import (
    Instance,
    OddSet,
    ViolationReport,
    as_dict,
    check_lp1_feasibility,
    format_instance,
    from_dict,
    load_instance,
    objective,
    objective_exact,
    parse_instance,
    perturbed_oddset_bound,
    perturbed_vertex_bound,
    violation_report,
)
from .cuttree import CutTree, build_low_cut_tree, maximal_oddset_collection, min_cut
from .oddsets import find_violated_family
from .greedy import (
    GreedyResult,
    IteratedGreedyResult,
    default_rounds,
    greedy_bmatching,
    iterated_greedy,
)
from .budget import BudgetedSolution, max_calls, solve_budgeted
from .solver import (
    IterationLimit,
    SolveResult,
    SolverConfig,
    initial_solution,
    iteration_bound,
    solve,
)
from .capsolver import (
    CapSolveResult,
    LongInstance,
    cap_lambda0,
    cap_rounds,
    eta_costs,
    solve_cap,
    to_long,
    unperturb_cap,
    ylong,
    yshort,
)
from .rounding import RoundingResult, max_weight_matching, round_cap, round_uncap
from .reference import (
    OracleResult,
    brute_force_bmatching,
    brute_force_violated_oddsets,
    exact_bmatching,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
