"""Command-line front-end: solve / oracle / round-only with JSON reports.

Exit codes: 0 success, 2 argument or input parse error, 3 delta out of
range, 4 iteration cap hit without convergence.  Reports are canonical JSON
(sorted keys, floats normalized to 12 significant digits) and byte-identical
across reruns with the same inputs and seed; wall_time stays null unless
--timing is given, so timing never breaks reproducibility.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Optional

import numpy as np

from .core import check_lp1_feasibility, load_instance, objective
from .solver import IterationLimit, SolverConfig, solve
from .capsolver import solve_cap
from .rounding import round_cap, round_uncap
from .reference import brute_force_bmatching
from .oddsets import find_violated_family

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DELTA = 3
EXIT_ITER = 4


def _canon(x):
    """Canonical JSON value: floats to 12 significant digits."""
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, np.floating):
        return float(f"{float(x):.12g}")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, dict):
        return {k: _canon(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    return x


def _emit(report: dict, path: Optional[str]) -> None:
    text = json.dumps(_canon(report), sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bmatch",
        description="(1-delta)-approximate maximum weight b-matching",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, delta=True):
        p.add_argument("--input", required=True, help="instance file")
        p.add_argument("--capacitated", action="store_true")
        p.add_argument("--report", help="write the JSON report here")
        p.add_argument("--timing", action="store_true",
                       help="include wall_time in the report")
        if delta:
            p.add_argument("--delta", type=float, required=True)

    p = sub.add_parser("solve", help="fractional or integral solve")
    common(p)
    p.add_argument("--mode", choices=["frac", "int"], default="frac")
    p.add_argument("--verify", choices=["exhaustive", "off"], default="off",
                   help="exhaustive: LP1 feasibility + brute-force ratio")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-family",
                   help="write the output's violation report here (JSON)")

    p = sub.add_parser("oracle", help="exact brute-force optimum")
    common(p, delta=False)

    p = sub.add_parser("round-only", help="round a fractional assignment")
    common(p)
    p.add_argument("--assignment", required=True,
                   help="JSON file: list of per-edge multiplicities")
    p.add_argument("--verify", choices=["exhaustive", "off"], default="off")
    return ap


def run(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code not in (0, None) else EXIT_OK

    try:
        inst = load_instance(args.input)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    if args.capacitated != inst.capacitated:
        print("error: --capacitated flag does not match the instance file",
              file=sys.stderr)
        return EXIT_PARSE

    delta = getattr(args, "delta", None)
    if delta is not None:
        if not 0 < delta <= 1 / 16:
            print(f"error: delta={delta} outside (0, 1/16]; the guarantees "
                  "need delta <= 1/16 and degrade as delta shrinks below "
                  f"1/sqrt(5n) = {1 / math.sqrt(5 * max(inst.n, 1)):.4f}",
                  file=sys.stderr)
            return EXIT_DELTA

    t0 = time.monotonic()
    report: dict = {
        "mode": args.command,
        "delta": delta,
        "wall_time": None,
    }

    if args.command == "oracle":
        res = brute_force_bmatching(inst)
        report["oracle_optimum"] = float(res.value)
        report["assignment"] = [int(v) for v in res.assignment]
    elif args.command == "round-only":
        try:
            with open(args.assignment) as f:
                y = np.asarray(json.load(f), dtype=float)
            if y.shape != (inst.m,):
                raise ValueError("assignment length does not match edge count")
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_PARSE
        rr = (round_cap(y, inst, delta) if inst.capacitated
              else round_uncap(y, inst, delta))
        report["objective"] = float(rr.value)
        report["assignment"] = [float(v) for v in rr.y]
        if args.verify == "exhaustive":
            ok, viol = check_lp1_feasibility(rr.y, inst)
            report["feasibility_verdict"] = "pass" if ok else f"fail: {viol}"
    else:  # solve
        cfg = SolverConfig(
            max_iters=args.max_iters,
            shuffle_seed=args.shuffle_seed,
            threads=args.threads,
        )
        try:
            if inst.capacitated:
                res = solve_cap(inst, delta, cfg)
            else:
                res = solve(inst, delta, cfg)
        except IterationLimit as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ITER
        y = res.y
        report["mode"] = args.mode
        report.update(
            objective=float(res.objective),
            beta_final=float(res.beta_final),
            lambda_final=float(res.lambda_final),
            iterations=res.iterations,
            phases=res.phases,
            superphases=res.superphases,
            passes=res.passes,
            oracle_invocations=res.oracle_invocations,
            family_size_max=res.family_size_max,
            converged=res.converged,
        )
        if inst.capacitated:
            report["support_weight_ledger"] = float(res.support_weight_ledger)
            report["R"] = res.R
        if args.mode == "int":
            rr = (round_cap(y, inst, delta, R_bound=res.R)
                  if inst.capacitated else round_uncap(y, inst, delta))
            y = rr.y
            report["objective"] = float(rr.value)
        report["assignment"] = [float(v) for v in y]
        if args.verify == "exhaustive":
            ok, viol = check_lp1_feasibility(y, inst)
            report["feasibility_verdict"] = "pass" if ok else f"fail: {viol}"
            oracle = brute_force_bmatching(inst)
            report["oracle_optimum"] = float(oracle.value)
            report["ratio"] = (float(report["objective"]) / float(oracle.value)
                               if oracle.value > 0 else None)
        if args.dump_family:
            if inst.capacitated:
                print("error: --dump-family supports uncapacitated solves",
                      file=sys.stderr)
                return EXIT_PARSE
            rep = find_violated_family(np.asarray(y, dtype=float), inst, delta)
            fam = {
                "lambda": float(rep.lam),
                "family": [
                    {"members": sorted(u), "lambda": float(lu)}
                    for u, lu in rep.family
                ],
            }
            with open(args.dump_family, "w") as f:
                json.dump(_canon(fam), f, sort_keys=True, indent=2)
                f.write("\n")

    if args.timing:
        report["wall_time"] = time.monotonic() - t0
    _emit(report, args.report)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
