"""Command-line driver: load an MPS instance, probe, emit reduction reports.

Modes: ``default`` runs standard probing on every scored binary; ``clique``
runs clique probing first and resumes standard probing on the binaries it did
not touch; ``both`` runs the two pipelines on independent copies and writes
one report record per mode, so runs can be compared side by side.

Exit codes: 0 success, 1 input error, 2 detected infeasibility.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .clique_probing import CliqueProbingConfig, run_clique_probing
from .cliques import detect_cliques
from .model import Ledger, Problem
from .mps_io import MpsParseError, RunReport, make_report, parse_mps, write_report
from .probing import (ProbingLimits, ScoreFunction, run_standard_probing, score_variables,
                      sorted_candidates)

MODES = ("default", "clique", "both")


@dataclass
class ModeOutcome:
    ledger: Ledger
    clique_records: list
    infeasible: bool


def run_probing_mode(problem: Problem, mode: str,
                     config: Optional[CliqueProbingConfig] = None,
                     limits: Optional[ProbingLimits] = None,
                     score_fn: ScoreFunction = score_variables) -> ModeOutcome:
    """Run one probing pipeline on the problem and return its merged ledger."""
    config = config or CliqueProbingConfig()
    limits = limits or ProbingLimits()
    budget = limits.work_budget
    if budget is None:
        budget = 10 * problem.num_constraints
    scores = score_fn(problem)
    ledger = Ledger()
    records: list = []

    if mode == "clique":
        cliques = detect_cliques(problem)
        clique_run = run_clique_probing(problem, cliques, scores, config,
                                        work_budget=budget)
        ledger.extend(clique_run.ledger)
        records = clique_run.records
        if ledger.has_global_infeasible:
            return ModeOutcome(ledger, records, True)
        follow_up = [
            j for j in sorted_candidates(scores)
            if j in clique_run.remaining and not clique_run.bounds.is_fixed(j)
        ]
        remaining_budget = max(budget - ledger.propagations, 0)
        follow_limits = ProbingLimits(
            max_variables=limits.max_variables,
            stall_window=limits.stall_window,
            min_successes=limits.min_successes,
            work_budget=remaining_budget,
        )
        standard = run_standard_probing(problem, follow_up, follow_limits,
                                        bounds=clique_run.bounds)
        ledger.extend(standard.ledger)
    elif mode == "default":
        limits = ProbingLimits(limits.max_variables, limits.stall_window,
                               limits.min_successes, budget)
        standard = run_standard_probing(problem, sorted_candidates(scores), limits)
        ledger.extend(standard.ledger)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    return ModeOutcome(ledger, records, ledger.has_global_infeasible)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cliqueprobe",
        description="Probe an MPS instance and report the reductions found.",
    )
    parser.add_argument("input", help="MPS instance file")
    parser.add_argument("--mode", choices=MODES, default="both",
                        help="probing pipeline to run (default: both)")
    parser.add_argument("--report", default="-",
                        help="report file, one JSON object per run ('-' = stdout)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed reserved for randomized tie-breaking strategies")
    parser.add_argument("--max-clique-size", type=int, default=150)
    parser.add_argument("--max-clique-vars", type=int, default=3000,
                        help="total clique members probed in a single run")
    parser.add_argument("--batch-size", type=int, default=2,
                        help="initial clique batch size; batches double afterwards")
    parser.add_argument("--min-reds-per-prop", type=float, default=3.0,
                        help="reductions per propagation below which a clique "
                             "call counts as unsuccessful")
    parser.add_argument("--streak", type=int, default=2,
                        help="consecutive unsuccessful clique calls before stopping")
    parser.add_argument("--overlap", type=float, default=0.5,
                        help="skip cliques overlapping selected members by more than this")
    parser.add_argument("--delta", type=int, default=1,
                        help="abort a clique when at most this many reductions remain")
    parser.add_argument("--stall-window", type=int, default=10)
    parser.add_argument("--min-successes", type=int, default=1)
    parser.add_argument("--max-probe-vars", type=int, default=None,
                        help="cap on variables probed by standard probing")
    parser.add_argument("--work-budget", type=int, default=None,
                        help="propagation-call budget shared by both phases "
                             "(default: 10 per constraint)")
    return parser


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    parser.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.overlap < 0 or args.overlap > 1:
        print("error: --overlap must lie in [0, 1]", file=sys.stderr)
        return 1

    try:
        with open(args.input, "rb") as handle:
            raw = handle.read()
    except OSError as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return 1
    digest = hashlib.sha256(raw).hexdigest()
    try:
        problem = parse_mps(raw.decode("utf-8"))
    except (MpsParseError, UnicodeDecodeError, ValueError) as exc:
        print(f"error: {args.input}: {exc}", file=sys.stderr)
        return 1

    config = CliqueProbingConfig(
        abort_threshold=args.delta,
        overlap_ratio=args.overlap,
        max_clique_size=args.max_clique_size,
        max_total_vars=args.max_clique_vars,
        initial_batch_size=args.batch_size,
        unsuccessful_streak_limit=args.streak,
        min_reductions_per_propagation=args.min_reds_per_prop,
    )
    limits = ProbingLimits(
        max_variables=args.max_probe_vars,
        stall_window=args.stall_window,
        min_successes=args.min_successes,
        work_budget=args.work_budget,
    )
    instance = problem.name or args.input

    modes = ["default", "clique"] if args.mode == "both" else [args.mode]
    reports: List[RunReport] = []
    any_infeasible = False
    for mode in modes:
        target = copy.deepcopy(problem) if args.mode == "both" else problem
        start = time.perf_counter()
        outcome = run_probing_mode(target, mode, config, limits)
        elapsed = time.perf_counter() - start
        any_infeasible = any_infeasible or outcome.infeasible
        reports.append(
            make_report(instance, mode, elapsed, outcome.ledger,
                        outcome.clique_records, outcome.infeasible, digest)
        )

    lines = "".join(write_report(r) + "\n" for r in reports)
    if args.report == "-":
        sys.stdout.write(lines)
    else:
        try:
            with open(args.report, "w", encoding="utf-8") as handle:
                handle.write(lines)
        except OSError as exc:
            print(f"error: cannot write {args.report}: {exc}", file=sys.stderr)
            return 1

    return 2 if any_infeasible else 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
