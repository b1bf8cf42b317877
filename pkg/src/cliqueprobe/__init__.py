"""Standalone MIP presolving engine: standard probing and clique probing.

Tentatively fixes binary variables (or whole clique assignments), propagates
each case, and derives permanent fixings, bound changes, substitutions and
implications, recorded as transactions and applied in a validity-checked
sweep.  A CLI compares the two probing modes on MPS instances.
"""

from .cliques import Clique, CliqueKind, CliqueScore, detect_cliques, score_cliques, \
    select_cliques
from .clique_probing import (BoundTracker, CliqueAssignment, CliqueProbeResult,
                             CliqueProbingConfig, CliqueProbingRun, CliqueRunRecord,
                             SubstitutionTracker, assignment_fixings, init_trackers,
                             max_potential_reductions, merge_trackers, probe_single_clique,
                             run_clique_probing, update_trackers)
from .cli import main, run_probing_mode
from .model import (FEAS_TOL, INF, LOWER, UPPER, ApplyResult, BoundChange, CliqueUpgrade,
                    Constraint, Fixing, GlobalInfeasible, Implication, Ledger, ObjSense,
                    Problem, ProblemError, Substitution, Transaction, VarKind, Variable,
                    apply_transactions, build_problem)
from .mps_io import (MpsParseError, RunReport, make_report, parse_mps, parse_report,
                     read_reports, write_report)
from .probing import (ProbeOutcome, ProbingLimits, ScoreVector, StandardProbingRun,
                      probe_variable, run_standard_probing, score_variables,
                      sorted_candidates)
from .propagate import (DomainState, PropagationResult, improves_lower, improves_upper,
                        propagate_row, propagate_to_fixpoint, row_activity)

__all__ = [
    "ApplyResult", "BoundChange", "BoundTracker", "Clique", "CliqueAssignment",
    "CliqueKind", "CliqueProbeResult", "CliqueProbingConfig", "CliqueProbingRun",
    "CliqueRunRecord", "CliqueScore", "CliqueUpgrade", "Constraint", "DomainState",
    "FEAS_TOL", "Fixing", "GlobalInfeasible", "INF", "Implication", "LOWER", "Ledger",
    "MpsParseError", "ObjSense", "ProbeOutcome", "ProbingLimits", "Problem",
    "ProblemError", "PropagationResult", "RunReport", "ScoreVector",
    "StandardProbingRun", "Substitution", "SubstitutionTracker", "Transaction", "UPPER",
    "VarKind", "Variable", "apply_transactions", "assignment_fixings", "build_problem",
    "detect_cliques", "improves_lower", "improves_upper", "init_trackers", "main",
    "make_report", "max_potential_reductions", "merge_trackers", "parse_mps",
    "parse_report", "probe_single_clique", "probe_variable", "propagate_row",
    "propagate_to_fixpoint", "read_reports", "row_activity", "run_clique_probing",
    "run_probing_mode", "run_standard_probing", "score_cliques", "score_variables",
    "select_cliques", "sorted_candidates", "update_trackers", "write_report",
]

__version__ = "0.1.0"
