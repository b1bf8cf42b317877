"""Standard single-variable probing.

Each candidate binary is tentatively fixed to 0 and to 1 and both results are
propagated.  One infeasible side fixes the variable to the other value; two
consistent sides yield global bound updates from the union of the two domains,
a substitution when both sides pin a variable to different values, and
one-sided implications.  Outcomes are applied eagerly between probes so later
probes start better informed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from .cliques import classify_clique_row
from .model import (LOWER, UPPER, BoundChange, Fixing, GlobalInfeasible, Implication,
                    Ledger, Problem, Substitution, Transaction)
from .propagate import (DomainState, PropagationResult, improves_lower, improves_upper,
                        propagate_to_fixpoint)

ScoreVector = Dict[int, float]
ScoreFunction = Callable[[Problem], ScoreVector]

#: weight of a clique-row membership in the variable score
CLIQUE_BONUS = 0.5


@dataclass
class ProbingLimits:
    """Termination knobs for a probing run.

    ``max_variables=None`` probes every candidate, ``work_budget=None``
    defaults to 10 propagation calls per constraint.  A run stalls when the
    last ``stall_window`` probes produced fewer than ``min_successes``
    reductions in total (implications do not count as successes).
    """

    max_variables: Optional[int] = None
    stall_window: int = 10
    min_successes: int = 1
    work_budget: Optional[int] = None


@dataclass
class ProbeOutcome:
    variable: int
    result0: PropagationResult
    result1: PropagationResult
    transactions: List[Transaction]

    @property
    def reductions(self) -> int:
        return sum(
            isinstance(tx, (Fixing, BoundChange, Substitution)) for tx in self.transactions
        )


def score_variables(problem: Problem) -> ScoreVector:
    """Impact proxy per unfixed binary: column count plus a clique bonus.

    score(x) = nonzeros in x's column + 0.5 * number of clique rows containing
    x.  Pluggable: any callable producing a {var: score} map can replace it.
    """
    clique_rows = {
        cons.index
        for cons in problem.constraints
        if classify_clique_row(cons, problem) is not None
    }
    scores: ScoreVector = {}
    for var in problem.variables:
        if not var.is_binary or var.lower == var.upper:
            continue
        column = problem.columns[var.index]
        bonus = sum(1 for ci, _ in column if ci in clique_rows)
        scores[var.index] = float(len(column)) + CLIQUE_BONUS * bonus
    return scores


def sorted_candidates(scores: ScoreVector) -> List[int]:
    """Candidates by descending score, ties broken by ascending index."""
    return sorted(scores, key=lambda j: (-scores[j], j))


def probe_variable(problem: Problem, bounds: DomainState, var: int) -> ProbeOutcome:
    """Probe one binary variable: two propagation calls plus rule evaluation."""
    result0 = propagate_to_fixpoint(problem, bounds, [(var, 0.0)])
    result1 = propagate_to_fixpoint(problem, bounds, [(var, 1.0)])
    transactions: List[Transaction] = []

    if result0.infeasible and result1.infeasible:
        transactions.append(GlobalInfeasible())
        return ProbeOutcome(var, result0, result1, transactions)
    if result0.infeasible:
        transactions.append(Fixing(var, 1.0))
        return ProbeOutcome(var, result0, result1, transactions)
    if result1.infeasible:
        transactions.append(Fixing(var, 0.0))
        return ProbeOutcome(var, result0, result1, transactions)

    lo0, up0 = result0.bounds.lower, result0.bounds.upper
    lo1, up1 = result1.bounds.lower, result1.bounds.upper
    integral = problem.integral
    n = problem.num_variables

    bound_changes: List[Transaction] = []
    substitutions: List[Transaction] = []
    implications: List[Transaction] = []
    for j in range(n):
        if j == var:
            continue
        new_lower = min(lo0[j], lo1[j])
        new_upper = max(up0[j], up1[j])
        if improves_lower(bounds.lower[j], new_lower, integral[j]):
            bound_changes.append(BoundChange(j, LOWER, float(new_lower)))
        if improves_upper(bounds.upper[j], new_upper, integral[j]):
            bound_changes.append(BoundChange(j, UPPER, float(new_upper)))
        if lo0[j] == up0[j] and lo1[j] == up1[j] and lo0[j] != lo1[j]:
            substitutions.append(
                Substitution(j, float(lo0[j]), float(lo1[j] - lo0[j]), var)
            )
        # one-sided deductions stronger than the two-sided union
        for assignment, (lo_s, up_s) in ((0, (lo0, up0)), (1, (lo1, up1))):
            if lo_s[j] > new_lower and improves_lower(bounds.lower[j], lo_s[j], integral[j]):
                implications.append(Implication(var, assignment, j, LOWER, float(lo_s[j])))
            if up_s[j] < new_upper and improves_upper(bounds.upper[j], up_s[j], integral[j]):
                implications.append(Implication(var, assignment, j, UPPER, float(up_s[j])))

    transactions.extend(bound_changes)
    transactions.extend(substitutions)
    transactions.extend(implications)
    return ProbeOutcome(var, result0, result1, transactions)


@dataclass
class StandardProbingRun:
    ledger: Ledger
    bounds: DomainState
    probed: List[int]


def run_standard_probing(problem: Problem, candidates: Sequence[int],
                         limits: ProbingLimits,
                         bounds: Optional[DomainState] = None) -> StandardProbingRun:
    """Probe candidates in order, applying each outcome before the next probe.

    Stops at the variable cap, an exhausted work budget (2 propagation calls
    per probed variable), global infeasibility, or a stall.  Candidates fixed
    by earlier outcomes are skipped without consuming budget.
    """
    state = bounds.copy() if bounds is not None else DomainState.from_problem(problem)
    budget = limits.work_budget
    if budget is None:
        budget = 10 * problem.num_constraints
    ledger = Ledger()
    probed: List[int] = []
    history: deque = deque(maxlen=max(limits.stall_window, 1))

    for var in candidates:
        if limits.max_variables is not None and len(probed) >= limits.max_variables:
            break
        if ledger.propagations + 2 > budget:
            break
        if state.is_fixed(var):
            continue
        outcome = probe_variable(problem, state, var)
        ledger.record_propagations(2)
        probed.append(var)

        infeasible = False
        for tx in outcome.transactions:
            ledger.record(tx)
            if isinstance(tx, Fixing):
                state.lower[tx.var] = state.upper[tx.var] = tx.value
            elif isinstance(tx, BoundChange):
                if tx.side == LOWER:
                    state.lower[tx.var] = tx.value
                else:
                    state.upper[tx.var] = tx.value
            elif isinstance(tx, GlobalInfeasible):
                infeasible = True
        if infeasible:
            break

        history.append(outcome.reductions)
        if len(history) == limits.stall_window and sum(history) < limits.min_successes:
            break

    return StandardProbingRun(ledger, state, probed)


def all_probing_candidates(problem: Problem, scores: Optional[ScoreVector] = None,
                           bounds: Optional[DomainState] = None) -> List[int]:
    """Every unfixed binary, sorted by descending score."""
    if scores is None:
        scores = score_variables(problem)
    if bounds is not None:
        scores = {j: s for j, s in scores.items() if not bounds.is_fixed(j)}
    return sorted_candidates(scores)
