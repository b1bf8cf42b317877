"""Clique probing: probe all assignments of a clique instead of its variables.

A clique of n binaries admits at most n+1 assignments (n for exactly-one
cliques, where all-zero is excluded), against 2n propagation calls for
standard probing of the same variables.  Per-assignment bounds are folded
into two constant-memory trackers: :class:`BoundTracker` keeps the minimum
lower and maximum upper bound seen per variable, :class:`SubstitutionTracker`
keeps the lowest/second-lowest and highest/second-highest fixed values with
the assignments achieving the extremes.  After the loop the trackers are
analyzed into global bound changes and substitutions; between assignments
they also yield an upper bound on what is still achievable, used to abort
unpromising cliques early.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .cliques import Clique, CliqueKind, score_cliques, select_cliques
from .model import (INF, LOWER, UPPER, BoundChange, CliqueUpgrade, Fixing,
                    GlobalInfeasible, Ledger, Problem, Substitution)
from .propagate import DomainState, improves_lower, improves_upper, propagate_to_fixpoint


@dataclass(frozen=True)
class CliqueAssignment:
    """One probed assignment: member ``active`` set to 1, the rest to 0.

    ``active=None`` encodes the all-zero assignment, which is only enumerated
    for at-most-one cliques.  The tracker key is 0 for all-zero and the
    1-based member position otherwise.
    """

    clique: int
    active: Optional[int]

    @property
    def key(self) -> int:
        return 0 if self.active is None else self.active + 1


def assignment_fixings(members: Sequence[int], key: int) -> List[Tuple[int, float]]:
    """Fixing list for assignment ``key`` (0 = all members zero)."""
    return [(m, 1.0 if pos + 1 == key else 0.0) for pos, m in enumerate(members)]


class BoundTracker:
    """Componentwise minimum lower / maximum upper bound over assignments.

    Starts at the empty-aggregate identities (+inf / -inf) so the first update
    simply installs that assignment's bounds.
    """

    def __init__(self, num_vars: int) -> None:
        self.min_lower = np.full(num_vars, INF)
        self.max_upper = np.full(num_vars, -INF)

    def update(self, lower: np.ndarray, upper: np.ndarray) -> None:
        np.minimum(self.min_lower, lower, out=self.min_lower)
        np.maximum(self.max_upper, upper, out=self.max_upper)

    def copy(self) -> "BoundTracker":
        other = BoundTracker(len(self.min_lower))
        other.min_lower = self.min_lower.copy()
        other.max_upper = self.max_upper.copy()
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoundTracker):
            return NotImplemented
        return np.array_equal(self.min_lower, other.min_lower) and np.array_equal(
            self.max_upper, other.max_upper
        )


class SubstitutionTracker:
    """Six values per variable for substitution detection.

    Per variable: lowest and second-lowest fixed value with the assignment
    achieving the minimum, the symmetric triple for the maximum, plus a flag
    recording whether every processed assignment fixed the variable.  On equal
    values the second-best cell is updated and the earlier extreme assignment
    is retained.

    ``sub_candidate`` is internal abort-heuristic state: it latches to False
    once a tie has ruled a substitution out and is deliberately excluded from
    equality comparisons and the merge contract.
    """

    def __init__(self, num_vars: int) -> None:
        self.lowest = np.full(num_vars, INF)
        self.second_lowest = np.full(num_vars, INF)
        self.argmin = np.full(num_vars, -1, dtype=np.int64)
        self.highest = np.full(num_vars, -INF)
        self.second_highest = np.full(num_vars, -INF)
        self.argmax = np.full(num_vars, -1, dtype=np.int64)
        self.fixed_in_all = np.ones(num_vars, dtype=bool)
        self.sub_candidate = np.ones(num_vars, dtype=bool)

    def update(self, key: int, lower: np.ndarray, upper: np.ndarray) -> None:
        fixed = lower == upper
        self.fixed_in_all &= fixed
        value = lower

        new_min = fixed & (value < self.lowest)
        tie_min = fixed & (value == self.lowest)
        mid_min = fixed & (value > self.lowest) & (value < self.second_lowest)
        self.second_lowest = np.where(
            new_min | tie_min, self.lowest, np.where(mid_min, value, self.second_lowest)
        )
        self.argmin = np.where(new_min, key, self.argmin)
        self.lowest = np.where(new_min, value, self.lowest)

        new_max = fixed & (value > self.highest)
        tie_max = fixed & (value == self.highest)
        mid_max = fixed & (value < self.highest) & (value > self.second_highest)
        self.second_highest = np.where(
            new_max | tie_max, self.highest, np.where(mid_max, value, self.second_highest)
        )
        self.argmax = np.where(new_max, key, self.argmax)
        self.highest = np.where(new_max, value, self.highest)

        still_open = np.isinf(self.second_lowest) | (self.lowest != self.second_lowest) \
            | (self.highest != self.second_highest)
        self.sub_candidate &= self.fixed_in_all & still_open

    def copy(self) -> "SubstitutionTracker":
        other = SubstitutionTracker(len(self.lowest))
        for name in ("lowest", "second_lowest", "argmin", "highest", "second_highest",
                     "argmax", "fixed_in_all", "sub_candidate"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubstitutionTracker):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("lowest", "second_lowest", "argmin", "highest",
                         "second_highest", "argmax", "fixed_in_all")
        )


def init_trackers(bounds: DomainState) -> Tuple[BoundTracker, SubstitutionTracker]:
    """Fresh trackers sized to the domain, at their empty-aggregate identities."""
    n = len(bounds.lower)
    return BoundTracker(n), SubstitutionTracker(n)


def update_trackers(bound_tracker: BoundTracker, sub_tracker: SubstitutionTracker,
                    key: int, bounds: DomainState
                    ) -> Tuple[BoundTracker, SubstitutionTracker]:
    """Fold one consistently-propagated assignment into both trackers."""
    bound_tracker.update(bounds.lower, bounds.upper)
    sub_tracker.update(key, bounds.lower, bounds.upper)
    return bound_tracker, sub_tracker


def max_potential_reductions(bound_tracker: BoundTracker,
                             sub_tracker: SubstitutionTracker,
                             global_bounds: DomainState) -> int:
    """Upper bound on bound changes and substitutions still achievable.

    Counts, per variable: a possible lower tightening (the tracked minimum can
    only decrease with more assignments), a possible upper tightening, and a
    still-open substitution.  Non-increasing over consistent updates within
    one clique.
    """
    lower_open = bound_tracker.min_lower > global_bounds.lower
    upper_open = bound_tracker.max_upper < global_bounds.upper
    sub_open = sub_tracker.sub_candidate
    return int(lower_open.sum()) + int(upper_open.sum()) + int(sub_open.sum())


def merge_trackers(locals_: Sequence[Tuple[BoundTracker, SubstitutionTracker]]
                   ) -> Tuple[BoundTracker, SubstitutionTracker]:
    """Merge per-worker trackers over disjoint assignment sets of one clique.

    The merge is sequential in batch-position order: on equal extreme values
    the earlier batch keeps its argmin/argmax, so the result equals a single
    tracker that processed all assignments in that order.  The abort latch is
    merged conservatively (AND) and is not part of the merge contract.
    """
    if not locals_:
        raise ValueError("merge_trackers requires at least one local tracker pair")
    acc_b, acc_i = locals_[0][0].copy(), locals_[0][1].copy()
    for nxt_b, nxt_i in locals_[1:]:
        np.minimum(acc_b.min_lower, nxt_b.min_lower, out=acc_b.min_lower)
        np.maximum(acc_b.max_upper, nxt_b.max_upper, out=acc_b.max_upper)

        left_wins = acc_i.lowest <= nxt_i.lowest
        second = np.where(
            left_wins,
            np.minimum(acc_i.second_lowest, nxt_i.lowest),
            np.minimum(nxt_i.second_lowest, acc_i.lowest),
        )
        acc_i.second_lowest = second
        acc_i.argmin = np.where(left_wins, acc_i.argmin, nxt_i.argmin)
        acc_i.lowest = np.where(left_wins, acc_i.lowest, nxt_i.lowest)

        left_wins = acc_i.highest >= nxt_i.highest
        second = np.where(
            left_wins,
            np.maximum(acc_i.second_highest, nxt_i.highest),
            np.maximum(nxt_i.second_highest, acc_i.highest),
        )
        acc_i.second_highest = second
        acc_i.argmax = np.where(left_wins, acc_i.argmax, nxt_i.argmax)
        acc_i.highest = np.where(left_wins, acc_i.highest, nxt_i.highest)

        acc_i.fixed_in_all &= nxt_i.fixed_in_all
        acc_i.sub_candidate &= nxt_i.sub_candidate
    return acc_b, acc_i


@dataclass
class CliqueProbingConfig:
    """Knobs for clique probing, all overridable from the command line.

    ``abort_threshold=None`` disables the early-abort check entirely (useful
    for exhaustive runs and tests).
    """

    abort_threshold: Optional[int] = 1
    overlap_ratio: float = 0.5
    max_clique_size: int = 150
    max_total_vars: int = 3000
    initial_batch_size: int = 2
    unsuccessful_streak_limit: int = 2
    min_reductions_per_propagation: float = 3.0


@dataclass
class CliqueProbeResult:
    ledger: Ledger
    aborted: bool
    bound_tracker: BoundTracker
    sub_tracker: SubstitutionTracker
    propagations: int
    consistent_keys: List[int]
    upgraded: bool


def probe_single_clique(problem: Problem, bounds: DomainState, clique: Clique,
                        config: CliqueProbingConfig,
                        clique_index: int = 0) -> CliqueProbeResult:
    """Probe every assignment of one clique and analyze the trackers.

    For an at-most-one clique the all-zero assignment is propagated first; if
    it is infeasible the clique is upgraded to exactly-one and treated as such
    from then on.  Each member is then set to 1 with the others at 0.  After
    every member propagation the remaining potential is tested against the
    abort threshold; aborting discards the pending tracker analysis but keeps
    fixings and upgrades already recorded.  Infeasible member assignments fix
    that member to 0 and contribute nothing to the trackers.  When no probed
    assignment was consistent the problem is globally infeasible.
    """
    members = clique.members
    ledger = Ledger()
    bound_tracker, sub_tracker = init_trackers(bounds)
    consistent: List[int] = []
    aborted = False
    upgraded = False
    propagations = 0

    if clique.kind is CliqueKind.AT_MOST_ONE:
        result = propagate_to_fixpoint(problem, bounds, assignment_fixings(members, 0))
        propagations += 1
        if result.infeasible:
            ledger.record(CliqueUpgrade(clique_index))
            upgraded = True
        else:
            update_trackers(bound_tracker, sub_tracker, 0, result.bounds)
            consistent.append(0)

    for pos, member in enumerate(members):
        key = pos + 1
        result = propagate_to_fixpoint(problem, bounds, assignment_fixings(members, key))
        propagations += 1
        if config.abort_threshold is not None and max_potential_reductions(
                bound_tracker, sub_tracker, bounds) <= config.abort_threshold:
            aborted = True
            break
        if result.infeasible:
            ledger.record(Fixing(member, 0.0))
        else:
            update_trackers(bound_tracker, sub_tracker, key, result.bounds)
            consistent.append(key)

    if not aborted:
        if consistent:
            _analyze_trackers(problem, bounds, members, bound_tracker, sub_tracker, ledger)
        else:
            ledger.record(GlobalInfeasible())

    ledger.record_propagations(propagations)
    return CliqueProbeResult(ledger, aborted, bound_tracker, sub_tracker, propagations,
                             consistent, upgraded)


def _analyze_trackers(problem: Problem, bounds: DomainState, members: Sequence[int],
                      bound_tracker: BoundTracker, sub_tracker: SubstitutionTracker,
                      ledger: Ledger) -> None:
    """Emit bound changes and substitutions for non-member, unfixed variables."""
    member_set = set(members)
    integral = problem.integral
    eligible = [
        j for j in range(problem.num_variables)
        if j not in member_set and not bounds.is_fixed(j)
    ]
    for j in eligible:
        if improves_lower(bounds.lower[j], bound_tracker.min_lower[j], integral[j]):
            ledger.record(BoundChange(j, LOWER, float(bound_tracker.min_lower[j])))
        if improves_upper(bounds.upper[j], bound_tracker.max_upper[j], integral[j]):
            ledger.record(BoundChange(j, UPPER, float(bound_tracker.max_upper[j])))
    for j in eligible:
        if not sub_tracker.fixed_in_all[j] or np.isinf(sub_tracker.second_lowest[j]):
            continue
        lowest = sub_tracker.lowest[j]
        second_lowest = sub_tracker.second_lowest[j]
        highest = sub_tracker.highest[j]
        second_highest = sub_tracker.second_highest[j]
        if lowest < second_lowest and highest == second_highest \
                and second_lowest == highest:
            outlier_key = int(sub_tracker.argmin[j])
            agreed = float(highest)
            outlier_value = float(lowest)
        elif highest > second_highest and lowest == second_lowest \
                and second_highest == lowest:
            outlier_key = int(sub_tracker.argmax[j])
            agreed = float(lowest)
            outlier_value = float(highest)
        else:
            continue
        if outlier_key <= 0:
            # the deviating assignment is all-zero: expressing it needs a
            # multi-variable aggregation, which is out of scope
            continue
        source = members[outlier_key - 1]
        ledger.record(Substitution(j, agreed, outlier_value - agreed, source))


@dataclass
class CliqueRunRecord:
    clique: int
    size: int
    assignments_probed: int
    aborted: bool


@dataclass
class CliqueProbingRun:
    ledger: Ledger
    remaining: Set[int]  # binaries untouched by clique probing
    disabled: bool
    records: List[CliqueRunRecord] = field(default_factory=list)
    bounds: Optional[DomainState] = None


def run_clique_probing(problem: Problem, cliques: Sequence[Clique], scores,
                       config: CliqueProbingConfig,
                       bounds: Optional[DomainState] = None,
                       work_budget: Optional[int] = None) -> CliqueProbingRun:
    """Drive clique probing over score-selected cliques.

    Cliques are ranked by average member score, filtered by size/overlap/total
    member limits and consumed in doubling batches starting at the configured
    initial batch size.  Each probed clique's members leave the untouched set
    regardless of success; transactions are applied to the working bounds so
    later cliques see earlier deductions.  The run stops on a configured
    streak of unsuccessful calls (reductions per propagation below the
    threshold), an exhausted work budget, or global infeasibility.  Clique
    probing reports itself disabled when it found nothing at all.
    """
    state = bounds.copy() if bounds is not None else DomainState.from_problem(problem)
    ranked = score_cliques(cliques, scores)
    order = select_cliques(cliques, ranked, config.overlap_ratio,
                           config.max_clique_size, config.max_total_vars)
    remaining = {
        j for j in problem.binary_indices() if not state.is_fixed(j)
    }
    ledger = Ledger()
    records: List[CliqueRunRecord] = []
    streak = 0
    position = 0
    batch_size = max(config.initial_batch_size, 1)
    stop = False

    while position < len(order) and not stop:
        batch = order[position:position + batch_size]
        position += batch_size
        batch_size *= 2
        for ci in batch:
            clique = cliques[ci]
            if work_budget is not None and ledger.propagations >= work_budget:
                stop = True
                break
            if any(state.is_fixed(m) for m in clique.members):
                continue
            result = probe_single_clique(problem, state, clique, config, clique_index=ci)
            ledger.extend(result.ledger)
            records.append(CliqueRunRecord(ci, clique.size, result.propagations,
                                           result.aborted))
            remaining.difference_update(clique.members)
            for tx in result.ledger:
                if isinstance(tx, Fixing):
                    state.lower[tx.var] = state.upper[tx.var] = tx.value
                elif isinstance(tx, BoundChange):
                    if tx.side == LOWER:
                        state.lower[tx.var] = tx.value
                    else:
                        state.upper[tx.var] = tx.value
            if result.ledger.has_global_infeasible:
                stop = True
                break
            successful = (
                result.ledger.reductions / max(result.propagations, 1)
                >= config.min_reductions_per_propagation
            )
            streak = 0 if successful else streak + 1
            if streak >= config.unsuccessful_streak_limit:
                stop = True
                break

    disabled = len(ledger.transactions) == 0
    return CliqueProbingRun(ledger, remaining, disabled, records, state)
