"""Activity-based bound propagation to a fixpoint.

Each row's minimum and maximum activity are computed from the current domain;
violated rows signal infeasibility and otherwise residual activities yield
candidate bound tightenings, rounded inward for integral variables.  A
worklist is iterated in rounds (rows in ascending index, variable change
notifications deduplicated) until nothing improves beyond the minimal
threshold or the round limit is hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .model import FEAS_TOL, INF, LOWER, UPPER, Constraint, Problem

#: Slack used when rounding fractional bounds of integral variables inward.
INT_TOL = 1e-6

#: Minimal improvement for a continuous bound: absolute plus relative part.
ABS_IMPROVE = 1e-9
REL_IMPROVE = 1e-6

#: Fixpoint sweeps per propagation call; hitting the limit returns consistent.
MAX_ROUNDS = 100


@dataclass
class DomainState:
    """Current lower/upper bound vectors, one entry per variable."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_problem(cls, problem: Problem) -> "DomainState":
        return cls(np.array(problem.lower, dtype=float), np.array(problem.upper, dtype=float))

    def copy(self) -> "DomainState":
        return DomainState(self.lower.copy(), self.upper.copy())

    def is_fixed(self, var: int) -> bool:
        return self.lower[var] == self.upper[var]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DomainState):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(
            self.upper, other.upper
        )


@dataclass
class PropagationResult:
    """Outcome of one propagation call.

    When ``infeasible`` is true the bounds field is unspecified and must not
    be read.
    """

    infeasible: bool
    bounds: Optional[DomainState]
    rounds: int
    tightenings: int


def round_lower(value: float, integral: bool) -> float:
    if integral and math.isfinite(value):
        return math.ceil(value - INT_TOL)
    return value


def round_upper(value: float, integral: bool) -> float:
    if integral and math.isfinite(value):
        return math.floor(value + INT_TOL)
    return value


def improves_lower(old: float, new: float, integral: bool) -> bool:
    """True if ``new`` (already integral-consistent) counts as a tightening."""
    if not new > old:
        return False
    if old == -INF:
        return math.isfinite(new)
    if integral:
        return new > old + 0.5
    return new - old > ABS_IMPROVE + REL_IMPROVE * abs(old)


def improves_upper(old: float, new: float, integral: bool) -> bool:
    if not new < old:
        return False
    if old == INF:
        return math.isfinite(new)
    if integral:
        return new < old - 0.5
    return old - new > ABS_IMPROVE + REL_IMPROVE * abs(old)


def _activity_parts(coefs: np.ndarray, lo: np.ndarray, up: np.ndarray):
    """Contributions to min/max activity with infinite parts counted apart."""
    cmin = np.where(coefs > 0, coefs * lo, coefs * up)
    cmax = np.where(coefs > 0, coefs * up, coefs * lo)
    min_finite = np.isfinite(cmin)
    max_finite = np.isfinite(cmax)
    return (
        cmin,
        cmax,
        float(cmin[min_finite].sum()),
        int((~min_finite).sum()),
        float(cmax[max_finite].sum()),
        int((~max_finite).sum()),
    )


def row_activity(constraint: Constraint, bounds: DomainState) -> Tuple[float, float]:
    """Minimum and maximum activity of a row under the given bounds."""
    if not constraint.terms:
        return 0.0, 0.0
    idx = np.array([v for v, _ in constraint.terms], dtype=np.int64)
    coefs = np.array([c for _, c in constraint.terms], dtype=float)
    _, _, min_fin, min_ninf, max_fin, max_ninf = _activity_parts(
        coefs, bounds.lower[idx], bounds.upper[idx]
    )
    return (-INF if min_ninf else min_fin), (INF if max_ninf else max_fin)


def _row_candidates(idx, coefs, lhs, rhs, lower, upper, integral):
    """Single-row step: (infeasible, [(var, side, value), ...])."""
    if idx is None or len(idx) == 0:
        if 0.0 > rhs + FEAS_TOL or 0.0 < lhs - FEAS_TOL:
            return True, []
        return False, []

    lo = lower[idx]
    up = upper[idx]
    cmin, cmax, min_fin, min_ninf, max_fin, max_ninf = _activity_parts(coefs, lo, up)
    min_act = -INF if min_ninf else min_fin
    max_act = INF if max_ninf else max_fin
    if min_act > rhs + FEAS_TOL or max_act < lhs - FEAS_TOL:
        return True, []

    out = []
    for pos in range(len(idx)):
        j = int(idx[pos])
        a = float(coefs[pos])
        if math.isfinite(rhs):
            if min_ninf == 0:
                residual = min_fin - cmin[pos]
            elif min_ninf == 1 and not math.isfinite(cmin[pos]):
                residual = min_fin
            else:
                residual = -INF
            if math.isfinite(residual):
                limit = (rhs - residual) / a
                if a > 0:
                    cand = round_upper(limit, integral[j])
                    if improves_upper(upper[j], cand, integral[j]):
                        out.append((j, UPPER, cand))
                else:
                    cand = round_lower(limit, integral[j])
                    if improves_lower(lower[j], cand, integral[j]):
                        out.append((j, LOWER, cand))
        if math.isfinite(lhs):
            if max_ninf == 0:
                residual = max_fin - cmax[pos]
            elif max_ninf == 1 and not math.isfinite(cmax[pos]):
                residual = max_fin
            else:
                residual = INF
            if math.isfinite(residual):
                limit = (lhs - residual) / a
                if a > 0:
                    cand = round_lower(limit, integral[j])
                    if improves_lower(lower[j], cand, integral[j]):
                        out.append((j, LOWER, cand))
                else:
                    cand = round_upper(limit, integral[j])
                    if improves_upper(upper[j], cand, integral[j]):
                        out.append((j, UPPER, cand))
    return False, out


def propagate_row(constraint: Constraint, bounds: DomainState,
                  integral: Optional[np.ndarray] = None):
    """Evaluate one row against the bounds without mutating them.

    Returns ``(infeasible, tightenings)`` where tightenings is a list of
    ``(var, side, value)`` candidates that pass the improvement threshold.
    """
    if integral is None:
        integral = np.zeros(len(bounds.lower), dtype=bool)
    idx = np.array([v for v, _ in constraint.terms], dtype=np.int64)
    coefs = np.array([c for _, c in constraint.terms], dtype=float)
    return _row_candidates(idx, coefs, constraint.lhs, constraint.rhs,
                           bounds.lower, bounds.upper, integral)


def propagate_to_fixpoint(problem: Problem, bounds: DomainState,
                          fixings: Sequence[Tuple[int, float]] = ()) -> PropagationResult:
    """Apply tentative fixings and propagate rows to a fixpoint.

    With an empty fixing list every row is seeded into the worklist (a full
    root sweep); otherwise only rows touched by actually-changed variables
    are.  Output bounds are componentwise within the input bounds; the input
    state is never mutated.  Deterministic for identical inputs.
    """
    lower = bounds.lower.copy()
    upper = bounds.upper.copy()
    integral = problem.integral

    changed = set()
    for var, value in fixings:
        value = float(value)
        if integral[var] and abs(value - round(value)) > INT_TOL:
            raise ValueError(f"non-integral fixing {value} for integral variable {var}")
        if value < lower[var] - FEAS_TOL or value > upper[var] + FEAS_TOL:
            return PropagationResult(True, None, 0, 0)
        if lower[var] != value or upper[var] != value:
            lower[var] = upper[var] = value
            changed.add(var)

    if len(fixings) == 0:
        dirty = set(range(problem.num_constraints))
    else:
        dirty = set()
        for var in changed:
            dirty.update(int(ci) for ci in problem.var_rows[var])

    rounds = 0
    tightenings = 0
    while dirty and rounds < MAX_ROUNDS:
        rounds += 1
        queue = sorted(dirty)
        dirty = set()
        round_changed = set()
        for ci in queue:
            infeasible, cands = _row_candidates(
                problem.row_vars[ci], problem.row_coefs[ci],
                problem.constraints[ci].lhs, problem.constraints[ci].rhs,
                lower, upper, integral,
            )
            if infeasible:
                return PropagationResult(True, None, rounds, tightenings)
            for j, side, value in cands:
                # re-check against live bounds: an earlier row this round may
                # have superseded the candidate
                if side == LOWER:
                    if not improves_lower(lower[j], value, integral[j]):
                        continue
                    if value > upper[j] + FEAS_TOL:
                        return PropagationResult(True, None, rounds, tightenings)
                    lower[j] = min(value, upper[j])
                else:
                    if not improves_upper(upper[j], value, integral[j]):
                        continue
                    if value < lower[j] - FEAS_TOL:
                        return PropagationResult(True, None, rounds, tightenings)
                    upper[j] = max(value, lower[j])
                tightenings += 1
                round_changed.add(j)
        for var in round_changed:
            dirty.update(int(ci) for ci in problem.var_rows[var])

    return PropagationResult(False, DomainState(lower, upper), rounds, tightenings)
