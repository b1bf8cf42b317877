"""Shared fixtures for the test suite: hand-built instances, a random
instance generator with planted cliques, and brute-force oracles
(feasible-point enumeration, tracker replay) that the acceptance tests
compare the engine against."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cliqueprobe import (INF, BoundChange, Clique, CliqueKind, CliqueProbingConfig,
                         CliqueUpgrade, Constraint, DomainState, Fixing, GlobalInfeasible,
                         Implication, ObjSense, ProbingLimits, Problem, Substitution,
                         VarKind, Variable, assignment_fixings, build_problem,
                         probe_variable, propagate_to_fixpoint)


def binary(index: int, name: str = "") -> Variable:
    return Variable(index, 0.0, 1.0, VarKind.BINARY, name=name or f"x{index}")


def integer(index: int, lower: float, upper: float, name: str = "") -> Variable:
    return Variable(index, lower, upper, VarKind.INTEGER, name=name or f"y{index}")


def continuous(index: int, lower: float, upper: float, name: str = "") -> Variable:
    return Variable(index, lower, upper, name=name or f"z{index}")


def ample_limits() -> ProbingLimits:
    return ProbingLimits(max_variables=None, stall_window=10 ** 6, min_successes=1,
                         work_budget=10 ** 9)


def no_abort_config(**overrides) -> CliqueProbingConfig:
    return CliqueProbingConfig(abort_threshold=None, **overrides)


# ---------------------------------------------------------------------------
# Hand-built instances


def linked_partition_problem() -> Problem:
    """Choose-one triple whose choice pins a continuous variable.

    x1+x2+x3 = 1 and z = 2*x1 + 5*x2 + 5*x3 with z in [0, 10].
    """
    variables = [binary(0), binary(1), binary(2), continuous(3, 0.0, 10.0, "z")]
    constraints = [
        Constraint(0, ((0, 1.0), (1, 1.0), (2, 1.0)), lhs=1.0, rhs=1.0, name="choose"),
        Constraint(1, ((0, -2.0), (1, -5.0), (2, -5.0), (3, 1.0)), lhs=0.0, rhs=0.0,
                   name="link"),
    ]
    return build_problem(variables, constraints)


def covering_pair_problem() -> Problem:
    """At-most-one pair forced to exactly-one by a covering row."""
    variables = [binary(0), binary(1)]
    constraints = [
        Constraint(0, ((0, 1.0), (1, 1.0)), rhs=1.0, name="pack"),
        Constraint(1, ((0, 1.0), (1, 1.0)), lhs=1.0, name="cover"),
    ]
    return build_problem(variables, constraints)


def capacity_clash_problem() -> Problem:
    """At-most-one triple where activating x1 overloads a capacity row.

    x1+x2+x3 <= 1 and 2*x1 + z <= 2 with z in [1, 2].
    """
    variables = [binary(0), binary(1), binary(2), continuous(3, 1.0, 2.0, "z")]
    constraints = [
        Constraint(0, ((0, 1.0), (1, 1.0), (2, 1.0)), rhs=1.0, name="pack"),
        Constraint(1, ((0, 2.0), (3, 1.0)), rhs=2.0, name="capacity"),
    ]
    return build_problem(variables, constraints)


def inconsistent_pair_problem() -> Problem:
    """Exactly-one pair contradicted by a row demanding both actives."""
    variables = [binary(0), binary(1)]
    constraints = [
        Constraint(0, ((0, 1.0), (1, 1.0)), lhs=1.0, rhs=1.0, name="choose"),
        Constraint(1, ((0, 1.0), (1, 1.0)), lhs=2.0, name="both"),
    ]
    return build_problem(variables, constraints)


# ---------------------------------------------------------------------------
# Random generator with a planted clique


@dataclass
class PlantedClique:
    members: Tuple[int, ...]
    kind: CliqueKind
    conflicted: Tuple[int, ...] = ()  # members with a conflict row (cannot be 1)
    upgrade_trigger: bool = False  # a covering row makes all-zero infeasible


@dataclass
class GeneratedInstance:
    problem: Problem
    planted: List[PlantedClique]
    seed_info: dict = field(default_factory=dict)


def generate_instance(rng: np.random.Generator, max_members: int = 8,
                      allow_second_clique: bool = False,
                      conflict_prob: float = 0.25, upgrade_prob: float = 0.3,
                      max_links: int = 2) -> GeneratedInstance:
    """Random integral instance with one (optionally two) planted cliques.

    Structure: the clique row itself; one or two link rows tying several
    members to an integer variable whose bounds cover every assignment value
    (so no assignment is cut off by the link alone); optionally a conflict
    row knocking out a single member and, for at-most-one cliques, a covering
    row that makes the all-zero assignment infeasible; noise rows over
    non-member variables anchored at a feasible reference point.  Non-clique
    rows never contain two clique members, so probing one member can never
    fix another through a side constraint.
    """
    size1 = int(rng.integers(3, max_members + 1))
    size2 = 0
    if allow_second_clique and size1 <= 6 and rng.random() < 0.5:
        size2 = int(rng.integers(3, min(5, 10 - size1) + 1))
    n_members = size1 + size2
    n_extra_bin = int(rng.integers(0, min(3, 10 - n_members) + 1))
    n_bin = n_members + n_extra_bin

    clique_specs = [list(range(size1))]
    if size2:
        clique_specs.append(list(range(size1, size1 + size2)))

    variables: List[Variable] = [binary(i) for i in range(n_bin)]
    constraints: List[Constraint] = []
    planted: List[PlantedClique] = []
    link_targets: List[int] = []
    ref: Dict[int, float] = {}
    # keep the full-grid enumeration oracle tractable
    grid_cells = float(2 ** n_bin)
    grid_budget = 250_000.0

    def add_constraint(terms, lhs=-INF, rhs=INF, name=""):
        constraints.append(Constraint(len(constraints), tuple(sorted(terms)),
                                      lhs=lhs, rhs=rhs, name=name))

    for members in clique_specs:
        kind = CliqueKind.EXACTLY_ONE if rng.random() < 0.5 else CliqueKind.AT_MOST_ONE
        coef = 2.0 if rng.random() < 0.2 else 1.0
        if kind is CliqueKind.EXACTLY_ONE:
            add_constraint([(m, coef) for m in members], lhs=coef, rhs=coef,
                           name=f"clique{len(planted)}")
        else:
            rhs = coef if coef == 1.0 else 3.0  # quotient 1 or 1.5
            add_constraint([(m, coef) for m in members], rhs=rhs,
                           name=f"clique{len(planted)}")

        conflicted: List[int] = []
        if rng.random() < conflict_prob:
            victim = int(rng.choice(members))
            add_constraint([(victim, 2.0)], rhs=1.0, name=f"conflict{victim}")
            conflicted.append(victim)

        upgrade_trigger = False
        if kind is CliqueKind.AT_MOST_ONE and rng.random() < upgrade_prob:
            add_constraint([(m, 1.0) for m in members], lhs=1.0,
                           name=f"cover{len(planted)}")
            upgrade_trigger = True

        n_links = 1 if size2 and max_links < 3 else int(rng.integers(1, max_links + 1))
        for _ in range(n_links):
            target = len(variables)
            link_targets.append(target)
            sub_pattern = kind is CliqueKind.EXACTLY_ONE and rng.random() < 0.4
            if sub_pattern:
                subset = list(members)
                agreed = _nonzero_int(rng, 3)
                outlier_value = agreed
                while outlier_value in (0, agreed):
                    outlier_value = agreed + _nonzero_int(rng, 3)
                coefs = {m: float(agreed) for m in subset}
                coefs[int(rng.choice(subset))] = float(outlier_value)
            else:
                k = int(rng.integers(2, len(members) + 1))
                subset = sorted(rng.choice(members, size=k, replace=False).tolist())
                coefs = {int(m): float(_nonzero_int(rng, 3)) for m in subset}
            offset = float(rng.integers(-2, 3))
            values = {offset + c for c in coefs.values()}
            if kind is CliqueKind.AT_MOST_ONE or len(subset) < len(members):
                values.add(offset)
            slack_lo = int(rng.integers(0, 3))
            slack_hi = int(rng.integers(0, 3))
            span = max(values) - min(values) + 1 + slack_lo + slack_hi
            if grid_cells * span > grid_budget:
                slack_lo = slack_hi = 0
                span = max(values) - min(values) + 1
            grid_cells *= span
            lower = min(values) - slack_lo
            upper = max(values) + slack_hi
            variables.append(integer(target, lower, upper))
            add_constraint([(m, -c) for m, c in coefs.items()] + [(target, 1.0)],
                           lhs=offset, rhs=offset, name=f"link{target}")

        # reference member assignment used to anchor noise rows
        choices = [m for m in members if m not in conflicted]
        if kind is CliqueKind.EXACTLY_ONE or upgrade_trigger or rng.random() < 0.7:
            active = int(rng.choice(choices))
        else:
            active = None
        for m in members:
            ref[m] = 1.0 if m == active else 0.0
        planted.append(PlantedClique(tuple(members), kind, tuple(conflicted),
                                     upgrade_trigger))

    # reference values for link targets follow from the link rows
    for cons in constraints:
        if cons.name.startswith("link"):
            target = cons.terms[-1][0]
            ref[target] = cons.lhs - sum(c * ref[v] for v, c in cons.terms[:-1])

    n_free_int = int(rng.integers(0, 2))
    free_ints: List[int] = []
    for _ in range(n_free_int):
        lower = int(rng.integers(-3, 2))
        span = int(rng.integers(0, 4))
        if grid_cells * (span + 1) > grid_budget:
            continue
        grid_cells *= span + 1
        idx = len(variables)
        variables.append(integer(idx, lower, lower + span))
        free_ints.append(idx)

    for j in range(n_members, n_bin):
        ref[j] = float(rng.integers(0, 2))
    for j in free_ints:
        var = variables[j]
        ref[j] = float(rng.integers(int(var.lower), int(var.upper) + 1))

    noise_pool = list(range(n_members, n_bin)) + free_ints
    if noise_pool:
        for _ in range(int(rng.integers(0, 5))):
            k = int(rng.integers(1, min(4, len(noise_pool)) + 1))
            chosen = sorted(rng.choice(noise_pool, size=k, replace=False).tolist())
            terms = [(int(v), float(_nonzero_int(rng, 4))) for v in chosen]
            activity = sum(c * ref[v] for v, c in terms)
            style = rng.random()
            if style < 0.45:
                add_constraint(terms, rhs=activity + int(rng.integers(0, 5)))
            elif style < 0.9:
                add_constraint(terms, lhs=activity - int(rng.integers(0, 5)))
            else:
                add_constraint(terms, lhs=activity - int(rng.integers(0, 3)),
                               rhs=activity + int(rng.integers(0, 3)))

    problem = build_problem(variables, constraints)
    return GeneratedInstance(problem, planted, {"reference": ref})


def _nonzero_int(rng: np.random.Generator, magnitude: int) -> int:
    value = int(rng.integers(1, magnitude + 1))
    return value if rng.random() < 0.5 else -value


def find_planted(problem: Problem, detected: Sequence[Clique],
                 planted: PlantedClique) -> Clique:
    for clique in detected:
        if clique.members == planted.members:
            return clique
    raise AssertionError(f"planted clique {planted.members} not detected")


# ---------------------------------------------------------------------------
# Brute-force oracles


def enumerate_feasible(problem: Problem, cap: int = 400_000) -> np.ndarray:
    """All feasible points of a fully integral, box-bounded instance."""
    axes = []
    for var in problem.variables:
        if var.kind is VarKind.CONTINUOUS:
            raise ValueError("enumeration needs an all-integral instance")
        if not (np.isfinite(var.lower) and np.isfinite(var.upper)):
            raise ValueError("enumeration needs finite bounds")
        axes.append(np.arange(var.lower, var.upper + 1.0))
    total = int(np.prod([len(a) for a in axes]))
    if total > cap:
        raise ValueError(f"grid of {total} points exceeds cap")
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    mask = np.ones(len(points), dtype=bool)
    for cons in problem.constraints:
        if not cons.terms:
            if 0.0 < cons.lhs - 1e-9 or 0.0 > cons.rhs + 1e-9:
                mask[:] = False
            continue
        idx = [v for v, _ in cons.terms]
        coefs = np.array([c for _, c in cons.terms])
        activity = points[:, idx] @ coefs
        mask &= (activity >= cons.lhs - 1e-9) & (activity <= cons.rhs + 1e-9)
    return points[mask]


def soundness_violations(problem: Problem, transactions, points: np.ndarray,
                         cliques: Sequence[Clique] = ()) -> List[str]:
    """Transactions not holding in every enumerated feasible point."""
    out: List[str] = []
    for tx in transactions:
        if isinstance(tx, Fixing):
            if len(points) and not np.all(np.abs(points[:, tx.var] - tx.value) <= 1e-9):
                out.append(f"{tx} cut a feasible point")
        elif isinstance(tx, BoundChange):
            column = points[:, tx.var] if len(points) else np.empty(0)
            if tx.side == "lower":
                bad = len(points) and not np.all(column >= tx.value - 1e-9)
            else:
                bad = len(points) and not np.all(column <= tx.value + 1e-9)
            if bad:
                out.append(f"{tx} cut a feasible point")
        elif isinstance(tx, Substitution):
            if len(points):
                implied = tx.offset + tx.slope * points[:, tx.source]
                if not np.all(np.abs(points[:, tx.target] - implied) <= 1e-9):
                    out.append(f"{tx} does not hold everywhere")
        elif isinstance(tx, CliqueUpgrade):
            members = list(cliques[tx.clique].members)
            if len(points) and not np.all(
                    np.abs(points[:, members].sum(axis=1) - 1.0) <= 1e-9):
                out.append(f"{tx}: some feasible point has no active member")
        elif isinstance(tx, GlobalInfeasible):
            if len(points):
                out.append("GlobalInfeasible claimed but feasible points exist")
        elif isinstance(tx, Implication):
            if len(points):
                selected = points[np.abs(points[:, tx.source] - tx.assignment) <= 1e-9]
                column = selected[:, tx.target]
                if tx.side == "lower":
                    bad = not np.all(column >= tx.value - 1e-9)
                else:
                    bad = not np.all(column <= tx.value + 1e-9)
                if bad:
                    out.append(f"{tx} violated under its premise")
    return out


@dataclass
class AssignmentReplay:
    """Per-assignment propagation results in probe order (consistent only)."""

    keys: List[int]
    bounds: List[DomainState]


def replay_assignments(problem: Problem, bounds: DomainState,
                       clique: Clique) -> AssignmentReplay:
    keys = ([0] if clique.kind is CliqueKind.AT_MOST_ONE else []) \
        + list(range(1, clique.size + 1))
    kept: List[int] = []
    states: List[DomainState] = []
    for key in keys:
        result = propagate_to_fixpoint(problem, bounds,
                                       assignment_fixings(clique.members, key))
        if not result.infeasible:
            kept.append(key)
            states.append(result.bounds)
    return AssignmentReplay(kept, states)


@dataclass
class TrackerExpectation:
    min_lower: np.ndarray
    max_upper: np.ndarray
    lowest: np.ndarray
    second_lowest: np.ndarray
    argmin: np.ndarray
    highest: np.ndarray
    second_highest: np.ndarray
    argmax: np.ndarray
    fixed_in_all: np.ndarray


def expected_trackers(num_vars: int, replay: AssignmentReplay) -> TrackerExpectation:
    """Exact statistics over the stored per-assignment bound vectors."""
    exp = TrackerExpectation(
        min_lower=np.full(num_vars, INF),
        max_upper=np.full(num_vars, -INF),
        lowest=np.full(num_vars, INF),
        second_lowest=np.full(num_vars, INF),
        argmin=np.full(num_vars, -1, dtype=np.int64),
        highest=np.full(num_vars, -INF),
        second_highest=np.full(num_vars, -INF),
        argmax=np.full(num_vars, -1, dtype=np.int64),
        fixed_in_all=np.ones(num_vars, dtype=bool),
    )
    for state in replay.bounds:
        np.minimum(exp.min_lower, state.lower, out=exp.min_lower)
        np.maximum(exp.max_upper, state.upper, out=exp.max_upper)
    for j in range(num_vars):
        values = []
        for key, state in zip(replay.keys, replay.bounds):
            if state.lower[j] == state.upper[j]:
                values.append((float(state.lower[j]), key))
            else:
                exp.fixed_in_all[j] = False
        if not values:
            continue
        ordered = sorted(v for v, _ in values)
        exp.lowest[j] = ordered[0]
        exp.argmin[j] = next(k for v, k in values if v == ordered[0])
        if len(ordered) > 1:
            exp.second_lowest[j] = ordered[1]
        exp.highest[j] = ordered[-1]
        exp.argmax[j] = next(k for v, k in values if v == ordered[-1])
        if len(ordered) > 1:
            exp.second_highest[j] = ordered[-2]
    return exp


def trackers_match(expectation: TrackerExpectation, bound_tracker,
                   sub_tracker) -> bool:
    return (
        np.array_equal(expectation.min_lower, bound_tracker.min_lower)
        and np.array_equal(expectation.max_upper, bound_tracker.max_upper)
        and np.array_equal(expectation.lowest, sub_tracker.lowest)
        and np.array_equal(expectation.second_lowest, sub_tracker.second_lowest)
        and np.array_equal(expectation.argmin, sub_tracker.argmin)
        and np.array_equal(expectation.highest, sub_tracker.highest)
        and np.array_equal(expectation.second_highest, sub_tracker.second_highest)
        and np.array_equal(expectation.argmax, sub_tracker.argmax)
        and np.array_equal(expectation.fixed_in_all, sub_tracker.fixed_in_all)
    )


def standard_member_intervals(problem: Problem, bounds: DomainState,
                              members: Sequence[int]
                              ) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Bound intervals standard probing of the members would justify.

    Each member is probed independently from the same starting bounds; members
    with both sides consistent contribute the union interval of their two
    propagations, and the contributions are intersected.  Returns None when
    some member proves the whole problem infeasible.
    """
    lower = bounds.lower.copy()
    upper = bounds.upper.copy()
    for member in members:
        outcome = probe_variable(problem, bounds, member)
        if outcome.result0.infeasible and outcome.result1.infeasible:
            return None
        if outcome.result0.infeasible or outcome.result1.infeasible:
            continue
        lo = np.minimum(outcome.result0.bounds.lower, outcome.result1.bounds.lower)
        up = np.maximum(outcome.result0.bounds.upper, outcome.result1.bounds.upper)
        np.maximum(lower, lo, out=lower)
        np.minimum(upper, up, out=upper)
    return lower, upper


def random_small_problem(rng: np.random.Generator) -> Problem:
    """Small integral instance without planted structure, for property tests."""
    n_bin = int(rng.integers(1, 6))
    n_int = int(rng.integers(0, 3))
    variables = [binary(i) for i in range(n_bin)]
    for k in range(n_int):
        lower = int(rng.integers(-4, 3))
        variables.append(integer(n_bin + k, lower, lower + int(rng.integers(0, 5))))
    n = len(variables)
    constraints = []
    for ci in range(int(rng.integers(1, 7))):
        k = int(rng.integers(1, min(4, n) + 1))
        chosen = sorted(rng.choice(n, size=k, replace=False).tolist())
        terms = tuple((int(v), float(_nonzero_int(rng, 4))) for v in chosen)
        max_act = sum(c * (variables[v].upper if c > 0 else variables[v].lower)
                      for v, c in terms)
        min_act = sum(c * (variables[v].lower if c > 0 else variables[v].upper)
                      for v, c in terms)
        style = rng.random()
        if style < 0.4:
            rhs = float(int(min_act + rng.integers(0, int(max_act - min_act) + 2)))
            constraints.append(Constraint(ci, terms, rhs=rhs))
        elif style < 0.8:
            lhs = float(int(max_act - rng.integers(0, int(max_act - min_act) + 2)))
            constraints.append(Constraint(ci, terms, lhs=lhs))
        else:
            mid = float(int(min_act + (max_act - min_act) // 2))
            constraints.append(Constraint(ci, terms, lhs=mid, rhs=mid + 1))
    return build_problem(variables, constraints)
