"""Core problem representation and the transaction ledger.

A :class:`Problem` holds variables and linear constraints in both row and
column form and is immutable after construction.  Reductions found by the
probing engines are recorded as :class:`Transaction` values in a
:class:`Ledger` and applied to a problem afterwards with
:func:`apply_transactions`, which re-checks each transaction's validity and
silently discards the ones that became stale.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

INF = float("inf")

#: Any bound magnitude at or beyond this is treated as infinite (MPS convention).
INFINITY_THRESHOLD = 1e20

#: Absolute feasibility tolerance shared by propagation and application.
FEAS_TOL = 1e-6

LOWER = "lower"
UPPER = "upper"


class ProblemError(ValueError):
    """Problem data violates a structural invariant."""


def normalize_bound(value: float) -> float:
    """Map huge magnitudes to +/-inf per the MPS convention."""
    value = float(value)
    if value >= INFINITY_THRESHOLD:
        return INF
    if value <= -INFINITY_THRESHOLD:
        return -INF
    return value


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class ObjSense(enum.Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class Variable:
    index: int
    lower: float = 0.0
    upper: float = INF
    kind: VarKind = VarKind.CONTINUOUS
    objective: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", normalize_bound(self.lower))
        object.__setattr__(self, "upper", normalize_bound(self.upper))
        label = self.name or f"#{self.index}"
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ProblemError(f"variable {label}: NaN bound")
        if self.lower == INF or self.upper == -INF:
            raise ProblemError(f"variable {label}: empty bound interval")
        if self.lower > self.upper:
            raise ProblemError(
                f"variable {label}: lower {self.lower} exceeds upper {self.upper}"
            )
        if self.kind is VarKind.BINARY:
            if self.lower not in (0.0, 1.0) or self.upper not in (0.0, 1.0):
                raise ProblemError(f"variable {label}: binary bounds must lie in {{0,1}}")
        if self.kind in (VarKind.INTEGER, VarKind.BINARY):
            for b in (self.lower, self.upper):
                if math.isfinite(b) and b != round(b):
                    raise ProblemError(f"variable {label}: non-integral bound {b}")

    @property
    def is_integral(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


@dataclass(frozen=True)
class Constraint:
    """Linear row lhs <= sum(coef * var) <= rhs.

    Variable indices in ``terms`` are strictly increasing and coefficients are
    finite and nonzero; at least one side must be finite.
    """

    index: int
    terms: tuple
    lhs: float = -INF
    rhs: float = INF
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((int(v), float(c)) for v, c in self.terms))
        object.__setattr__(self, "lhs", normalize_bound(self.lhs))
        object.__setattr__(self, "rhs", normalize_bound(self.rhs))
        label = self.name or f"#{self.index}"
        if self.lhs > self.rhs:
            raise ProblemError(f"constraint {label}: lhs {self.lhs} exceeds rhs {self.rhs}")
        if self.lhs == -INF and self.rhs == INF:
            raise ProblemError(f"constraint {label}: both sides infinite")
        prev = -1
        for var, coef in self.terms:
            if var <= prev:
                raise ProblemError(
                    f"constraint {label}: variable indices not strictly increasing"
                )
            prev = var
            if coef == 0.0 or not math.isfinite(coef):
                raise ProblemError(f"constraint {label}: coefficient {coef} for variable {var}")


class Problem:
    """Immutable MIP instance with consistent row and column views."""

    def __init__(self, variables, constraints, sense=ObjSense.MIN, columns=None,
                 name: str = ""):
        self.variables: tuple = tuple(variables)
        self.constraints: tuple = tuple(constraints)
        self.sense = sense
        self.name = name
        if columns is None:
            columns = _build_columns(self.variables, self.constraints)
        self.columns: tuple = columns

        n = len(self.variables)
        self.lower = np.array([v.lower for v in self.variables], dtype=float)
        self.upper = np.array([v.upper for v in self.variables], dtype=float)
        self.integral = np.array([v.is_integral for v in self.variables], dtype=bool)
        self.binary = np.array([v.is_binary for v in self.variables], dtype=bool)
        self.lower.flags.writeable = False
        self.upper.flags.writeable = False
        self.integral.flags.writeable = False
        self.binary.flags.writeable = False
        # per-row index/coefficient arrays for fast propagation
        self.row_vars = [
            np.array([v for v, _ in c.terms], dtype=np.int64) for c in self.constraints
        ]
        self.row_coefs = [
            np.array([c_ for _, c_ in c.terms], dtype=float) for c in self.constraints
        ]
        self.var_rows = [
            np.array([ci for ci, _ in self.columns[j]], dtype=np.int64) for j in range(n)
        ]

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def binary_indices(self) -> list:
        return [v.index for v in self.variables if v.is_binary]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Problem):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.constraints == other.constraints
            and self.sense == other.sense
        )

    def __repr__(self) -> str:
        return (
            f"Problem({self.num_variables} variables, {self.num_constraints} constraints,"
            f" sense={self.sense.value})"
        )


def _build_columns(variables, constraints) -> tuple:
    cols = [[] for _ in variables]
    for cons in constraints:
        for var, coef in cons.terms:
            cols[var].append((cons.index, coef))
    return tuple(tuple(entries) for entries in cols)


def build_problem(variables: Sequence[Variable], constraints: Sequence[Constraint],
                  sense: ObjSense = ObjSense.MIN) -> Problem:
    """Validate cross references and assemble a Problem with its column view."""
    variables = tuple(variables)
    constraints = tuple(constraints)
    for pos, var in enumerate(variables):
        if var.index != pos:
            raise ProblemError(f"variable at position {pos} carries index {var.index}")
    for pos, cons in enumerate(constraints):
        if cons.index != pos:
            raise ProblemError(f"constraint at position {pos} carries index {cons.index}")
        for var, _ in cons.terms:
            if var >= len(variables):
                raise ProblemError(
                    f"constraint {cons.name or pos} references unknown variable {var}"
                )
    return Problem(variables, constraints, sense)


# ---------------------------------------------------------------------------
# Transactions


@dataclass(frozen=True)
class Fixing:
    var: int
    value: float


@dataclass(frozen=True)
class BoundChange:
    var: int
    side: str  # LOWER or UPPER
    value: float


@dataclass(frozen=True)
class Substitution:
    """Replace ``target`` by ``offset + slope * source`` (source binary)."""

    target: int
    offset: float
    slope: float
    source: int

    def __post_init__(self) -> None:
        if self.target == self.source:
            raise ProblemError("substitution target and source must differ")


@dataclass(frozen=True)
class CliqueUpgrade:
    clique: int


@dataclass(frozen=True)
class Implication:
    """Conditional deduction: source = assignment implies target side >=/<= value."""

    source: int
    assignment: int  # 0 or 1
    target: int
    side: str
    value: float


@dataclass(frozen=True)
class GlobalInfeasible:
    pass


Transaction = Union[Fixing, BoundChange, Substitution, CliqueUpgrade, Implication,
                    GlobalInfeasible]


class Ledger:
    """Ordered record of reductions plus counters used for reporting.

    ``reductions`` counts fixings + bound changes + substitutions, the
    quantities compared between probing modes; implications and propagation
    calls are tracked separately.
    """

    def __init__(self) -> None:
        self.transactions: list = []
        self.fixings = 0
        self.bound_changes = 0
        self.substitutions = 0
        self.implications = 0
        self.clique_upgrades = 0
        self.propagations = 0

    def record(self, tx: Transaction) -> None:
        self.transactions.append(tx)
        if isinstance(tx, Fixing):
            self.fixings += 1
        elif isinstance(tx, BoundChange):
            self.bound_changes += 1
        elif isinstance(tx, Substitution):
            self.substitutions += 1
        elif isinstance(tx, Implication):
            self.implications += 1
        elif isinstance(tx, CliqueUpgrade):
            self.clique_upgrades += 1

    def record_propagations(self, count: int) -> None:
        self.propagations += count

    def extend(self, other: "Ledger") -> None:
        for tx in other.transactions:
            self.record(tx)
        self.propagations += other.propagations

    @property
    def reductions(self) -> int:
        return self.fixings + self.bound_changes + self.substitutions

    @property
    def has_global_infeasible(self) -> bool:
        return any(isinstance(tx, GlobalInfeasible) for tx in self.transactions)

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)


# ---------------------------------------------------------------------------
# Applying transactions


@dataclass
class ApplyResult:
    problem: Optional[Problem]
    infeasible: bool
    applied: int
    discarded: int
    cliques: Optional[list]


def apply_transactions(problem: Problem, ledger: Ledger, cliques=None) -> ApplyResult:
    """Apply recorded transactions in order, skipping the ones no longer valid.

    A bound change weaker than the current bound, a fixing outside the current
    bounds, a substitution whose target already vanished from every row and a
    clique upgrade on an already-upgraded clique are counted as discarded.
    Implications are collected for reporting only and are never applied.
    A ``GlobalInfeasible`` entry yields an infeasibility verdict instead of a
    reduced problem.
    """
    lower = np.array(problem.lower, dtype=float)
    upper = np.array(problem.upper, dtype=float)
    rows = [
        {var: coef for var, coef in cons.terms} for cons in problem.constraints
    ]
    sides = [[cons.lhs, cons.rhs] for cons in problem.constraints]

    new_cliques = list(cliques) if cliques is not None else None
    applied = 0
    discarded = 0

    for tx in ledger:
        if isinstance(tx, GlobalInfeasible):
            return ApplyResult(None, True, applied, discarded, new_cliques)
        if isinstance(tx, Implication):
            discarded += 1  # by design never applied
            continue
        if isinstance(tx, Fixing):
            j, v = tx.var, tx.value
            if v < lower[j] - FEAS_TOL or v > upper[j] + FEAS_TOL:
                discarded += 1
                continue
            if lower[j] == v and upper[j] == v:
                discarded += 1
                continue
            if problem.integral[j]:
                v = float(round(v))
            lower[j] = upper[j] = v
            applied += 1
        elif isinstance(tx, BoundChange):
            j, v = tx.var, tx.value
            if tx.side == LOWER:
                if v <= lower[j] or v > upper[j] + FEAS_TOL:
                    discarded += 1
                    continue
                lower[j] = min(v, upper[j])
            else:
                if v >= upper[j] or v < lower[j] - FEAS_TOL:
                    discarded += 1
                    continue
                upper[j] = max(v, lower[j])
            applied += 1
        elif isinstance(tx, Substitution):
            target, offset, slope, source = tx.target, tx.offset, tx.slope, tx.source
            touched = [ci for ci, row in enumerate(rows) if target in row]
            if not touched:
                discarded += 1
                continue
            for ci in touched:
                row = rows[ci]
                coef = row.pop(target)
                merged = row.get(source, 0.0) + coef * slope
                if abs(merged) <= 1e-12:
                    row.pop(source, None)
                else:
                    row[source] = merged
                shift = coef * offset
                if math.isfinite(sides[ci][0]):
                    sides[ci][0] -= shift
                if math.isfinite(sides[ci][1]):
                    sides[ci][1] -= shift
            applied += 1
        elif isinstance(tx, CliqueUpgrade):
            if new_cliques is None or not (0 <= tx.clique < len(new_cliques)):
                discarded += 1
                continue
            clique = new_cliques[tx.clique]
            if clique.kind.value != "at-most-one":
                discarded += 1
                continue
            new_cliques[tx.clique] = dataclasses.replace(
                clique, kind=type(clique.kind)("exactly-one")
            )
            ci = clique.origin
            row = rows[ci]
            coefs = list(row.values())
            if coefs and all(c == coefs[0] for c in coefs):
                a = coefs[0]
                # exactly-one forces the row activity to equal the common
                # coefficient; raise the open side to that value
                if a > 0 and sides[ci][0] == -INF:
                    sides[ci][0] = min(a, sides[ci][1])
                elif a < 0 and sides[ci][1] == INF:
                    sides[ci][1] = max(a, sides[ci][0])
            applied += 1
        else:  # pragma: no cover - exhaustive
            raise TypeError(f"unknown transaction {tx!r}")

    variables = [
        dataclasses.replace(v, lower=float(lower[v.index]), upper=float(upper[v.index]))
        for v in problem.variables
    ]
    constraints = [
        Constraint(
            index=ci,
            terms=tuple(sorted(rows[ci].items())),
            lhs=sides[ci][0],
            rhs=sides[ci][1],
            name=problem.constraints[ci].name,
        )
        for ci in range(problem.num_constraints)
    ]
    reduced = build_problem(variables, constraints, problem.sense)
    return ApplyResult(reduced, False, applied, discarded, new_cliques)
