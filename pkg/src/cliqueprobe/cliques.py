"""Detection, scoring and selection of clique constraints.

A clique here is a set of binary variables of which at most one (or, for
exactly-one cliques, precisely one) may take value 1.  Detection is purely
syntactic: a row qualifies when all its variables are binary and all
coefficients share a common value, after normalizing rows whose coefficients
are all negative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

from .model import INF, Constraint, Problem

COEF_TOL = 1e-9


class CliqueKind(enum.Enum):
    AT_MOST_ONE = "at-most-one"
    EXACTLY_ONE = "exactly-one"


@dataclass(frozen=True)
class Clique:
    members: tuple  # binary variable indices, ascending
    kind: CliqueKind
    origin: int  # constraint index the clique was read from

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class CliqueScore:
    clique: int
    score: float


def classify_clique_row(constraint: Constraint, problem: Problem):
    """Return (members, kind) if the row is a clique row, else None."""
    terms = constraint.terms
    if len(terms) < 2:
        return None
    if not all(problem.binary[var] for var, _ in terms):
        return None
    coefs = [coef for _, coef in terms]
    a = coefs[0]
    if any(abs(c - a) > COEF_TOL * max(1.0, abs(a)) for c in coefs):
        return None
    lhs, rhs = constraint.lhs, constraint.rhs
    if a < 0:
        # multiply the row by -1: coefficients positive, sides swap
        a = -a
        lhs, rhs = (-rhs if rhs != INF else -INF), (-lhs if lhs != -INF else INF)
    members = tuple(var for var, _ in terms)
    if lhs == rhs:
        if abs(rhs / a - 1.0) <= COEF_TOL:
            return members, CliqueKind.EXACTLY_ONE
        return None
    if lhs == -INF and rhs != INF:
        quotient = rhs / a
        if 1.0 - COEF_TOL <= quotient < 2.0 - COEF_TOL:
            return members, CliqueKind.AT_MOST_ONE
        return None
    return None


def detect_cliques(problem: Problem) -> List[Clique]:
    """Cliques read directly off the constraints, deduplicated by member set.

    Duplicates keep the stronger kind (exactly-one beats at-most-one) and,
    within a kind, the earlier origin row.
    """
    found: Dict[tuple, Clique] = {}
    for cons in problem.constraints:
        got = classify_clique_row(cons, problem)
        if got is None:
            continue
        members, kind = got
        prev = found.get(members)
        if prev is None:
            found[members] = Clique(members, kind, cons.index)
        elif prev.kind is CliqueKind.AT_MOST_ONE and kind is CliqueKind.EXACTLY_ONE:
            found[members] = Clique(members, kind, cons.index)
    return sorted(found.values(), key=lambda c: c.origin)


def score_cliques(cliques: Sequence[Clique],
                  scores: Mapping[int, float]) -> List[CliqueScore]:
    """Average member score per clique, descending; ties by origin row."""
    ranked = [
        CliqueScore(i, sum(scores.get(m, 0.0) for m in c.members) / c.size)
        for i, c in enumerate(cliques)
    ]
    ranked.sort(key=lambda cs: (-cs.score, cliques[cs.clique].origin))
    return ranked


def select_cliques(cliques: Sequence[Clique], ranked: Sequence[CliqueScore],
                   overlap_ratio: float = 0.5, max_clique_size: int = 150,
                   max_total_vars: int = 3000) -> List[int]:
    """Pick probing candidates in score order.

    Oversized cliques are dropped, cliques overlapping the already-selected
    members by strictly more than ``overlap_ratio`` are skipped, and the scan
    stops once the running member total would exceed ``max_total_vars``.
    Returns clique indices in selection order.
    """
    selected: List[int] = []
    covered: set = set()
    total = 0
    for entry in ranked:
        clique = cliques[entry.clique]
        if clique.size > max_clique_size:
            continue
        overlap = len(covered.intersection(clique.members))
        if overlap / clique.size > overlap_ratio:
            continue
        if total + clique.size > max_total_vars:
            break
        selected.append(entry.clique)
        covered.update(clique.members)
        total += clique.size
    return selected
