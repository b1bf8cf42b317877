"""MPS instance reading and line-delimited JSON run reports.

The parser accepts free-format MPS (whitespace separated) with the sections
NAME, ROWS, COLUMNS (INTORG/INTEND markers), RHS, optional RANGES, optional
BOUNDS, optional OBJSENSE and ENDATA.  Reports serialize one JSON object per
run with deterministic key order and floats at 6 significant digits.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional

from .model import (INF, Constraint, ObjSense, Problem, VarKind, Variable, build_problem,
                    normalize_bound)


class MpsParseError(ValueError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


_SECTIONS = {"NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"}
_BOUND_TYPES = {"LO", "UP", "FX", "FR", "MI", "PL", "BV", "LI", "UI"}


class _VarData:
    __slots__ = ("index", "integral", "objective", "lower", "upper", "saw_bounds", "name")

    def __init__(self, index: int, integral: bool, name: str):
        self.index = index
        self.integral = integral
        self.objective = 0.0
        self.lower: Optional[float] = None
        self.upper: Optional[float] = None
        self.saw_bounds = False
        self.name = name


def parse_mps(text: str) -> Problem:
    """Parse MPS text into a Problem.

    Row types N/L/G/E map to objective, (-inf, rhs], [rhs, +inf) and
    [rhs, rhs]; RANGES widen E/L/G rows per the MPS standard.  Integer
    variables without any BOUNDS entry default to [0, 1]; integer variables
    whose final bounds are exactly [0, 1] are classified binary.  Duplicate
    COLUMNS entries for one (row, column) pair are summed with a warning.
    """
    name = ""
    sense = ObjSense.MIN
    section = None
    objective_row: Optional[str] = None
    row_types: Dict[str, str] = {}
    row_order: List[str] = []
    row_rhs: Dict[str, float] = {}
    row_range: Dict[str, float] = {}
    entries: Dict[str, Dict[str, float]] = {}
    var_data: Dict[str, _VarData] = {}
    var_order: List[str] = []
    integral_mode = False
    saw_endata = False
    expect_objsense_value = False
    line_number = 0

    for raw in text.splitlines():
        line_number += 1
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        tokens = stripped.split()
        is_header = not raw[:1].isspace()

        if expect_objsense_value and not is_header:
            sense = _parse_sense(tokens[0], line_number)
            expect_objsense_value = False
            continue
        expect_objsense_value = False

        if is_header:
            head = tokens[0].upper()
            if head not in _SECTIONS:
                raise MpsParseError(f"unknown section {tokens[0]!r}", line_number)
            section = head
            if head == "NAME":
                name = tokens[1] if len(tokens) > 1 else ""
            elif head == "OBJSENSE":
                if len(tokens) > 1:
                    sense = _parse_sense(tokens[1], line_number)
                else:
                    expect_objsense_value = True
            elif head == "ENDATA":
                saw_endata = True
                break
            continue

        if section == "ROWS":
            if len(tokens) < 2:
                raise MpsParseError("ROWS entry needs a type and a name", line_number)
            rtype, rname = tokens[0].upper(), tokens[1]
            if rtype not in ("N", "L", "G", "E"):
                raise MpsParseError(f"unknown row type {tokens[0]!r}", line_number)
            if rname in row_types:
                raise MpsParseError(f"duplicate row {rname!r}", line_number)
            row_types[rname] = rtype
            if rtype == "N":
                if objective_row is None:
                    objective_row = rname
            else:
                row_order.append(rname)
        elif section == "COLUMNS":
            if "'MARKER'" in tokens:
                if "'INTORG'" in tokens:
                    integral_mode = True
                elif "'INTEND'" in tokens:
                    integral_mode = False
                else:
                    raise MpsParseError("unrecognized marker line", line_number)
                continue
            col = tokens[0]
            if col not in var_data:
                var_data[col] = _VarData(len(var_order), integral_mode, col)
                var_order.append(col)
                entries[col] = {}
            data = var_data[col]
            for row_name, value in _pairs(tokens[1:], line_number):
                if row_name not in row_types:
                    raise MpsParseError(f"unknown row {row_name!r}", line_number)
                if row_types[row_name] == "N":
                    if row_name == objective_row:
                        data.objective += value
                    continue
                if row_name in entries[col]:
                    warnings.warn(
                        f"duplicate entry for ({row_name}, {col}); coefficients summed",
                        stacklevel=2,
                    )
                    entries[col][row_name] += value
                else:
                    entries[col][row_name] = value
        elif section == "RHS":
            for row_name, value in _named_pairs(tokens, line_number):
                if row_name not in row_types:
                    raise MpsParseError(f"unknown row {row_name!r}", line_number)
                if row_types[row_name] == "N":
                    continue  # objective constant: irrelevant for probing
                row_rhs[row_name] = value
        elif section == "RANGES":
            for row_name, value in _named_pairs(tokens, line_number):
                if row_name not in row_types:
                    raise MpsParseError(f"unknown row {row_name!r}", line_number)
                if row_types[row_name] != "N":
                    row_range[row_name] = value
        elif section == "BOUNDS":
            btype = tokens[0].upper()
            if btype not in _BOUND_TYPES:
                raise MpsParseError(f"unknown bound type {tokens[0]!r}", line_number)
            if len(tokens) < 3:
                raise MpsParseError("BOUNDS entry needs a set name and a column", line_number)
            col = tokens[2]
            if col not in var_data:
                raise MpsParseError(f"unknown column {col!r}", line_number)
            value = None
            if len(tokens) > 3:
                value = _number(tokens[3], line_number)
            _apply_bound(var_data[col], btype, value, line_number)
        elif section in ("NAME", "OBJSENSE"):
            raise MpsParseError(f"unexpected data line in section {section}", line_number)
        else:
            raise MpsParseError("data line before any section", line_number)

    if not saw_endata:
        raise MpsParseError("missing ENDATA", max(line_number, 1))

    variables = [_finish_variable(var_data[colname]) for colname in var_order]

    row_index = {rname: i for i, rname in enumerate(row_order)}
    terms_per_row: List[Dict[int, float]] = [{} for _ in row_order]
    for colname in var_order:
        j = var_data[colname].index
        for row_name, coef in entries[colname].items():
            if coef != 0.0:
                terms_per_row[row_index[row_name]][j] = coef
    constraints = []
    for i, rname in enumerate(row_order):
        lhs, rhs = _row_sides(row_types[rname], row_rhs.get(rname, 0.0),
                              row_range.get(rname))
        constraints.append(
            Constraint(index=i, terms=tuple(sorted(terms_per_row[i].items())),
                       lhs=lhs, rhs=rhs, name=rname)
        )
    problem = build_problem(variables, constraints, sense)
    problem.name = name  # instance label for reports
    return problem


def _parse_sense(token: str, line_number: int) -> ObjSense:
    upper = token.upper()
    if upper in ("MIN", "MINIMIZE"):
        return ObjSense.MIN
    if upper in ("MAX", "MAXIMIZE"):
        return ObjSense.MAX
    raise MpsParseError(f"unknown objective sense {token!r}", line_number)


def _number(token: str, line_number: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise MpsParseError(f"expected a number, got {token!r}", line_number) from None


def _pairs(tokens: List[str], line_number: int):
    if len(tokens) % 2 != 0:
        raise MpsParseError("expected (name, value) pairs", line_number)
    for i in range(0, len(tokens), 2):
        yield tokens[i], _number(tokens[i + 1], line_number)


def _named_pairs(tokens: List[str], line_number: int):
    """RHS/RANGES lines: optional set name followed by (row, value) pairs."""
    rest = tokens[1:] if len(tokens) % 2 == 1 else tokens
    yield from _pairs(rest, line_number)


def _apply_bound(data: _VarData, btype: str, value: Optional[float],
                 line_number: int) -> None:
    needs_value = btype in ("LO", "UP", "FX", "LI", "UI")
    if needs_value and value is None:
        raise MpsParseError(f"bound type {btype} needs a value", line_number)
    data.saw_bounds = True
    if btype == "LO":
        data.lower = value
    elif btype == "UP":
        data.upper = value
    elif btype == "FX":
        data.lower = data.upper = value
    elif btype == "FR":
        data.lower, data.upper = -INF, INF
    elif btype == "MI":
        data.lower = -INF
    elif btype == "PL":
        data.upper = INF
    elif btype == "BV":
        data.integral = True
        data.lower, data.upper = 0.0, 1.0
    elif btype == "LI":
        data.integral = True
        data.lower = math.ceil(value)
    elif btype == "UI":
        data.integral = True
        data.upper = math.floor(value)


def _finish_variable(data: _VarData) -> Variable:
    lower = 0.0 if data.lower is None else normalize_bound(data.lower)
    if data.upper is not None:
        upper = normalize_bound(data.upper)
    elif data.integral and not data.saw_bounds:
        upper = 1.0
    else:
        upper = INF
    if data.integral:
        if math.isfinite(lower):
            lower = math.ceil(lower - 1e-9)
        if math.isfinite(upper):
            upper = math.floor(upper + 1e-9)
        kind = VarKind.BINARY if (lower, upper) == (0.0, 1.0) else VarKind.INTEGER
    else:
        kind = VarKind.CONTINUOUS
    return Variable(index=data.index, lower=lower, upper=upper, kind=kind,
                    objective=data.objective, name=data.name)


def _row_sides(rtype: str, rhs: float, range_value: Optional[float]):
    if rtype == "L":
        lhs, upper = -INF, rhs
        if range_value is not None:
            lhs = rhs - abs(range_value)
        return lhs, upper
    if rtype == "G":
        lower, rhs_side = rhs, INF
        if range_value is not None:
            rhs_side = rhs + abs(range_value)
        return lower, rhs_side
    # E row
    if range_value is None or range_value == 0.0:
        return rhs, rhs
    if range_value > 0:
        return rhs, rhs + range_value
    return rhs + range_value, rhs


# ---------------------------------------------------------------------------
# Run reports


def _sig6(value: float) -> float:
    if not math.isfinite(value):
        return value
    return float(f"{value:.6g}")


@dataclass
class RunReport:
    """Per-run metrics mirroring the reduction-count table of the tool."""

    instance: str
    mode: str
    elapsed_seconds: float
    fixings: int
    substitutions: int
    bound_changes: int
    implications: int
    clique_upgrades: int
    propagations: int
    propagations_per_second: float
    reductions_per_propagation: float
    cliques: List[dict] = field(default_factory=list)
    infeasible: bool = False
    input_digest: str = ""


def make_report(instance: str, mode: str, elapsed_seconds: float, ledger,
                clique_records=(), infeasible: bool = False,
                input_digest: str = "") -> RunReport:
    """Assemble a report from a ledger, normalizing derived floats to 6 digits."""
    reductions = ledger.fixings + ledger.substitutions + ledger.bound_changes
    props = ledger.propagations
    per_prop = reductions / props if props > 0 else 0.0
    per_second = props / elapsed_seconds if elapsed_seconds > 0 else 0.0
    return RunReport(
        instance=instance,
        mode=mode,
        elapsed_seconds=_sig6(elapsed_seconds),
        fixings=int(ledger.fixings),
        substitutions=int(ledger.substitutions),
        bound_changes=int(ledger.bound_changes),
        implications=int(ledger.implications),
        clique_upgrades=int(ledger.clique_upgrades),
        propagations=int(props),
        propagations_per_second=_sig6(per_second),
        reductions_per_propagation=_sig6(per_prop),
        cliques=[
            {
                "size": int(r.size),
                "assignments_probed": int(r.assignments_probed),
                "aborted": bool(r.aborted),
            }
            for r in clique_records
        ],
        infeasible=bool(infeasible),
        input_digest=input_digest,
    )


def write_report(report: RunReport) -> str:
    """One JSON document per run, keys in declaration order, floats at 6 digits."""
    payload = {}
    for f in fields(RunReport):
        value = getattr(report, f.name)
        if isinstance(value, float):
            value = _sig6(value)
        payload[f.name] = value
    return json.dumps(payload, separators=(", ", ": "))


def parse_report(text: str) -> RunReport:
    data = json.loads(text)
    return RunReport(**data)


def read_reports(text: str) -> List[RunReport]:
    return [parse_report(line) for line in text.splitlines() if line.strip()]
