"""Plain-text LP interchange for ``MilpInstance``.

The layout follows the CPLEX LP dialect, so external solvers can read it::

    \\ mipdrive milp: <n> vars, <m> rows
    Minimize
     obj: + 1 q + 0
    Subject To
     r0: + 1 v_t1 - 1 q <= 25
    Bounds
     0 <= q <= 11
     -inf <= w <= +inf
    General
     z_t1
    Binary
     a_l_t0
    End

Variable names are ``tag[_j<j>][_t<t>]``.  Rows are labelled ``r<n>``; the
compiler's own row name travels in a ``\\row r<n> <name>`` comment.  Numbers
are written with ``repr`` so an export/import round trip is exact.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from mipdrive.compiler import BINARY, CONTINUOUS, INTEGER, Constraint, LinearExpr, MilpInstance, VarInfo

_NAME = re.compile(r"^(?P<tag>.+?)(?:_j(?P<j>-?\d+))?(?:_t(?P<t>\d+))?$")

PRIORITY = {"z": 3, "a_l": 3, "a_r": 3, "beta": 2, "mu": 2, "nu": 2}


class LpFormatError(ValueError):
    pass


def _num(x: float) -> str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return repr(float(x))


def _terms(coefs, names) -> str:
    parts = []
    for k, v in coefs.items():
        sign = "-" if v < 0 or (v == 0 and math.copysign(1.0, v) < 0) else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[k]}")
    return " ".join(parts)


def dumps(inst: MilpInstance) -> str:
    names = [v.name for v in inst.vars]
    if len(set(names)) != len(names):
        raise LpFormatError("variable names are not unique")
    lines = [f"\\ mipdrive milp: {inst.n_vars} vars, {inst.n_rows} rows", "Minimize"]
    obj = _terms(inst.objective.coefs, names)
    const = inst.objective.const
    lines.append(f" obj: {obj} {'-' if const < 0 else '+'} {_num(abs(const))}".replace("  ", " "))
    lines.append("Subject To")
    for n, row in enumerate(inst.constraints):
        if row.name:
            lines.append(f"\\row r{n} {row.name}")
        body = _terms(row.coefs, names) or "+ 0"
        lines.append(f" r{n}: {body} <= {_num(row.rhs)}")
    lines.append("Bounds")
    for v in inst.vars:
        lines.append(f" {_num(v.lo)} <= {v.name} <= {_num(v.hi)}")
    ints = [v.name for v in inst.vars if v.kind == INTEGER]
    bins = [v.name for v in inst.vars if v.kind == BINARY]
    if ints:
        lines += ["General"] + [f" {n}" for n in ints]
    if bins:
        lines += ["Binary"] + [f" {n}" for n in bins]
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_terms(text: str, index: dict[str, int], where: str) -> tuple[dict[int, float], float]:
    text = text.strip()
    if text and text[0] not in "+-":
        text = "+ " + text
    coefs: dict[int, float] = {}
    const = 0.0
    pos = 0
    tokens = text.split()
    while pos < len(tokens):
        sign = tokens[pos]
        if sign not in "+-" or pos + 1 >= len(tokens):
            raise LpFormatError(f"{where}: malformed expression near {' '.join(tokens[pos:pos + 3])!r}")
        value = float(tokens[pos + 1])
        if sign == "-":
            value = -value
        if pos + 2 < len(tokens) and tokens[pos + 2] not in "+-":
            name = tokens[pos + 2]
            if name not in index:
                raise LpFormatError(f"{where}: unknown variable {name!r}")
            k = index[name]
            coefs[k] = coefs.get(k, 0.0) + value
            pos += 3
        else:
            const += value
            pos += 2
    return coefs, const


def loads(text: str) -> MilpInstance:
    """Inverse of :func:`dumps`.  Variables are declared by the Bounds section."""
    section = None
    obj_line = None
    rows: list[tuple[int, str]] = []
    row_names: dict[str, str] = {}
    bounds: list[tuple[int, str]] = []
    ints: set[str] = set()
    bins: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("\\row "):
            _, label, *rest = line.split(" ", 2)
            row_names[label] = rest[0] if rest else ""
            continue
        if not line or line.startswith("\\"):
            continue
        key = line.lower()
        if key in ("minimize", "subject to", "bounds", "general", "binary", "end"):
            section = key
            continue
        if section == "minimize":
            obj_line = (lineno, line)
        elif section == "subject to":
            rows.append((lineno, line))
        elif section == "bounds":
            bounds.append((lineno, line))
        elif section == "general":
            ints.update(line.split())
        elif section == "binary":
            bins.update(line.split())
        else:
            raise LpFormatError(f"line {lineno}: content outside a section")
    if section != "end":
        raise LpFormatError("missing End")
    vars: list[VarInfo] = []
    index: dict[str, int] = {}
    for lineno, line in bounds:
        parts = line.split()
        if len(parts) != 5 or parts[1] != "<=" or parts[3] != "<=":
            raise LpFormatError(f"line {lineno}: expected 'lo <= name <= hi'")
        name = parts[2]
        m = _NAME.match(name)
        tag = m.group("tag")
        kind = BINARY if name in bins else INTEGER if name in ints else CONTINUOUS
        prio = 0 if kind == CONTINUOUS else PRIORITY.get(tag, 1)
        index[name] = len(vars)
        vars.append(VarInfo(
            len(vars), kind, float(parts[0]), float(parts[4]), tag,
            int(m.group("j")) if m.group("j") else None,
            int(m.group("t")) if m.group("t") else None,
            prio,
        ))
    unknown = (ints | bins) - set(index)
    if unknown:
        raise LpFormatError(f"integrality declared for unknown variables {sorted(unknown)}")
    if obj_line is None:
        raise LpFormatError("missing objective")
    lineno, line = obj_line
    body = line.split(":", 1)[1] if ":" in line else line
    coefs, const = _parse_terms(body, index, f"line {lineno}")
    objective = LinearExpr(coefs, const)
    constraints = []
    for lineno, line in rows:
        label, _, body = line.partition(":")
        lhs, sep, rhs = body.rpartition("<=")
        if not sep:
            raise LpFormatError(f"line {lineno}: only '<=' rows are supported")
        coefs, const = _parse_terms(lhs, index, f"line {lineno}")
        if const:
            raise LpFormatError(f"line {lineno}: constant on the left-hand side")
        constraints.append(Constraint(coefs, float(rhs), row_names.get(label.strip(), "")))
    return MilpInstance(objective, constraints, vars)


def write_lp(inst: MilpInstance, path) -> Path:
    path = Path(path)
    path.write_text(dumps(inst), encoding="utf-8")
    return path


def read_lp(path) -> MilpInstance:
    return loads(Path(path).read_text(encoding="utf-8"))
