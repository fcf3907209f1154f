"""MPS export of linearized models.

Free-format MPS (names may exceed eight characters).  Maximization problems
are written as minimization of the negated objective; a comment line records
the original sense so solution readers can undo it.
"""

from __future__ import annotations

import math
from pathlib import Path

from mipnn.errors import BuildError
from mipnn.mip.model import BINARY, MipModel

MAX_NAME = 255
SENSE_COMMENT = "* OBJSENSE"


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _row_names(model: MipModel) -> list[str]:
    names, seen = [], {"OBJ"}
    for i, c in enumerate(model.constraints):
        name = c.name if c.name and c.name not in seen else f"R{i}"
        if name in seen:
            raise BuildError(f"cannot give row {i} a unique name")
        seen.add(name)
        names.append(name)
    return names


def mps_text(model: MipModel) -> str:
    if model.indicators:
        raise BuildError("linearize indicator constraints before MPS export")
    for v in model.variables:
        if len(v.name) > MAX_NAME or not v.name or any(ch.isspace() for ch in v.name):
            raise BuildError(f"variable name {v.name!r} is not valid in MPS")
    if model.objective.expr.constant:
        raise BuildError("objective constants are not exported")
    flip = -1.0 if model.objective.sense == "max" else 1.0
    rows = _row_names(model)

    columns: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for v, coef in sorted(model.objective.expr.terms.items()):
        columns[v].append(("OBJ", flip * coef))
    for name, c in zip(rows, model.constraints):
        for v, coef in c.terms:
            columns[v].append((name, coef))

    out = [
        f"* mipnn model {model.name}",
        f"{SENSE_COMMENT} {model.objective.sense.upper()}"
        + (" (objective row negated)" if flip < 0 else ""),
        f"NAME {model.name}",
        "ROWS",
        " N  OBJ",
    ]
    code = {"<=": "L", ">=": "G", "=": "E"}
    out += [f" {code[c.sense]}  {name}" for name, c in zip(rows, model.constraints)]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for var, entries in zip(model.variables, columns):
        if var.is_integral != in_int:
            tag = "INTORG" if var.is_integral else "INTEND"
            out.append(f"    MARKER{marker} 'MARKER' '{tag}'")
            marker += 1
            in_int = var.is_integral
        if not entries:
            # keep the column declared even when it appears nowhere
            entries = [("OBJ", 0.0)]
        out += [f"    {var.name} {row} {_num(coef)}" for row, coef in entries]
    if in_int:
        out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    out += [f"    RHS {name} {_num(c.rhs)}" for name, c in zip(rows, model.constraints) if c.rhs != 0]
    out.append("BOUNDS")
    for var in model.variables:
        if var.kind == BINARY:
            out.append(f" BV BND {var.name}")
        elif var.lb == var.ub:
            out.append(f" FX BND {var.name} {_num(var.lb)}")
        else:
            if var.lb == -math.inf:
                out.append(f" MI BND {var.name}")
            else:
                out.append(f" LO BND {var.name} {_num(var.lb)}")
            if var.ub == math.inf:
                out.append(f" PL BND {var.name}")
            else:
                out.append(f" UP BND {var.name} {_num(var.ub)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_mps(model: MipModel, path) -> None:
    """Write ``model`` (without indicator constraints) to ``path``."""
    text = mps_text(model)
    try:
        Path(path).write_text(text, encoding="ascii")
    except OSError as exc:
        raise BuildError(f"cannot write {path}: {exc}") from exc


def read_sense(path) -> str:
    """Objective sense recorded in an MPS file written by :func:`export_mps`."""
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if line.startswith(SENSE_COMMENT):
                return "max" if line.split()[2] == "MAX" else "min"
            if not line.startswith("*"):
                break
    return "min"
