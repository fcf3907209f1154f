"""Solving through an external MILP solver process.

The solver is reached through a command template such as::

    mipnn-highs {mps} {sol} --time-limit {time_limit_s} --target {target}

``{target}`` is expressed in the sense of the exported (minimization) file and
is ``none`` when no target applies.  The process must write a solution file
of ``name value`` lines; lines starting with a non-alphanumeric character are
comments, and ``# status: <status>`` comments are honoured.  Exit codes: 0
success, 2 infeasible, 3 time limit without incumbent, 4 solver error.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np

from mipnn.errors import DecodeError, InputError, ParseError, SolverError
from mipnn.mip.model import MipModel
from mipnn.solve.decode import round_integral
from mipnn.solve.mps import export_mps
from mipnn.solve.types import SolveOutcome, SolveParams, Status

log = logging.getLogger(__name__)

ENV_COMMAND = "MIPNN_SOLVER_CMD"
GRACE_SECONDS = 30.0
EXIT_OK, EXIT_INFEASIBLE, EXIT_NO_INCUMBENT, EXIT_ERROR = 0, 2, 3, 4


def parse_solution(path, model: MipModel) -> tuple[np.ndarray, dict]:
    """Read a ``name value`` solution file.

    Returns the assignment (NaN for variables the file does not mention) and
    metadata gathered from ``# key: value`` comments.
    """
    values = np.full(model.n_vars, np.nan)
    meta: dict[str, str] = {}
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if not text[0].isalnum():
                body = text.lstrip("#*!; ").strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    meta[key.strip().lower()] = value.strip()
                continue
            parts = text.split()
            if len(parts) < 2:
                raise ParseError("expected 'name value'", path=path, line=lineno)
            name, raw = parts[0], parts[1]
            try:
                value = float(raw)
            except ValueError:
                raise ParseError(f"bad value {raw!r} for {name!r}", path=path, line=lineno) from None
            if not model.has_var(name):
                log.debug("%s:%d: ignoring unknown variable %s", path, lineno, name)
                continue
            values[model.var_index(name)] = value
    return values, meta


def snap_integers(values: np.ndarray, model: MipModel) -> np.ndarray:
    """Round integer variables, rejecting values more than 1e-4 from an integer."""
    out = values.copy()
    for var in model.variables:
        if var.is_integral and not np.isnan(out[var.index]):
            out[var.index] = round_integral(float(out[var.index]), var.name)
    return out


def _command(params: SolveParams) -> str:
    command = params.command or os.environ.get(ENV_COMMAND)
    if not command:
        raise InputError(f"no external solver command: pass one or set {ENV_COMMAND}")
    return command


def solve_external(model: MipModel, params: SolveParams) -> SolveOutcome:
    """Export ``model`` to MPS, run the external solver and read its solution back."""
    template = _command(params)
    if model.indicators:
        raise InputError("external solvers need a linearized model")
    start = time.perf_counter()
    flip = -1.0 if model.objective.sense == "max" else 1.0
    target = "none" if params.objective_target is None else format(flip * params.objective_target, ".17g")
    with tempfile.TemporaryDirectory(prefix="mipnn-") as tmp:
        mps = Path(tmp) / "model.mps"
        sol = Path(tmp) / "model.sol"
        export_mps(model, mps)
        time_limit = params.time_limit
        cmd = template.format(
            mps=shlex.quote(str(mps)),
            sol=shlex.quote(str(sol)),
            time_limit_s=format(time_limit, "g"),
            target=target,
        )
        log.info("running %s", cmd)
        try:
            proc = subprocess.run(
                shlex.split(cmd), capture_output=True, text=True, timeout=time_limit + GRACE_SECONDS
            )
            code = proc.returncode
            stderr = proc.stderr
        except subprocess.TimeoutExpired:
            code, stderr = None, "killed after time limit"
        except OSError as exc:
            raise SolverError(f"cannot start solver: {exc}") from exc
        wall = time.perf_counter() - start

        if code == EXIT_INFEASIBLE:
            return SolveOutcome(Status.INFEASIBLE, None, None, wall, message=stderr.strip())
        if code == EXIT_NO_INCUMBENT:
            return SolveOutcome(Status.TIME_LIMIT, None, None, wall, message=stderr.strip())
        if not sol.is_file() or sol.stat().st_size == 0:
            raise SolverError(f"solver exited with {code} and wrote no solution: {stderr.strip()[-500:]}")
        values, meta = parse_solution(sol, model)

    values = snap_integers(values, model)
    status_text = meta.get("status")
    if status_text in {s.value for s in Status}:
        status = Status(status_text)
    else:
        status = Status.OPTIMAL if code == EXIT_OK else Status.TIME_LIMIT
    objective_vars = list(model.objective.expr.terms)
    if objective_vars and np.isnan(values[objective_vars]).any():
        if "objective" not in meta:
            raise DecodeError("solution lacks objective variables and an objective value")
        objective = flip * float(meta["objective"])
    else:
        objective = model.objective_value(np.nan_to_num(values))
    if not math.isfinite(objective):
        raise DecodeError("solution objective is not finite")
    return SolveOutcome(status, float(objective), values, wall, message=stderr.strip()[-500:] if stderr else "")
