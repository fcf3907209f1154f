from mipnn.solve.builtin import BranchAndBound, solve_builtin
from mipnn.solve.decode import (
    decode_network,
    early_stop_check,
    make_stop_callback,
    objective_target,
)
from mipnn.solve.external import ENV_COMMAND, parse_solution, solve_external
from mipnn.solve.mps import export_mps, mps_text
from mipnn.solve.types import SolveOutcome, SolveParams, Status


def solve(model, params: SolveParams | None = None) -> SolveOutcome:
    """Dispatch to the backend named in ``params``."""
    params = params or SolveParams()
    if params.backend == "external":
        return solve_external(model, params)
    return solve_builtin(model, params)
