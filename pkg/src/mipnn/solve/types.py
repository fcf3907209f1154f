from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from mipnn.errors import InputError

DEFAULT_TIME_LIMIT = 36000.0


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE_STOPPED = "feasible-stopped"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time-limit"
    ERROR = "error"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolveParams:
    """Solver settings shared by both backends.

    ``stop_callback(assignment, objective) -> bool`` is called on every new
    incumbent by the built-in solver; returning True ends the search with
    status ``feasible-stopped``.  External solvers get ``objective_target``
    instead.  ``hint`` maps variable ids to preferred values; the built-in
    solver tries those values first.
    """

    time_limit: float = DEFAULT_TIME_LIMIT
    seed: int = 0
    stop_at_train_accuracy: float | None = None
    objective_target: float | None = None
    backend: str = "builtin"
    command: str | None = None
    stop_callback: Callable | None = field(default=None, compare=False, repr=False)
    cache_subproblems: bool = True
    hint: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.time_limit > 0:
            raise InputError("time limit must be positive")
        if self.stop_at_train_accuracy is not None and not 0 < self.stop_at_train_accuracy <= 1:
            raise InputError("accuracy threshold must lie in (0, 1]")
        if self.backend not in ("builtin", "external"):
            raise InputError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    status: Status
    objective: float | None
    # value per variable id; NaN where an external solver reported nothing
    assignment: np.ndarray | None
    wall_time: float
    nodes: int | None = None
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.assignment is not None
