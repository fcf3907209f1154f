"""Piecewise-linear interpolation of the squared hinge loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mipnn.errors import InputError

Z_MIN, Z_MAX = -2.0, 2.0


def squared_hinge(z, margin: float = 0.5):
    """``max(0, margin - z)**2`` elementwise."""
    return np.maximum(0.0, margin - np.asarray(z, dtype=float)) ** 2


@dataclass(frozen=True, eq=False)
class PwlSpec:
    """Breakpoints on ``[-2, 2]`` with the loss sampled exactly at each one.

    The interpolant overestimates the convex loss between breakpoints by at
    most ``spacing**2 / 4`` and matches it at the breakpoints.
    """

    breakpoints: np.ndarray
    margin: float = 0.5

    def __post_init__(self):
        z = np.asarray(self.breakpoints, dtype=float)
        if z.ndim != 1 or len(z) < 2:
            raise InputError("need at least two breakpoints")
        if np.any(np.diff(z) <= 0):
            raise InputError("breakpoints must be strictly increasing")
        if z[0] != Z_MIN or z[-1] != Z_MAX:
            raise InputError(f"breakpoints must span [{Z_MIN}, {Z_MAX}], got [{z[0]}, {z[-1]}]")
        z.setflags(write=False)
        object.__setattr__(self, "breakpoints", z)
        object.__setattr__(self, "margin", float(self.margin))

    @classmethod
    def uniform(cls, spacing: float = 0.25, margin: float = 0.5) -> "PwlSpec":
        if spacing <= 0:
            raise InputError("breakpoint spacing must be positive")
        n = int(round((Z_MAX - Z_MIN) / spacing))
        z = np.linspace(Z_MIN, Z_MAX, n + 1)
        # keep the kink of the hinge exact
        if not np.any(np.isclose(z, margin, rtol=0, atol=1e-12)) and Z_MIN < margin < Z_MAX:
            z = np.sort(np.append(z, margin))
        return cls(z, margin)

    @property
    def values(self) -> np.ndarray:
        return squared_hinge(self.breakpoints, self.margin)

    def __call__(self, z):
        return np.interp(z, self.breakpoints, self.values)

    def secants(self) -> list[tuple[float, float]]:
        """``(slope, intercept)`` of each segment, consecutive duplicates merged."""
        z, g = self.breakpoints, self.values
        out: list[tuple[float, float]] = []
        for i in range(len(z) - 1):
            slope = (g[i + 1] - g[i]) / (z[i + 1] - z[i])
            intercept = g[i] - slope * z[i]
            if out and out[-1] == (slope, intercept):
                continue
            out.append((float(slope), float(intercept)))
        return out
