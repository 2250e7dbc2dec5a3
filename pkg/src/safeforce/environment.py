"""Reaction-force models: normal force (N) as a function of the tool's normal
coordinate Z (m).  Negative Z is insertion into the surface.

These are simulation ground truth; the controller only ever sees the scalar
force they produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ForceRangeError(ValueError):
    """The requested force cannot be produced by the model."""


@dataclass(frozen=True)
class Spring:
    """``F(Z) = min(k Z, 0)``."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("spring stiffness must be positive")

    def __call__(self, Z):
        return min(self.k * Z, 0.0)

    def describe(self):
        return {"variant": "spring", "k": self.k}


@dataclass(frozen=True)
class SaturatingSpring:
    """Linear spring whose force magnitude is capped at ``|F_sat|``."""

    k: float
    F_sat: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("spring stiffness must be positive")
        if not self.F_sat < 0:
            raise ValueError("saturation force must be negative")

    def __call__(self, Z):
        return max(min(self.k * Z, 0.0), self.F_sat)

    def describe(self):
        return {"variant": "saturating-spring", "k": self.k, "F_sat": self.F_sat}


@dataclass(frozen=True)
class ForceTable:
    """Piecewise-linear interpolation of tabulated (Z, F) samples.

    Samples must be strictly increasing in Z, end with F = 0 at some Z <= 0, and
    be non-decreasing in F.  Outside the table the end values are held.
    """

    Z: tuple
    F: tuple

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        F = np.asarray(self.F, dtype=float)
        if Z.ndim != 1 or Z.shape != F.shape or Z.size < 2:
            raise ValueError("force table needs matching 1-D Z and F arrays with >= 2 samples")
        if np.any(np.diff(Z) <= 0):
            raise ValueError("force table Z samples must be strictly increasing")
        if np.any(np.diff(F) < 0):
            raise ValueError("force table F samples must be non-decreasing in Z")
        if F[-1] != 0.0 or Z[-1] < 0:
            raise ValueError("force table must reach F = 0 at its last sample (Z >= 0 side)")
        if np.any(F > 0):
            raise ValueError("reaction forces must be non-positive")
        object.__setattr__(self, "Z", tuple(Z))
        object.__setattr__(self, "F", tuple(F))

    def __call__(self, Z):
        if Z >= 0:
            return 0.0
        return float(np.interp(Z, self.Z, self.F))

    def describe(self):
        return {"variant": "table", "Z": list(self.Z), "F": list(self.F)}


def reaction_force(Z, model):
    return float(model(Z))


def insertion_for_force(F_d, model, tol=1e-12):
    """The unique insertion Z_d < 0 with F(Z_d) = F_d, by bisection."""
    if not F_d < 0:
        raise ValueError(f"desired force must be negative, got {F_d}")
    if isinstance(model, SaturatingSpring) and F_d <= model.F_sat:
        raise ForceRangeError(f"force {F_d} N is not strictly inside the saturation limit {model.F_sat} N")
    if isinstance(model, Spring):
        lo = 2.0 * F_d / model.k
    else:
        lo = -1.0
        while model(lo) > F_d:
            lo *= 2.0
            if lo < -1e6:
                raise ForceRangeError(f"force {F_d} N is outside the range of {model!r}")
        if model(lo) > F_d:
            raise ForceRangeError(f"force {F_d} N is outside the range of {model!r}")
    hi = 0.0
    # invariant: F(lo) <= F_d < F(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if model(mid) <= F_d:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
