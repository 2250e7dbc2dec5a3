"""Task coordinates, alignment error A and the distance-alignment barrier B."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kinematics import E_Z


@dataclass(frozen=True)
class TaskCoordinates:
    r_X: float
    r_Y: float
    r_O: float
    r_Z: float


@dataclass(frozen=True)
class BarrierState:
    A: float
    B: float
    Z: float
    grad_A: np.ndarray
    grad_B: np.ndarray


def task_coordinates(ee, Z_d, xy_ref=(0.0, 0.0)):
    """r_X, r_Y relative to the in-plane target (origin by default), r_O = 1 + e_z.z
    in [0, 2], and r_Z = Z - Z_d."""
    r_O = 1.0 + float(E_Z @ ee.z_axis)
    r_O = min(max(r_O, 0.0), 2.0)  # rounding can leave the closed interval
    return TaskCoordinates(ee.X - xy_ref[0], ee.Y - xy_ref[1], r_O, ee.Z - Z_d)


def orientation_error_deg(r_O):
    """Angle between the tool axis and the inward normal, in degrees."""
    return np.degrees(np.arccos(np.clip(1.0 - np.asarray(r_O), -1.0, 1.0)))


def dVF_drZ(Z, F_measured, shaping):
    """Derivative of the force potential, kappa_F(Z, F - F_d).

    Only the measured force is needed; the potential itself is never formed.
    """
    return float(shaping.kappa_F(Z, F_measured - shaping.F_d))


def alignment(tc, shaping):
    return float(shaping.V_A_XY(tc.r_X, tc.r_Y) + shaping.kappa_A_O(tc.r_O))


def alignment_gradient(tc, grads, shaping):
    gx, gy = shaping.V_A_XY.grad(tc.r_X, tc.r_Y)
    return gx * grads.X + gy * grads.Y + shaping.kappa_A_O.deriv(tc.r_O) * grads.r_O


def barrier(q, ee, A, shaping, grads=None, grad_A=None):
    """B = Z - Z_d* - kappa_A(A) and, when gradients are supplied, its gradient
    ``grad_Z - kappa_A'(A) grad_A``.

    ``q`` is accepted for interface symmetry; everything needed is in ``ee``.
    """
    if A < 0:
        raise ValueError(f"alignment error must be non-negative, got {A}")
    B = ee.Z - shaping.Z_d_star - shaping.kappa_A(A)
    grad_B = None
    if grads is not None and grad_A is not None:
        grad_B = grads.Z - shaping.kappa_A.deriv(A) * grad_A
    return BarrierState(float(A), float(B), float(ee.Z), grad_A, grad_B)


def potential_vf(r_Z, force_model, shaping, Z_d):
    """Diagnostic force potential: integral of kappa_F(xi + Z_d, F(xi + Z_d) - F_d)
    from 0 to r_Z, by adaptive quadrature with a breakpoint at first contact."""
    if r_Z == 0.0:
        return 0.0

    def g(xi):
        Z = xi + Z_d
        return shaping.kappa_F(Z, force_model(Z) - shaping.F_d)

    lo, hi = sorted((0.0, r_Z))
    contact = -Z_d  # xi at which Z = 0
    pts = [contact] if lo < contact < hi else None
    val, _ = integrate.quad(g, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-11, limit=200)
    return float(val if r_Z > 0 else -val)
