"""Velocity bounds with the joint-limit barrier folded in, and the closed-form
feasibility test of the controller QP.

Unbounded entries are stored as ``inf`` / ``-inf``; they never become large
finite numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True, eq=False)
class LimitConfig:
    """Vehicle rate limits (x, y, z in m/s, yaw in rad/s), arm rate limits
    (rad/s or m/s), joint position limits and the joint-barrier gain K_L (1/s)."""

    u_D_lower: np.ndarray
    u_D_upper: np.ndarray
    u_m_lower: np.ndarray
    u_m_upper: np.ndarray
    q_m_lower: np.ndarray
    q_m_upper: np.ndarray
    K_L: float = 0.5

    def __post_init__(self):
        for name in ("u_D_lower", "u_D_upper", "u_m_lower", "u_m_upper", "q_m_lower", "q_m_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.u_D_lower.shape != (4,) or self.u_D_upper.shape != (4,):
            raise ContractError("vehicle rate limits must have 4 entries (x, y, z, yaw)")
        m = self.u_m_lower.shape[0]
        if any(getattr(self, k).shape != (m,) for k in ("u_m_upper", "q_m_lower", "q_m_upper")):
            raise ContractError("arm limit vectors must all have the same length")
        if not (np.all(self.u_D_lower < 0) and np.all(self.u_D_upper > 0)):
            raise ContractError("vehicle rate limits must satisfy lower < 0 < upper")
        if not (np.all(self.u_m_lower < 0) and np.all(self.u_m_upper > 0)):
            raise ContractError("arm rate limits must satisfy lower < 0 < upper")
        if not np.all(self.q_m_lower < self.q_m_upper):
            raise ContractError("joint limits must satisfy lower < upper")
        if not np.all(np.isfinite(np.concatenate([self.u_m_lower, self.u_m_upper, self.q_m_lower, self.q_m_upper]))):
            raise ContractError("arm limits must be finite")
        if not self.K_L > 0:
            raise ContractError("K_L must be positive")

    @property
    def z_unbounded(self):
        return np.isinf(self.u_D_lower[2]) and np.isinf(self.u_D_upper[2])


@dataclass(frozen=True, eq=False)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray


def velocity_bounds(q, cfg):
    """Box on the commanded rate: vehicle entries copied, arm entries tightened
    by the joint-limit barrier ``K_L (q_limit - q_m)``."""
    q_m = np.asarray(q, dtype=float)[4:]
    if q_m.shape != cfg.q_m_lower.shape:
        raise ContractError(f"configuration has {q_m.shape[0]} arm joints, limits describe {cfg.q_m_lower.shape[0]}")
    lo = np.concatenate([cfg.u_D_lower, np.maximum(cfg.u_m_lower, cfg.K_L * (cfg.q_m_lower - q_m))])
    hi = np.concatenate([cfg.u_D_upper, np.minimum(cfg.u_m_upper, cfg.K_L * (cfg.q_m_upper - q_m))])
    return Bounds(lo, hi)


def b_star(grad_B, bounds):
    """Vertex of the box maximising grad_B . mu: lower bound where the gradient
    is negative, upper bound otherwise (ties go to the upper bound)."""
    g = np.asarray(grad_B, dtype=float)
    return np.where(g < 0, bounds.lower, bounds.upper)


def box_lp_value(grad_B, bounds):
    """max of grad_B . mu over the box; ``inf`` when an unbounded entry has a
    non-zero gradient component."""
    g = np.asarray(grad_B, dtype=float)
    v = b_star(g, bounds)
    with np.errstate(invalid="ignore"):  # 0 * inf is masked out below
        terms = np.where(g == 0, 0.0, g * v)
    return float(np.sum(terms))


def feasibility_margin(q, grad_B, B, bounds, shaping):
    """``grad_B . b* + kappa_B(B)``; the controller QP is feasible iff this is >= 0.

    ``q`` is accepted for interface symmetry only.
    """
    return box_lp_value(grad_B, bounds) + shaping.kappa_B(B)


def limit_preset(name="paper-exp"):
    """Rate and joint limits of the experiments (angles given there in degrees).

    ``paper-exp-bounded-z`` caps the normal-direction rate at 0.3 m/s.
    """
    d = np.radians
    u_D = np.array([0.1, 0.15, np.inf, d(5.7)])
    if name == "paper-exp-bounded-z":
        u_D = np.array([0.1, 0.15, 0.3, d(5.7)])
    elif name != "paper-exp":
        raise KeyError(f"unknown limit preset {name!r}")
    return LimitConfig(
        u_D_lower=-u_D,
        u_D_upper=u_D,
        u_m_lower=-d([20.0, 20.0]),
        u_m_upper=d([20.0, 20.0]),
        q_m_lower=-d([70.0, 105.0]),
        q_m_upper=d([70.0, 105.0]),
        K_L=0.5,
    )
