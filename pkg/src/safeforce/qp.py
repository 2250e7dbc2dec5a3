"""Strictly convex QP with one general inequality and box bounds.

    minimize    1/2 mu' H mu + f' mu
    subject to  c' mu >= d,   lower <= mu <= upper

solved by a dense primal active-set method.  Infinite bounds are simply never
part of the working set.  Duals are reported for the objective exactly as
written above (so for H = 2(...) they are twice the duals of the unscaled
resolved-rate cost; see :meth:`QPSolution.scaled`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError
from .limits import Bounds, b_star, box_lp_value

PIVOT_FLOOR = 1e-14
MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class QPProblem:
    H: np.ndarray
    f: np.ndarray
    cbf_row: np.ndarray
    cbf_rhs: float
    bounds: Bounds
    E_diag: np.ndarray = None
    const: float = 0.0  # dropped constant of the objective, re-added in reports

    @property
    def n(self):
        return self.f.shape[0]

    def objective(self, mu):
        mu = np.asarray(mu, dtype=float)
        return float(0.5 * mu @ self.H @ mu + self.f @ mu + self.const)


@dataclass(frozen=True, eq=False)
class QPSolution:
    status: str  # "feasible" | "infeasible"
    mu: np.ndarray = None
    lam: float = 0.0
    lam_lower: np.ndarray = None
    lam_upper: np.ndarray = None
    kkt_residual: float = 0.0
    active_set: tuple = ()
    margin: float = 0.0
    iterations: int = 0
    objective: float = float("nan")

    @property
    def feasible(self):
        return self.status == "feasible"

    def scaled(self, factor):
        """Copy with all duals multiplied by ``factor``."""
        if not self.feasible:
            return self
        return replace(
            self, lam=self.lam * factor, lam_lower=self.lam_lower * factor, lam_upper=self.lam_upper * factor
        )


def assemble(grad_rZ, grad_B, B, dVF, bounds, E_diag, shaping, barrier_rate_ff=0.0):
    """Expand the resolved-rate cost (grad_rZ' mu + dVF)^2 + mu' E mu.

    ``barrier_rate_ff`` is an explicit time derivative of B (moving targets);
    it shifts the CBF right-hand side and is zero for static targets.
    """
    g = np.asarray(grad_rZ, dtype=float)
    c = np.asarray(grad_B, dtype=float)
    e = np.asarray(E_diag, dtype=float)
    n = g.shape[0]
    if c.shape != (n,) or e.shape != (n,) or bounds.lower.shape != (n,) or bounds.upper.shape != (n,):
        raise ContractError(
            f"dimension mismatch: grad_rZ {g.shape}, grad_B {c.shape}, E {e.shape}, bounds {bounds.lower.shape}"
        )
    if np.any(e < 0):
        raise ContractError("regularisation weights must be non-negative")
    if e[2] != 0.0:
        raise ContractError("the regularisation weight on the normal coordinate must be exactly 0")
    H = 2.0 * (np.outer(g, g) + np.diag(e))
    f = 2.0 * dVF * g
    rhs = -float(shaping.kappa_B(B)) - float(barrier_rate_ff)
    return QPProblem(H, f, c, rhs, bounds, e, float(dVF) ** 2)


def _pd_check(H):
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ContractError("Hessian is not positive definite") from None
    piv = np.diag(L) ** 2
    if piv.min() <= PIVOT_FLOOR:
        raise ContractError(f"Hessian pivot {piv.min():.3e} below floor {PIVOT_FLOOR}")


def _phase1(p):
    """A point of box cap halfspace, or None when the set is empty."""
    lo, hi, c, d = p.bounds.lower, p.bounds.upper, p.cbf_row, p.cbf_rhs
    try:
        v = np.linalg.solve(p.H, -p.f)
    except np.linalg.LinAlgError:
        v = np.zeros(p.n)
    v = np.minimum(np.maximum(v, lo), hi)
    cv = float(c @ v)
    if cv >= d:
        return v
    bs = np.where(c == 0, v, b_star(c, p.bounds))
    inf_dirs = np.flatnonzero(~np.isfinite(bs) & (c != 0))
    if inf_dirs.size:
        k = inf_dirs[np.argmax(np.abs(c[inf_dirs]))]
        v = v.copy()
        v[k] += (d - cv) / c[k]
        return v
    gain = float(c @ (bs - v))
    if gain <= 0 or cv + gain < d:
        return None
    t = min((d - cv) / gain, 1.0)
    mu = v + t * (bs - v)
    # land exactly on the box where t = 1 or where the blend already sits on it
    return np.minimum(np.maximum(mu, lo), hi)


def _warm_point(p, active_set):
    """Minimiser over the face described by ``active_set`` if it is feasible."""
    lo, hi, c, d = p.bounds.lower, p.bounds.upper, p.cbf_row, p.cbf_rhs
    state = np.zeros(p.n, dtype=np.int8)
    cbf_on = False
    for a in active_set:
        if a == "cbf":
            cbf_on = True
        else:
            i, side = a
            if side == "lower" and np.isfinite(lo[i]):
                state[i] = -1
            elif side == "upper" and np.isfinite(hi[i]):
                state[i] = 1
    mu = np.where(state == -1, lo, np.where(state == 1, hi, 0.0))
    F = np.flatnonzero(state == 0)
    if F.size:
        rhs = np.column_stack([-(p.f[F] + p.H[F] @ mu), c[F]])
        sol = np.linalg.solve(p.H[F[:, None], F], rhs)
        x = sol[:, 0]
        nu = 0.0
        if cbf_on:
            cw = c[F] @ sol[:, 1]
            if cw <= 1e-14:
                return None
            nu = (d - c @ mu - c[F] @ x) / cw
            x = x + nu * sol[:, 1]
        mu[F] = x
    elif cbf_on:
        return None
    else:
        nu = 0.0
    scale = 1e-12 * (1.0 + np.abs(mu).max())
    if np.any(mu < lo - scale) or np.any(mu > hi + scale) or c @ mu < d - scale * (1.0 + np.abs(c).sum()):
        return None
    return np.minimum(np.maximum(mu, lo), hi), state, cbf_on, float(nu)


def solve(p, tol=1e-12, active_set=None):
    """Global minimiser with duals; infeasible when the box-LP margin is negative.

    ``active_set`` (as returned in a previous solution) is only a starting
    guess; the result is the unique minimiser whatever guess is given.
    """
    n = p.n
    lo, hi, c, d = p.bounds.lower, p.bounds.upper, p.cbf_row, p.cbf_rhs
    _pd_check(p.H)
    if np.any(lo > hi):
        return QPSolution("infeasible", margin=-float(np.max(lo - hi)))
    margin = box_lp_value(c, p.bounds) - d
    if margin < 0:
        return QPSolution("infeasible", margin=margin)
    warm = _warm_point(p, active_set) if active_set is not None else None
    known_nu = None
    if warm is not None:
        # already the minimiser on its face: the first iteration only prices it
        mu, state, cbf_on, known_nu = warm
    else:
        mu = _phase1(p)
        if mu is None:
            return QPSolution("infeasible", margin=margin)
        # working set: state[i] = -1 at lower, +1 at upper, 0 free
        state = np.zeros(n, dtype=np.int8)
        state[mu == lo] = -1
        state[(mu == hi) & (state == 0)] = 1
        cbf_on = False
    H, f = p.H, p.f
    lo_fin, hi_fin = np.isfinite(lo), np.isfinite(hi)
    rhs = np.empty((n, 2))
    it = 0
    lam = 0.0
    for it in range(1, MAX_ITER + 1):
        g = H @ mu + f
        F = np.flatnonzero(state == 0)
        step = np.zeros(n)
        nu = 0.0
        if known_nu is not None:
            nu, known_nu = known_nu, None
        elif F.size:
            k = F.size
            rhs[:k, 0] = g[F]
            rhs[:k, 1] = c[F]
            sol = np.linalg.solve(H[F[:, None], F], rhs[:k])
            if cbf_on:
                cF = rhs[:k, 1]
                nu = (cF @ sol[:, 0]) / (cF @ sol[:, 1])
                step[F] = nu * sol[:, 1] - sol[:, 0]
            else:
                step[F] = -sol[:, 0]
        elif cbf_on:
            # every variable fixed by bounds; the CBF row is redundant here
            cbf_on = False
        if np.abs(step).max() <= 1e-13 * (1.0 + np.abs(mu).max()):
            lam = nu if cbf_on else 0.0
            r = g - lam * c
            mult = np.where(state == -1, r, np.where(state == 1, -r, 0.0))
            worst = int(mult.argmin())
            wc = lam if cbf_on else 0.0
            thresh = -tol * (1.0 + np.abs(g).max())
            if min(mult[worst], wc) >= thresh:
                break
            if wc < mult[worst]:
                cbf_on = False
            else:
                state[worst] = 0
            continue
        # ratio test against constraints outside the working set
        alpha, block = 1.0, None
        if not cbf_on:
            cs = c @ step
            if cs < 0:
                a = max(c @ mu - d, 0.0) / -cs
                if a < alpha:
                    alpha, block = a, (0, 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            a_lo = np.where((step < 0) & lo_fin, (mu - lo) / -step, np.inf)
            a_hi = np.where((step > 0) & hi_fin, (hi - mu) / step, np.inf)
        i_lo, i_hi = int(a_lo.argmin()), int(a_hi.argmin())
        if a_lo[i_lo] < alpha:
            alpha, block = max(a_lo[i_lo], 0.0), (-1, i_lo)
        if a_hi[i_hi] < alpha:
            alpha, block = max(a_hi[i_hi], 0.0), (1, i_hi)
        mu = mu + alpha * step
        if block is not None:
            side, i = block
            if side == 0:
                cbf_on = True
            elif side == -1:
                mu[i] = lo[i]
                state[i] = -1
            else:
                mu[i] = hi[i]
                state[i] = 1
    else:
        raise RuntimeError("active-set iteration limit reached")

    g = H @ mu + f
    lam = max(lam, 0.0) if cbf_on else 0.0
    r = g - lam * c
    lam_lower = np.where(state == -1, np.maximum(r, 0.0), 0.0)
    lam_upper = np.where(state == 1, np.maximum(-r, 0.0), 0.0)
    active = (("cbf",) if cbf_on else ()) + tuple(
        (i, "lower" if s == -1 else "upper") for i, s in enumerate(state.tolist()) if s
    )
    res = _residual(p, mu, g, lam, lam_lower, lam_upper)
    obj = float(0.5 * (mu @ (g + f)) + p.const)
    return QPSolution("feasible", mu, float(lam), lam_lower, lam_upper, res, active, float(margin), it, obj)


def _residual(p, mu, g, lam, lam_lower, lam_upper):
    lo, hi, c = p.bounds.lower, p.bounds.upper, p.cbf_row
    stat = g - lam * c - lam_lower + lam_upper
    s_c = float(c @ mu) - p.cbf_rhs
    # an infinite bound has no slack; its dual must simply be zero there
    s_lo = np.where(lo == -np.inf, 1.0, mu - lo)
    s_hi = np.where(hi == np.inf, 1.0, hi - mu)
    parts = (
        np.abs(stat).max(),
        -s_c,
        -s_lo.min(),
        -s_hi.min(),
        -lam,
        -lam_lower.min(),
        -lam_upper.min(),
        abs(lam * s_c),
        np.abs(lam_lower * s_lo).max(),
        np.abs(lam_upper * s_hi).max(),
    )
    return float(max(0.0, *parts))


def kkt_residual(p, sol):
    """Largest violation among stationarity, primal and dual feasibility and
    complementary slackness."""
    g = p.H @ sol.mu + p.f
    return _residual(p, sol.mu, g, sol.lam, sol.lam_lower, sol.lam_upper)


def _num(x):
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def dump_record(p, sol, **extra):
    """One JSON line describing a solve: problem data, solution and duals.

    Infinite bounds are written as the strings "inf" / "-inf".
    """
    rec = {
        "n": p.n,
        "H": [[float(v) for v in row] for row in p.H],
        "f": [float(v) for v in p.f],
        "cbf_row": [float(v) for v in p.cbf_row],
        "cbf_rhs": float(p.cbf_rhs),
        "lower": [_num(v) for v in p.bounds.lower],
        "upper": [_num(v) for v in p.bounds.upper],
        "status": sol.status,
        "margin": _num(sol.margin),
    }
    if sol.feasible:
        rec.update(
            mu=[float(v) for v in sol.mu],
            lam=sol.lam,
            lam_lower=[float(v) for v in sol.lam_lower],
            lam_upper=[float(v) for v in sol.lam_upper],
            kkt_residual=sol.kkt_residual,
            active_set=[list(a) if isinstance(a, tuple) else a for a in sol.active_set],
            objective=sol.objective,
        )
    rec.update(extra)
    return json.dumps(rec, sort_keys=True)
