"""Independent reference computations used by the tests.

Nothing here calls into the package's kinematics or solver code paths; each
oracle recomputes its quantity from first principles.
"""

import itertools

import numpy as np
from scipy.spatial.transform import Rotation


def _T(R=None, p=None):
    T = np.eye(4)
    if R is not None:
        T[:3, :3] = R
    if p is not None:
        T[:3, 3] = p
    return T


def fk_matrix_product(q, model):
    """Tool pose in the plane frame by multiplying 4x4 homogeneous matrices."""
    x, y, z, psi = q[:4]
    att = (Rotation.from_matrix(model.plane_R) * Rotation.from_euler("z", psi)
           * Rotation.from_euler("y", model.pitch) * Rotation.from_euler("x", model.roll)).as_matrix()
    T = _T(att, [x, y, z]) @ model.mount
    for joint, qj in zip(model.joints, q[4:]):
        if joint.kind == "revolute":
            T = T @ _T(Rotation.from_rotvec(joint.axis * qj).as_matrix())
        else:
            T = T @ _T(p=joint.axis * qj)
        T = T @ joint.link
    return T @ model.tool


def central_difference(fn, q, h=1e-6):
    q = np.asarray(q, dtype=float)
    g = np.zeros_like(q)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        g[i] = (fn(q + e) - fn(q - e)) / (2 * h)
    return g


def box_lp_by_vertices(c, lower, upper):
    """max c.mu over a finite box by enumerating all 2^n vertices."""
    best = -np.inf
    for choice in itertools.product((0, 1), repeat=len(c)):
        v = np.where(np.array(choice) == 1, upper, lower)
        best = max(best, float(c @ v))
    return best


def project_halfspace_box(v, c, d, lo, hi):
    """Euclidean projection onto {mu : c.mu >= d, lo <= mu <= hi}.

    The projection is clip(v + tau c) for the smallest tau >= 0 meeting the
    half-space; c.clip(v + tau c) is piecewise linear and non-decreasing in
    tau, so tau is found exactly between sorted breakpoints.
    """
    def phi(t):
        return np.clip(v[None, :] + t[:, None] * c[None, :], lo, hi) @ c

    if phi(np.zeros(1))[0] >= d:
        return np.clip(v, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.concatenate([(lo - v) / c, (hi - v) / c])
    bp = np.unique(bp[np.isfinite(bp) & (bp > 0)])
    ts = np.concatenate([[0.0], bp])
    vals = phi(ts)
    k = int(np.searchsorted(vals, d))  # first breakpoint reaching d
    if k < ts.size:
        t0, t1, f0, f1 = ts[k - 1], ts[k], vals[k - 1], vals[k]
        t = t0 + (d - f0) * (t1 - t0) / (f1 - f0) if f1 > f0 else t1
    else:
        # past the last breakpoint only unbounded coordinates still move
        free = np.isinf(lo) & np.isinf(hi) | (np.isinf(hi) & (c > 0)) | (np.isinf(lo) & (c < 0))
        slope = float(np.sum(c[free] ** 2))
        t = ts[-1] + (d - vals[-1]) / slope
    return np.clip(v + t * c, lo, hi)


def projected_gradient_qp(H, f, c, d, lo, hi, tol=1e-10, max_iter=200000, polish=True):
    """Accelerated projected gradient for min 1/2 mu'H mu + f'mu on the
    feasible set, with momentum tuned to the strong convexity of H and reset
    whenever the objective goes up.

    Stops when the plain projected-gradient step from the current iterate is
    below ``tol``, which is a fixed-point certificate.  With ``polish`` the
    constraints found active are then held as equalities and the reduced KKT
    system is solved directly; the polished point is kept only if it is
    feasible with correctly signed multipliers.
    """
    ev = np.linalg.eigvalsh(H)
    L, m = ev[-1], ev[0]
    beta = (np.sqrt(L) - np.sqrt(m)) / (np.sqrt(L) + np.sqrt(m))

    def obj(v):
        return 0.5 * v @ H @ v + f @ v

    x = project_halfspace_box(np.zeros_like(f), c, d, lo, hi)
    y = x.copy()
    for _ in range(max_iter):
        x_new = project_halfspace_box(y - (H @ y + f) / L, c, d, lo, hi)
        restart = obj(x_new) > obj(x)
        if restart:
            x_new = project_halfspace_box(x - (H @ x + f) / L, c, d, lo, hi)
        plain = project_halfspace_box(x_new - (H @ x_new + f) / L, c, d, lo, hi)
        if np.max(np.abs(plain - x_new)) < tol:
            return polish_active_set(H, f, c, d, lo, hi, x_new) if polish else x_new
        y = x_new if restart else x_new + beta * (x_new - x)
        x = x_new
    return polish_active_set(H, f, c, d, lo, hi, x) if polish else x


def polish_active_set(H, f, c, d, lo, hi, x, act_tol=1e-7, ok_tol=1e-10):
    at_lo = np.isfinite(lo) & (x - lo < act_tol)
    at_hi = np.isfinite(hi) & (hi - x < act_tol) & ~at_lo
    cbf = abs(c @ x - d) < act_tol
    mu = np.where(at_lo, lo, np.where(at_hi, hi, 0.0))
    F = np.flatnonzero(~(at_lo | at_hi))
    k = F.size
    if k:
        if cbf:
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = H[np.ix_(F, F)]
            K[:k, k] = -c[F]
            K[k, :k] = c[F]
            rhs = np.concatenate([-(f[F] + H[F] @ mu), [d - c @ mu]])
        else:
            K = H[np.ix_(F, F)]
            rhs = -(f[F] + H[F] @ mu)
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return x
        mu[F] = sol[:k]
        lam = sol[k] if cbf else 0.0
    elif cbf:
        return x
    else:
        lam = 0.0
    r = H @ mu + f - lam * c
    lam_lo = np.where(at_lo, r, 0.0)
    lam_hi = np.where(at_hi, -r, 0.0)
    feasible = (c @ mu >= d - ok_tol and np.all(mu >= lo - ok_tol) and np.all(mu <= hi + ok_tol)
                and lam >= -ok_tol and lam_lo.min() >= -ok_tol and lam_hi.min() >= -ok_tol)
    return mu if feasible else x

def kkt_violation(H, f, c, d, lo, hi, mu, lam, lam_lo, lam_hi):
    """Largest violation of the optimality conditions of
    min 1/2 mu'H mu + f'mu  s.t.  c'mu >= d, lo <= mu <= hi."""
    stat = H @ mu + f - lam * c - lam_lo + lam_hi
    s_c = c @ mu - d
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    viol = [np.max(np.abs(stat)), -s_c, -lam, abs(lam * s_c), -np.min(lam_lo), -np.min(lam_hi)]
    if fin_lo.any():
        s = mu[fin_lo] - lo[fin_lo]
        viol += [-s.min(), np.max(np.abs(lam_lo[fin_lo] * s))]
    if fin_hi.any():
        s = hi[fin_hi] - mu[fin_hi]
        viol += [-s.min(), np.max(np.abs(lam_hi[fin_hi] * s))]
    # duals of infinite bounds must vanish
    viol += [np.max(np.abs(lam_lo[~fin_lo]), initial=0.0), np.max(np.abs(lam_hi[~fin_hi]), initial=0.0)]
    return float(max(0.0, *viol))


def random_controller_qp(rng, n=None):
    """Random instance with the controller's structure: H = 2(gg' + E) with a
    zero weight on the normal coordinate, f = 2 v g, one CBF row and a box that
    may be unbounded in the normal coordinate.  Always feasible."""
    n = int(rng.integers(3, 9)) if n is None else n
    g = rng.normal(size=n)
    g[2] = np.sign(g[2] or 1.0) * max(abs(g[2]), 0.2)
    e = rng.uniform(0.01, 1.0, n)
    e[2] = 0.0
    v = rng.uniform(-1.0, 1.0)
    lo = -rng.uniform(0.05, 1.0, n)
    hi = rng.uniform(0.05, 1.0, n)
    if rng.random() < 0.5:
        lo[2], hi[2] = -np.inf, np.inf
    c = rng.normal(size=n)
    H = 2.0 * (np.outer(g, g) + np.diag(e))
    f = 2.0 * v * g
    free = np.clip(np.linalg.solve(H, -f), lo, hi)
    # put the CBF row near the unconstrained minimiser so it is often active
    d = float(c @ free + rng.uniform(-0.3, 0.6) * np.abs(c).sum() * 0.3)
    cap = box_lp_by_vertices(c, lo, hi)
    if np.isfinite(cap):
        d = min(d, cap - 1e-3)
    return dict(g=g, e=e, v=v, H=H, f=f, c=c, d=d, lo=lo, hi=hi)
