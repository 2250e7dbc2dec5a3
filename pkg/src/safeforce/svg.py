"""Self-contained SVG of the alignment/distance diagram: the boundary curve
Z = Z_d* + kappa_A(A) with the logged (A, Z) points on top.

A runs along the horizontal axis and Z along the vertical one.  Output is
deterministic: fixed formatting, no timestamps, no random ids.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 60
CURVE_SAMPLES = 200
MAX_POINTS = 600


def _fmt(v):
    return f"{v:.2f}"


def barrier_svg(traj, shaping, title=None, tol=1e-9):
    """SVG text for the diagram of ``traj`` under ``shaping``."""
    A = np.asarray(traj.A, dtype=float)
    Z = np.asarray(traj.Z, dtype=float)
    Zs = float(traj.meta["Z_d_star"])
    Z_d = float(traj.meta["Z_d"])
    a_hi = max(float(A.max()), 1e-6) * 1.05
    grid = np.linspace(0.0, a_hi, CURVE_SAMPLES)
    curve = Zs + np.array([shaping.kappa_A(a) for a in grid])
    z_lo = min(float(Z.min()), Zs, Z_d)
    z_hi = max(float(Z.max()), float(curve.max()))
    pad = 0.05 * (z_hi - z_lo or 1.0)
    z_lo, z_hi = z_lo - pad, z_hi + pad

    def sx(a):
        return MARGIN + (a / a_hi) * (WIDTH - 2 * MARGIN)

    def sy(z):
        return HEIGHT - MARGIN - (z - z_lo) / (z_hi - z_lo) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # safe region: everything above the curve
    safe = [f"{_fmt(sx(a))},{_fmt(sy(z))}" for a, z in zip(grid, curve)]
    safe += [f"{_fmt(sx(a_hi))},{_fmt(sy(z_hi))}", f"{_fmt(sx(0.0))},{_fmt(sy(z_hi))}"]
    out.append(f'<polygon id="safe-region" points="{" ".join(safe)}" fill="#e3f4e3" stroke="none"/>')
    # axes
    x0, y0 = sx(0.0), sy(z_lo)
    out.append(f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(sx(a_hi))}" y2="{_fmt(y0)}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(sy(z_hi))}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        a = frac * a_hi
        z = z_lo + frac * (z_hi - z_lo)
        out.append(f'<text x="{_fmt(sx(a))}" y="{_fmt(y0 + 18)}" font-size="11" text-anchor="middle">{a:.3g}</text>')
        out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(sy(z) + 4)}" font-size="11" text-anchor="end">{z:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2:.2f}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">alignment error A</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {HEIGHT / 2:.2f})">normal distance Z (m)</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="25" font-size="14" text-anchor="middle">{title}</text>')
    # reference lines at the true and estimated insertion
    for name, z in (("target-insertion", Z_d), ("estimated-insertion", Zs)):
        out.append(f'<line id="{name}" x1="{_fmt(x0)}" y1="{_fmt(sy(z))}" x2="{_fmt(sx(a_hi))}" y2="{_fmt(sy(z))}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(z))}" for a, z in zip(grid, curve))
    out.append(f'<polyline id="kappa-curve" points="{pts}" fill="none" stroke="#1a7f1a" stroke-width="2"/>')
    # trajectory, thinned to a bounded number of markers (always keeps the ends)
    idx = np.unique(np.linspace(0, len(A) - 1, min(len(A), MAX_POINTS)).astype(int))
    path = " ".join(f"{_fmt(sx(A[k]))},{_fmt(sy(Z[k]))}" for k in idx)
    out.append(f'<polyline id="trajectory" points="{path}" fill="none" stroke="#3060c0" stroke-width="1"/>')
    out.append('<g id="trajectory-points">')
    B = np.asarray(traj.B, dtype=float)
    for k in idx:
        cls = "safe" if B[k] >= -tol else "unsafe"
        color = "#3060c0" if cls == "safe" else "#d02020"
        out.append(f'<circle class="pt {cls}" data-step="{k}" data-A="{A[k]:.9f}" data-Z="{Z[k]:.9f}" '
                   f'cx="{_fmt(sx(A[k]))}" cy="{_fmt(sy(Z[k]))}" r="2" fill="{color}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
