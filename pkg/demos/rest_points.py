"""Build the two kinds of rest points and check them.

One point rests at the target force with the tool aligned; the others sit on
the barrier boundary with the tool pointing away from the surface, where the
controller also commands zero rate.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from restpoints import aligned_at_target, context, pointing_away  # noqa: E402
from safeforce.analysis import classify_equilibrium, verify_skkt  # noqa: E402
from safeforce.scenarios import preset_scenario  # noqa: E402


def show(label, q, ctx, F=None):
    r = classify_equilibrium(q, ctx, F_measured=F)
    k = verify_skkt(q, ctx, F_measured=F)
    worst = max(k.residuals, key=k.residuals.get)
    print(f"{label:28s} {r.kind:15s} |u| = {r.control_norm:.1e}  worst KKT residual {worst!r} = {k.residuals[worst]:.1e}")


def main():
    sc = preset_scenario("exp1")
    ctx = context(sc)
    show("aligned at target force", aligned_at_target(sc), ctx, F=sc.F_d)
    for q1 in (0.0, 30.0, 60.0):
        show(f"pointing away, q1 = {q1:.0f} deg", pointing_away(sc, q1), ctx)
    q = aligned_at_target(sc)
    q[2] += 0.5
    r = classify_equilibrium(q, ctx)
    print(f"{'lifted 0.5 m off the surface':28s} {r.kind:15s} |u| = {r.control_norm:.1e}")
    print("rates there:", np.round(r.evaluation.u, 4))


if __name__ == "__main__":
    main()
