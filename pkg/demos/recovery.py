"""Start below the barrier curve and watch the controller back away first.

Prints B and the normal coordinate once per second and writes the barrier
diagram to recovery.svg in the current directory.
"""

import numpy as np

from safeforce.scenarios import preset_scenario
from safeforce.simulator import run_scenario
from safeforce.svg import barrier_svg


def main():
    cfg = preset_scenario("exp2")
    traj = run_scenario(cfg)
    every = int(round(1.0 / cfg.dt))
    print("   t      Z        A        B        F")
    for k in range(0, len(traj), every):
        print(f"{traj.t[k]:5.1f}  {traj.Z[k]:7.4f}  {traj.A[k]:7.4f}  {traj.B[k]:+8.4f}  {traj.F[k]:6.3f}")
    k = int(np.argmax(traj.B >= 0))
    print(f"B first non-negative at t = {traj.t[k]:.3f} s; min B afterwards {traj.B[k:].min():.2e}")
    with open("recovery.svg", "w", encoding="utf-8") as fh:
        fh.write(barrier_svg(traj, cfg.shaping, title="recovery from an unsafe start"))
    print("wrote recovery.svg")


if __name__ == "__main__":
    main()
