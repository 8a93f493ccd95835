"""Planar letter writing under desired points, a workspace disc and a velocity band.

Five noisy demonstrations of a cursive G are summarized by a Gaussian mixture,
the mixture is conditioned on time to get a reference distribution, and the
solver then reshapes the motion so that it passes through three via states,
stays inside a disc of radius 16 cm, keeps the first velocity component inside
[-53, 42] cm/s and steers the pen around a circular obstacle.

Run with

    python3 demos/writing_task.py [--out DIR]

The script prints the iteration trace and saves writing_task.png showing the
demonstrations, the reference mean, the final trajectory and the obstacle.
"""

import argparse
import os

import numpy as np

from ckmp.constraints import ConstraintSet, ball_constraint, box_constraint, desired_point
from ckmp.demonstrations import generate_letter_demos
from ckmp.kernel import KernelConfig
from ckmp.kinematics import PlanarPointModel
from ckmp.mixture import fit_gmm, gmr_condition
from ckmp.obstacle import Obstacle
from ckmp.solver import SolverConfig, solve

DESIRED = {
    30: [1.344, 14.1949, -34.8053, -19.7671],
    149: [8.7133, -5.7219, 20.9671, 19.4836],
    189: [7.6516, 2.9581, -20.0573, 1.7745],
}


def get_pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    return plt


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_output", help="directory for the figure")
    args = parser.parse_args()

    demos = generate_letter_demos(count=5, noise_scale=2.0, seed=7)
    print(f"demonstrations: {len(demos.demos)} trajectories, dof {demos.dof}")
    gmm = fit_gmm(demos.stacked_samples(), 6, seed=0)
    lo, hi = demos.time_span()
    support = np.linspace(lo, hi, 200)
    reference = gmr_condition(gmm, support)

    config = SolverConfig(
        lam=0.01, beta=340.0, lam_obs=110.0,
        kernel=KernelConfig(k_h=4.0, delta=1e-4, dof=2),
        support_times=support, max_iterations=10, tolerance=1e-6,
    )
    obstacle = Obstacle(center=np.array([-6.0, -4.0, 0.0]), radius=6.0, safety_margin=4.0)
    cset = ConstraintSet()
    for idx, state in DESIRED.items():
        cset.add(desired_point(idx, np.asarray(state), slack=1e-3))
    for n in range(support.size):
        cset.add(ball_constraint(n, np.zeros(2), 256.0, [0, 1]))
        cset.add(box_constraint(n, 2, lower=-53.0, upper=42.0, state_dim=4))

    tf, records = solve(reference, config, constraints=cset,
                        model=PlanarPointModel(), obstacle=obstacle)
    print("iter  obstacle_cost  max_violation  delta_gamma")
    for r in records:
        print(f"{r.iteration:4d}  {r.obstacle_cost:13.4f}  {r.max_violation:13.3e}  {r.delta_gamma:11.3e}")

    states = tf.predict_batch(support)
    print(f"final position radius max: {np.max(np.hypot(states[:, 0], states[:, 1])):.3f} (limit 16)")
    print(f"final x-velocity range: [{states[:, 2].min():.2f}, {states[:, 2].max():.2f}] (band [-53, 42])")
    for idx, state in DESIRED.items():
        err = np.max(np.abs(states[idx] - np.asarray(state)))
        print(f"desired state at t={support[idx]:.3f}: max deviation {err:.2e}")

    plt = get_pyplot()
    if plt is None:
        print("matplotlib not installed, skipping the figure")
        return
    os.makedirs(args.out, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.5, 6.5))
    for demo in demos.demos:
        ax.plot(demo.positions[:, 0], demo.positions[:, 1], color="0.8", lw=0.8)
    ax.plot(reference.means[:, 0], reference.means[:, 1], "C0--", label="reference mean")
    ax.plot(states[:, 0], states[:, 1], "C3", lw=2, label="optimized")
    theta = np.linspace(0, 2 * np.pi, 200)
    ax.plot(16 * np.cos(theta), 16 * np.sin(theta), "k:", label="workspace disc")
    ax.fill(obstacle.center[0] + obstacle.radius * np.cos(theta),
            obstacle.center[1] + obstacle.radius * np.sin(theta), color="C1", alpha=0.7)
    ax.plot(obstacle.center[0] + (obstacle.radius + obstacle.safety_margin) * np.cos(theta),
            obstacle.center[1] + (obstacle.radius + obstacle.safety_margin) * np.sin(theta),
            "C1--", lw=0.8)
    for idx in DESIRED:
        ax.plot(*states[idx, :2], "k*", ms=12)
    ax.set_aspect("equal")
    ax.set_xlabel("x [cm]")
    ax.set_ylabel("y [cm]")
    ax.legend(loc="upper left", fontsize=8)
    path = os.path.join(args.out, "writing_task.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    print(f"figure written to {path}")


if __name__ == "__main__":
    main()
