"""Why the optimized velocity really is the derivative of the position.

The trajectory family uses a block kernel whose derivative sections are
finite differences of the base Gaussian kernel at a small step delta.  The
velocity channel of any trajectory in the family therefore equals the
forward difference of its own position channel at that step, by
construction and not approximately.  This script solves the writing task,
then differentiates the returned position numerically and overlays it on
the returned velocity.

Run with

    python3 demos/velocity_consistency.py [--out DIR]
"""

import argparse
import os

import numpy as np

from ckmp.demonstrations import generate_letter_demos
from ckmp.kernel import KernelConfig
from ckmp.mixture import fit_gmm, gmr_condition
from ckmp.solver import SolverConfig, solve


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
    gmm = fit_gmm(demos.stacked_samples(), 6, seed=0)
    lo, hi = demos.time_span()
    support = np.linspace(lo, hi, 200)
    reference = gmr_condition(gmm, support)
    delta = 1e-4
    config = SolverConfig(
        lam=0.01, beta=340.0, lam_obs=0.0,
        kernel=KernelConfig(k_h=4.0, delta=delta, dof=2),
        support_times=support, max_iterations=1,
    )
    tf, _ = solve(reference, config)

    probe = np.linspace(lo, hi, 400)
    states = tf.predict_batch(probe)
    velocity = states[:, 2:]
    forward = (tf.predict_batch(probe + delta)[:, :2] - states[:, :2]) / delta
    central = (tf.predict_batch(probe + delta)[:, :2] - tf.predict_batch(probe - delta)[:, :2]) / (2 * delta)
    print(f"kernel finite-difference step delta = {delta:g}")
    print(f"forward difference vs velocity channel:  max deviation {np.max(np.abs(forward - velocity)):.3e}")
    print(f"central difference vs velocity channel:  max deviation {np.max(np.abs(central - velocity)):.3e}")
    print("the forward difference matches to rounding; the central difference")
    print("differs by the usual O(delta) asymmetry of the two stencils")

    plt = get_pyplot()
    if plt is None:
        print("matplotlib not installed, skipping the figure")
        return
    os.makedirs(args.out, exist_ok=True)
    fig, axes = plt.subplots(2, 1, figsize=(7, 5.5), sharex=True)
    axes[0].plot(probe, velocity[:, 0], "C0", lw=2.5, label="velocity channel vx")
    axes[0].plot(probe, central[:, 0], "C3--", lw=1, label="central difference of x")
    axes[0].set_ylabel("vx [cm/s]")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(probe, np.max(np.abs(central - velocity), axis=1), "C2")
    axes[1].set_ylabel("|central diff - velocity|")
    axes[1].set_xlabel("t [s]")
    path = os.path.join(args.out, "velocity_consistency.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    print(f"figure written to {path}")


if __name__ == "__main__":
    main()
