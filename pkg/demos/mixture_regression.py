"""From noisy demonstrations to a time-indexed reference distribution.

A Gaussian mixture is fitted to the stacked (time, position, velocity)
samples of several demonstrations, and conditioning the mixture on time
yields a mean trajectory with a full covariance at every instant.  The
covariance is what the optimizer later uses to decide where it may deviate
cheaply from the mean, so the bands plotted here are the slack the imitation
term grants each coordinate.

Run with

    python3 demos/mixture_regression.py [--out DIR]
"""

import argparse
import os

import numpy as np

from ckmp.demonstrations import generate_letter_demos
from ckmp.mixture import fit_gmm, gmr_condition


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
    samples = demos.stacked_samples()
    print(f"fitting 6 components to {samples.shape[0]} samples of dimension {samples.shape[1]}")
    gmm = fit_gmm(samples, 6, seed=0)

    lo, hi = demos.time_span()
    grid = np.linspace(lo, hi, 200)
    reference = gmr_condition(gmm, grid)
    stds = np.sqrt(np.einsum("nee->ne", reference.covariances))
    print("per-coordinate standard deviation ranges along the trajectory:")
    labels = ["x [cm]", "y [cm]", "vx [cm/s]", "vy [cm/s]"]
    for j, label in enumerate(labels):
        print(f"  {label:10s} {stds[:, j].min():8.3f} .. {stds[:, j].max():8.3f}")

    plt = get_pyplot()
    if plt is None:
        print("matplotlib not installed, skipping the figure")
        return
    os.makedirs(args.out, exist_ok=True)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for j, (ax, label) in enumerate(zip(axes.ravel(), labels)):
        for demo in demos.demos:
            channel = demo.positions[:, j] if j < 2 else demo.velocities[:, j - 2]
            ax.plot(demo.times, channel, color="0.8", lw=0.7)
        mu = reference.means[:, j]
        ax.plot(grid, mu, "C0", lw=1.5)
        ax.fill_between(grid, mu - 2 * stds[:, j], mu + 2 * stds[:, j], color="C0", alpha=0.2)
        ax.set_ylabel(label)
    for ax in axes[1]:
        ax.set_xlabel("t [s]")
    fig.suptitle("demonstrations, conditioned mean and 2-sigma band")
    path = os.path.join(args.out, "mixture_regression.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    print(f"figure written to {path}")


if __name__ == "__main__":
    main()
