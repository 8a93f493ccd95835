"""Gaussian kernel with finite-difference velocity blocks.

The trajectory model treats the state at time t as the stacked vector
(position, velocity) of dimension 2*dof.  Correlations between states at two
times are expressed with a block kernel built from the scalar Gaussian kernel

    k(ti, tj) = exp(-k_h * (ti - tj)**2)

where the velocity rows/columns are finite differences of k with step delta.
Because the differences are taken consistently in each argument, the block
kernel is an exact Gram matrix of an underlying feature map, so assembled
matrices on a single time grid are symmetric positive semi-definite by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelConfig", "scalar_kernel", "block_kernel", "assemble_gram", "BlockKernelMatrix"]


@dataclass(frozen=True)
class KernelConfig:
    """Width k_h, finite-difference step delta and degrees of freedom.

    k_h and delta must be positive, dof at least 1.  delta trades truncation
    error in the velocity blocks (O(delta)) against round-off in the
    second-difference block (O(eps / delta**2)); values around 1e-3 .. 1e-4
    seconds work well for trajectories lasting a few seconds.
    """

    k_h: float
    delta: float = 1e-3
    dof: int = 1

    def __post_init__(self):
        if not self.k_h > 0.0:
            raise ValueError(f"kernel width k_h must be positive, got {self.k_h}")
        if not self.delta > 0.0:
            raise ValueError(f"finite-difference step delta must be positive, got {self.delta}")
        if self.dof < 1:
            raise ValueError(f"dof must be a positive integer, got {self.dof}")


def scalar_kernel(config, ti, tj):
    """Evaluate exp(-k_h (ti - tj)^2); broadcasts over array inputs."""
    diff = np.asarray(ti, dtype=float) - np.asarray(tj, dtype=float)
    return np.exp(-config.k_h * diff * diff)


def _sub_blocks(config, ti, tj):
    """Return the four scalar sub-blocks (k_tt, k_td, k_dt, k_dd).

    ti and tj may be arrays; the results broadcast.  k_td differences the
    second argument, k_dt the first, k_dd both, all with step delta.
    """
    d = config.delta
    k00 = scalar_kernel(config, ti, tj)
    k01 = scalar_kernel(config, ti, tj + d)
    k10 = scalar_kernel(config, ti + d, tj)
    k11 = scalar_kernel(config, ti + d, tj + d)
    k_td = (k01 - k00) / d
    k_dt = (k10 - k00) / d
    k_dd = (k11 - k10 - k01 + k00) / (d * d)
    return k00, k_td, k_dt, k_dd


def block_kernel(config, ti, tj):
    """Return the (2*dof, 2*dof) block kernel matrix for a pair of times.

    Layout is [[k_tt*I, k_td*I], [k_dt*I, k_dd*I]] with I the dof-sized
    identity, matching the (position, velocity) state layout.
    """
    k_tt, k_td, k_dt, k_dd = _sub_blocks(config, float(ti), float(tj))
    eye = np.eye(config.dof)
    return np.block([[k_tt * eye, k_td * eye], [k_dt * eye, k_dd * eye]])


@dataclass
class BlockKernelMatrix:
    """Dense assembly of block kernels for a grid of row and column times.

    block has shape (2*dof*len(row_times), 2*dof*len(col_times)); entry
    (i, j) of the block grid is block_kernel(config, row_times[i],
    col_times[j]).  On a single grid the matrix is symmetric.
    """

    block: np.ndarray
    row_times: np.ndarray
    col_times: np.ndarray
    dof: int

    @property
    def shape(self):
        return self.block.shape


def assemble_gram(config, row_times, col_times):
    """Assemble the dense block-kernel matrix for two time grids.

    Vectorized over all (row, column) pairs; returns a BlockKernelMatrix.
    """
    rows = np.atleast_1d(np.asarray(row_times, dtype=float))
    cols = np.atleast_1d(np.asarray(col_times, dtype=float))
    if rows.ndim != 1 or cols.ndim != 1:
        raise ValueError("time grids must be one-dimensional")
    k_tt, k_td, k_dt, k_dd = _sub_blocks(config, rows[:, None], cols[None, :])
    # Pack the 2x2 scalar pattern per pair, then expand with the identity.
    pattern = np.empty((rows.size, 2, cols.size, 2))
    pattern[:, 0, :, 0] = k_tt
    pattern[:, 0, :, 1] = k_td
    pattern[:, 1, :, 0] = k_dt
    pattern[:, 1, :, 1] = k_dd
    dense = np.einsum("ipjq,ab->ipajqb", pattern, np.eye(config.dof))
    dense = dense.reshape(2 * config.dof * rows.size, 2 * config.dof * cols.size)
    return BlockKernelMatrix(block=dense, row_times=rows, col_times=cols, dof=config.dof)
