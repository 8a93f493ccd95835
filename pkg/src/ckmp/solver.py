"""Constrained trajectory optimizer over a kernelized trajectory family.

The trajectory is a function of time represented with two coefficient
vectors: gamma against the support-grid kernel sections and rho against the
obstacle-grid sections,

    xi(t) = k(t) gamma - k~(t) rho,

where k(t) stacks block kernels against the support times and k~(t) against
the obstacle check times.  The initial gamma solves the regularized tracking
problem (K + lam * Sigma)^-1 mu against the reference distribution, the
classic closed-form imitation solution; rho starts at zero.

Each iteration evaluates the current trajectory, linearizes the constraints,
solves the dual subproblem for multipliers alpha, and applies the affine
coefficient update

    gamma <- (1 - lam/beta) gamma - (1/beta) (Sigma^-1 (xi - mu) - G alpha)
    rho   <- (1 - lam/beta) rho   + (lam_obs/beta) h,

with h the stacked obstacle gradients.  The update is exactly the penalized
Lagrangian step of the constrained imitation problem expressed in coefficient
space, so the represented function equals the functional update applied to
the previous trajectory.  Convergence is declared when both coefficient
updates fall below the configured tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.linalg import cho_factor, cho_solve

from .constraints import ConstraintSet, linearize
from .kernel import KernelConfig, assemble_gram
from .obstacle import assemble_gradient_stack
from .qp import build_dual, solve_nonneg_qp

__all__ = [
    "SolverConfig",
    "TrajectoryFunction",
    "IterationRecord",
    "IterationTerms",
    "kmp_init",
    "iteration_terms",
    "apply_update",
    "iterate_once",
    "solve",
    "save_trajectory",
    "load_trajectory",
]


def _check_grid(times, name):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return t


@dataclass(frozen=True)
class SolverConfig:
    """Weights, kernel and grids of one optimization problem.

    beta > lam > 0 keeps the update a contraction of the unconstrained
    problem; lam_obs >= 0 scales the obstacle push.  obstacle_times defaults
    to the support grid.
    """

    lam: float
    beta: float
    lam_obs: float
    kernel: KernelConfig
    support_times: np.ndarray
    obstacle_times: np.ndarray = None
    max_iterations: int = 10
    tolerance: float = 1e-6

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.beta > self.lam:
            raise ValueError(f"beta must exceed lam, got beta={self.beta}, lam={self.lam}")
        if self.lam_obs < 0:
            raise ValueError(f"lam_obs must be non-negative, got {self.lam_obs}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be non-negative, got {self.max_iterations}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        support = _check_grid(self.support_times, "support_times")
        object.__setattr__(self, "support_times", support)
        obstacle = self.obstacle_times if self.obstacle_times is not None else support
        object.__setattr__(self, "obstacle_times", _check_grid(obstacle, "obstacle_times"))

    @property
    def state_dim(self):
        return 2 * self.kernel.dof


class TrajectoryFunction:
    """A kernel-expansion trajectory: coefficients plus their time grids."""

    def __init__(self, kernel, support_times, obstacle_times, gamma, rho):
        self.kernel = kernel
        self.support_times = _check_grid(support_times, "support_times")
        self.obstacle_times = _check_grid(obstacle_times, "obstacle_times")
        state_dim = 2 * kernel.dof
        self.gamma = np.asarray(gamma, dtype=float)
        self.rho = np.asarray(rho, dtype=float)
        if self.gamma.shape != (state_dim * self.support_times.size,):
            raise ValueError(
                f"gamma has shape {self.gamma.shape}, expected "
                f"({state_dim * self.support_times.size},)"
            )
        if self.rho.shape != (state_dim * self.obstacle_times.size,):
            raise ValueError(
                f"rho has shape {self.rho.shape}, expected "
                f"({state_dim * self.obstacle_times.size},)"
            )

    @property
    def state_dim(self):
        return 2 * self.kernel.dof

    def predict_batch(self, times):
        """Evaluate the trajectory at many times; returns (len(times), 2*dof)."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        k_rows = assemble_gram(self.kernel, t, self.support_times).block
        out = k_rows @ self.gamma
        if np.any(self.rho):
            kt_rows = assemble_gram(self.kernel, t, self.obstacle_times).block
            out = out - kt_rows @ self.rho
        return out.reshape(t.size, self.state_dim)

    def predict(self, t):
        """Evaluate the state (position, velocity) at one time."""
        return self.predict_batch([float(t)])[0]

    def with_coefficients(self, gamma, rho):
        return TrajectoryFunction(
            self.kernel, self.support_times, self.obstacle_times, gamma, rho
        )


@dataclass
class IterationRecord:
    """Diagnostics of one iteration, evaluated at its starting trajectory."""

    iteration: int
    obstacle_cost: float
    max_violation: float
    delta_gamma: float
    delta_rho: float
    qp_residual: float
    qp_converged: bool
    wall_time: float


@dataclass
class IterationTerms:
    """Everything the coefficient update consumes, plus diagnostics."""

    error_stack: np.ndarray
    obstacle_stack: np.ndarray
    alpha: np.ndarray
    qp_converged: bool
    qp_residual: float
    states: np.ndarray
    constraint_values: np.ndarray
    obstacle_cost: float
    obstacle_data: object = None

    @property
    def max_violation(self):
        if self.constraint_values.size == 0:
            return 0.0
        return max(0.0, -float(self.constraint_values.min()))


class _Workspace:
    """Cached kernel matrices and reference factorizations for one problem."""

    def __init__(self, reference, config):
        if not np.allclose(reference.times, config.support_times, rtol=0.0, atol=1e-12):
            raise ValueError("reference times must coincide with the solver support grid")
        if reference.state_dim != config.state_dim:
            raise ValueError(
                f"reference state dimension {reference.state_dim} does not match "
                f"kernel dof {config.kernel.dof}"
            )
        self.config = config
        self.reference = reference
        self.gram = assemble_gram(config.kernel, config.support_times, config.support_times).block
        self.cross = assemble_gram(config.kernel, config.support_times, config.obstacle_times).block
        self.obstacle_gram = assemble_gram(
            config.kernel, config.obstacle_times, config.obstacle_times
        ).block
        self.mu = reference.means.reshape(-1)
        self.covs = reference.covariances
        regularized = self.gram.copy()
        d = config.state_dim
        for n in range(config.support_times.size):
            sl = slice(n * d, (n + 1) * d)
            regularized[sl, sl] += config.lam * self.covs[n]
        self._init_factor = cho_factor(regularized)
        self._init_matrix = regularized

    def sigma_inv(self, stacked):
        """Apply the block-diagonal inverse reference covariance."""
        d = self.config.state_dim
        blocks = stacked.reshape(-1, d, 1)
        return np.linalg.solve(self.covs, blocks).reshape(-1)

    def initial_gamma(self):
        gamma = cho_solve(self._init_factor, self.mu)
        residual = np.linalg.norm(self._init_matrix @ gamma - self.mu)
        if residual > 1e-6 * max(1.0, np.linalg.norm(self.mu)):
            raise ValueError(
                f"initialization solve is inaccurate (residual {residual:.3e}); "
                "the kernel matrix is too ill-conditioned for this lam"
            )
        return gamma


def kmp_init(reference, config):
    """Closed-form imitation initialization: gamma = (K + lam Sigma)^-1 mu."""
    ws = _Workspace(reference, config)
    gamma = ws.initial_gamma()
    rho = np.zeros(config.state_dim * config.obstacle_times.size)
    return TrajectoryFunction(config.kernel, config.support_times, config.obstacle_times, gamma, rho)


def _predict_on_grids(tf, ws):
    """States at the support and obstacle grids using cached matrices."""
    xi = ws.gram @ tf.gamma
    xi_obs = ws.cross.T @ tf.gamma
    if np.any(tf.rho):
        xi = xi - ws.cross @ tf.rho
        xi_obs = xi_obs - ws.obstacle_gram @ tf.rho
    d = tf.state_dim
    return xi, xi_obs.reshape(-1, d)


def iteration_terms(tf, reference, config, constraints=None, model=None, obstacle=None, alpha0=None, workspace=None):
    """Evaluate one iteration's update ingredients at the current trajectory.

    Returns an IterationTerms with the covariance-weighted tracking error
    minus the constraint force (error_stack), the stacked obstacle gradients
    (obstacle_stack), the dual multipliers and diagnostics.
    """
    ws = workspace if workspace is not None else _Workspace(reference, config)
    if obstacle is not None and model is None:
        raise ValueError("an obstacle requires a kinematic model")
    if model is not None and model.dof != config.kernel.dof:
        raise ValueError(
            f"kinematic model dof {model.dof} does not match kernel dof {config.kernel.dof}"
        )
    xi, states_obs = _predict_on_grids(tf, ws)
    sigma_inv_residual = ws.sigma_inv(xi - ws.mu)

    dof = config.kernel.dof
    if obstacle is not None:
        stack_data = assemble_gradient_stack(model, obstacle, states_obs[:, :dof])
        h = stack_data.stack
        cost = stack_data.total_cost
    else:
        stack_data = None
        h = np.zeros(config.state_dim * config.obstacle_times.size)
        cost = 0.0

    cset = constraints if constraints is not None else ConstraintSet()
    states = xi.reshape(-1, config.state_dim)
    lin = linearize(cset, states)
    dual = build_dual(
        ws.gram,
        ws.cross,
        sigma_inv_residual,
        xi,
        lin,
        config.lam,
        config.beta,
        config.lam_obs,
        obstacle_stack=h if obstacle is not None else None,
    )
    sol = solve_nonneg_qp(dual, alpha0=alpha0)
    error = sigma_inv_residual - lin.matvec(sol.alpha)
    return IterationTerms(
        error_stack=error,
        obstacle_stack=h,
        alpha=sol.alpha,
        qp_converged=sol.converged,
        qp_residual=sol.kkt_residual,
        states=states,
        constraint_values=lin.values,
        obstacle_cost=cost,
        obstacle_data=stack_data,
    )


def apply_update(tf, error_stack, obstacle_stack, config):
    """Apply the affine coefficient update and return the new trajectory."""
    shrink = 1.0 - config.lam / config.beta
    gamma = shrink * tf.gamma - error_stack / config.beta
    rho = shrink * tf.rho + (config.lam_obs / config.beta) * obstacle_stack
    return tf.with_coefficients(gamma, rho)


def iterate_once(tf, reference, config, constraints=None, model=None, obstacle=None, alpha0=None, workspace=None, iteration=0):
    """One full iteration: evaluate terms, update coefficients, record."""
    start = time.perf_counter()
    terms = iteration_terms(
        tf, reference, config, constraints, model, obstacle, alpha0, workspace
    )
    new_tf = apply_update(tf, terms.error_stack, terms.obstacle_stack, config)
    record = IterationRecord(
        iteration=iteration,
        obstacle_cost=terms.obstacle_cost,
        max_violation=terms.max_violation,
        delta_gamma=float(np.linalg.norm(new_tf.gamma - tf.gamma)),
        delta_rho=float(np.linalg.norm(new_tf.rho - tf.rho)),
        qp_residual=terms.qp_residual,
        qp_converged=terms.qp_converged,
        wall_time=time.perf_counter() - start,
    )
    return new_tf, record, terms


def solve(reference, config, constraints=None, model=None, obstacle=None, on_iteration=None):
    """Initialize and iterate until convergence or the iteration budget.

    Returns (trajectory, records).  on_iteration, when given, is called as
    on_iteration(iteration_index, trajectory) after every applied update.
    Dual warm starts carry across iterations.
    """
    ws = _Workspace(reference, config)
    gamma = ws.initial_gamma()
    rho = np.zeros(config.state_dim * config.obstacle_times.size)
    tf = TrajectoryFunction(config.kernel, config.support_times, config.obstacle_times, gamma, rho)
    records = []
    alpha = None
    for i in range(config.max_iterations):
        tf, record, terms = iterate_once(
            tf, reference, config, constraints, model, obstacle,
            alpha0=alpha, workspace=ws, iteration=i,
        )
        records.append(record)
        alpha = terms.alpha
        if on_iteration is not None:
            on_iteration(i + 1, tf)
        if record.delta_gamma < config.tolerance and record.delta_rho < config.tolerance:
            break
    return tf, records


def save_trajectory(tf, path):
    """Serialize a trajectory function (kernel, grids, coefficients) to YAML."""
    doc = {
        "kernel": {"k_h": tf.kernel.k_h, "delta": tf.kernel.delta, "dof": tf.kernel.dof},
        "support_times": [float(v) for v in tf.support_times],
        "obstacle_times": [float(v) for v in tf.obstacle_times],
        "gamma": [float(v) for v in tf.gamma],
        "rho": [float(v) for v in tf.rho],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_trajectory(path):
    """Inverse of save_trajectory."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    kernel = KernelConfig(**doc["kernel"])
    return TrajectoryFunction(
        kernel,
        np.array(doc["support_times"], dtype=float),
        np.array(doc["obstacle_times"], dtype=float),
        np.array(doc["gamma"], dtype=float),
        np.array(doc["rho"], dtype=float),
    )
