"""Constrained kernelized movement primitives.

Learn a probabilistic reference from demonstrations (Gaussian mixture +
regression over time), then optimize a kernelized trajectory that imitates
the reference while honouring hard per-time constraints and avoiding
spherical obstacles with link-level gradients.
"""

from .demonstrations import (
    Demonstration,
    DemonstrationSet,
    estimate_velocities,
    generate_letter_demos,
    generate_reach_demos,
    load_csv,
    save_csv,
)
from .mixture import GaussianMixture, ReferenceTrajectory, fit_gmm, gmr_condition, load_gmm, save_gmm
from .kernel import BlockKernelMatrix, KernelConfig, assemble_gram, block_kernel, scalar_kernel
from .kinematics import PlanarPointModel, SerialChainModel, bundled_chain, load_chain
from .obstacle import (
    Obstacle,
    assemble_gradient_stack,
    nearest_body_point,
    point_cost,
    point_cost_gradient,
)
from .constraints import (
    ConstraintSet,
    ball_constraint,
    box_constraint,
    desired_point,
    linearize,
    task_halfspace_constraint,
    task_position_constraint,
)
from .qp import DualProblem, DualSolution, UnboundedDualError, build_dual, solve_nonneg_qp
from .solver import (
    IterationRecord,
    SolverConfig,
    TrajectoryFunction,
    apply_update,
    iterate_once,
    iteration_terms,
    kmp_init,
    load_trajectory,
    save_trajectory,
    solve,
)
from .scenario import Scenario, bundled_scenario_path, load_scenario, run_scenario

__version__ = "0.1.0"
