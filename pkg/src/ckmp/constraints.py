"""Per-time inequality constraints on trajectory states and their linearization.

A constraint attaches to one support-grid time index and is a differentiable
function g of the state (position, velocity) at that time; feasible means
g(state) >= 0.  Builders cover the common cases:

* desired_point: pass through a state up to a slack, written as paired +/-
  component inequalities (an equality relaxed by eps),
* ball_constraint: keep selected components inside a ball,
* box_constraint: bound a single component from below and/or above,
* task_position_constraint: pin the end effector to a Cartesian target up to
  a slack, one +/- pair per axis, with gradients through the Jacobian,
* task_halfspace_constraint: keep one axis of the end effector on one side
  of a plane with a safety margin.

linearize evaluates values and gradients of every constraint at the current
states and packs them in block-diagonal form (one block per time index), the
shape the dual subproblem consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointConstraint",
    "LinearStateConstraint",
    "BallStateConstraint",
    "TaskPositionConstraint",
    "TaskHalfspaceConstraint",
    "CustomConstraint",
    "desired_point",
    "ball_constraint",
    "box_constraint",
    "task_position_constraint",
    "task_halfspace_constraint",
    "ConstraintSet",
    "LinearizedConstraints",
    "linearize",
]


class PointConstraint:
    """Base: a scalar inequality g(state) >= 0 at one support time index."""

    kind = "abstract"

    def __init__(self, time_index):
        self.time_index = int(time_index)
        if self.time_index < 0:
            raise ValueError(f"time index must be non-negative, got {time_index}")

    def value(self, state):
        raise NotImplementedError

    def gradient(self, state):
        raise NotImplementedError


class LinearStateConstraint(PointConstraint):
    """g(state) = coeff . state + offset."""

    def __init__(self, time_index, coeff, offset, kind="linear"):
        super().__init__(time_index)
        self.coeff = np.asarray(coeff, dtype=float)
        self.offset = float(offset)
        self.kind = kind

    def value(self, state):
        return float(self.coeff @ state + self.offset)

    def gradient(self, state):
        return self.coeff.copy()


class BallStateConstraint(PointConstraint):
    """g(state) = radius_sq - |state[components] - center|^2."""

    kind = "ball"

    def __init__(self, time_index, center, radius_sq, components):
        super().__init__(time_index)
        self.center = np.asarray(center, dtype=float)
        self.radius_sq = float(radius_sq)
        self.components = tuple(int(c) for c in components)
        if self.radius_sq <= 0:
            raise ValueError(f"radius_sq must be positive, got {radius_sq}")
        if len(self.components) != self.center.size:
            raise ValueError("ball centre and component selection disagree in length")

    def value(self, state):
        diff = np.asarray(state, dtype=float)[list(self.components)] - self.center
        return float(self.radius_sq - diff @ diff)

    def gradient(self, state):
        state = np.asarray(state, dtype=float)
        grad = np.zeros(state.size)
        diff = state[list(self.components)] - self.center
        grad[list(self.components)] = -2.0 * diff
        return grad


class TaskPositionConstraint(PointConstraint):
    """One signed axis of |f(q) - target| <= slack, via the forward kinematics."""

    kind = "task_position"

    def __init__(self, time_index, model, axis, target, sign, slack):
        super().__init__(time_index)
        self.model = model
        self.axis = int(axis)
        self.target = float(target)
        self.sign = float(sign)
        self.slack = float(slack)
        if self.axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        if self.sign not in (-1.0, 1.0):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        if self.slack <= 0:
            raise ValueError(f"slack must be positive, got {slack}")

    def value(self, state):
        q = np.asarray(state, dtype=float)[: self.model.dof]
        f = self.model.end_effector_position(q)
        return self.sign * (f[self.axis] - self.target) + self.slack

    def gradient(self, state):
        state = np.asarray(state, dtype=float)
        q = state[: self.model.dof]
        J = self.model.end_effector_jacobian(q)
        grad = np.zeros(state.size)
        grad[: self.model.dof] = self.sign * J[self.axis]
        return grad


class TaskHalfspaceConstraint(PointConstraint):
    """Keep an end-effector axis on one side of a plane with a margin."""

    kind = "task_halfspace"

    def __init__(self, time_index, model, axis, bound, direction=1.0, margin=0.0):
        super().__init__(time_index)
        self.model = model
        self.axis = int(axis)
        self.bound = float(bound)
        self.direction = float(direction)
        self.margin = float(margin)
        if self.axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        if self.direction not in (-1.0, 1.0):
            raise ValueError(f"direction must be +1 (above) or -1 (below), got {direction}")
        if self.margin < 0:
            raise ValueError(f"margin must be non-negative, got {margin}")

    def value(self, state):
        q = np.asarray(state, dtype=float)[: self.model.dof]
        f = self.model.end_effector_position(q)
        return self.direction * (f[self.axis] - self.bound) - self.margin

    def gradient(self, state):
        state = np.asarray(state, dtype=float)
        q = state[: self.model.dof]
        J = self.model.end_effector_jacobian(q)
        grad = np.zeros(state.size)
        grad[: self.model.dof] = self.direction * J[self.axis]
        return grad


class CustomConstraint(PointConstraint):
    """Wrap arbitrary value/gradient callables of the state."""

    kind = "custom"

    def __init__(self, time_index, value_fn, gradient_fn):
        super().__init__(time_index)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn

    def value(self, state):
        return float(self._value_fn(state))

    def gradient(self, state):
        return np.asarray(self._gradient_fn(state), dtype=float)


def desired_point(time_index, target_state, slack=1e-3):
    """Paired +/- constraints holding the full state near target_state.

    Returns 2 * len(target_state) linear constraints: for every component f,
    (state_f - target_f) + slack >= 0 and -(state_f - target_f) + slack >= 0.
    """
    target = np.asarray(target_state, dtype=float)
    if slack <= 0:
        raise ValueError(f"desired point slack must be positive, got {slack}")
    out = []
    for f in range(target.size):
        for sign in (1.0, -1.0):
            coeff = np.zeros(target.size)
            coeff[f] = sign
            out.append(
                LinearStateConstraint(
                    time_index, coeff, -sign * target[f] + slack, kind="desired_point"
                )
            )
    return out


def ball_constraint(time_index, center, radius_sq, components):
    """Keep state[components] within sqrt(radius_sq) of center."""
    return BallStateConstraint(time_index, center, radius_sq, components)


def box_constraint(time_index, component, lower=None, upper=None, state_dim=None):
    """Bound one state component; returns one constraint per given bound."""
    if lower is None and upper is None:
        raise ValueError("box constraint needs at least one of lower, upper")
    if lower is not None and upper is not None and lower >= upper:
        raise ValueError(f"box constraint bounds are inverted: [{lower}, {upper}]")
    if state_dim is None:
        raise ValueError("box constraint needs the state dimension")
    out = []
    if lower is not None:
        coeff = np.zeros(state_dim)
        coeff[component] = 1.0
        out.append(LinearStateConstraint(time_index, coeff, -float(lower), kind="box"))
    if upper is not None:
        coeff = np.zeros(state_dim)
        coeff[component] = -1.0
        out.append(LinearStateConstraint(time_index, coeff, float(upper), kind="box"))
    return out


def task_position_constraint(time_index, model, target, slack=1e-3):
    """Pin the end effector to a Cartesian target up to slack (6 constraints)."""
    target = np.asarray(target, dtype=float)
    if target.shape != (3,):
        raise ValueError(f"task target must be a 3-vector, got shape {target.shape}")
    out = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            out.append(
                TaskPositionConstraint(time_index, model, axis, target[axis], sign, slack)
            )
    return out


def task_halfspace_constraint(time_index, model, axis, bound, direction=">=", margin=0.0):
    """Keep an end-effector axis above (or below) a plane by at least margin."""
    dir_map = {">=": 1.0, "<=": -1.0}
    if direction not in dir_map:
        raise ValueError(f"direction must be '>=' or '<=', got {direction!r}")
    return TaskHalfspaceConstraint(time_index, model, axis, bound, dir_map[direction], margin)


class ConstraintSet:
    """All point constraints of a problem, grouped by support time index."""

    def __init__(self, constraints=()):
        self._by_time = {}
        self._order = []
        for c in constraints:
            self.add(c)

    def add(self, constraint):
        """Add one constraint or an iterable of constraints."""
        if isinstance(constraint, PointConstraint):
            self._by_time.setdefault(constraint.time_index, []).append(constraint)
            self._order.append(constraint)
        else:
            for c in constraint:
                self.add(c)
        return self

    def __len__(self):
        return len(self._order)

    def __iter__(self):
        return iter(self._order)

    @property
    def time_indices(self):
        return sorted(self._by_time)

    def at_time(self, n):
        return list(self._by_time.get(n, []))

    def max_time_index(self):
        return max(self._by_time) if self._by_time else -1


@dataclass
class LinearizedConstraints:
    """Values and gradients of a constraint set at the current states.

    Rows of the implied block-diagonal gradient matrix live in state space
    (dimension state_dim per time); columns are the flattened constraints in
    ascending time order.  blocks maps time index -> (state_dim, F_n) array,
    col_slices maps time index -> the matching column range, values is the
    stacked g vector, and ordered lists the constraints column by column.
    """

    n_times: int
    state_dim: int
    blocks: dict
    col_slices: dict
    values: np.ndarray
    ordered: list = field(default_factory=list)

    @property
    def n_constraints(self):
        return self.values.size

    def matvec(self, alpha):
        """Multiply the block-diagonal gradient matrix by a dual vector."""
        out = np.zeros(self.n_times * self.state_dim)
        for n, block in self.blocks.items():
            sl = self.col_slices[n]
            out[n * self.state_dim : (n + 1) * self.state_dim] = block @ alpha[sl]
        return out

    def rmatvec(self, x):
        """Multiply the transposed gradient matrix by a stacked state vector."""
        out = np.empty(self.n_constraints)
        for n, block in self.blocks.items():
            sl = self.col_slices[n]
            out[sl] = block.T @ x[n * self.state_dim : (n + 1) * self.state_dim]
        return out

    def dense(self):
        """Materialize the full (n_times*state_dim, A) matrix (small cases)."""
        G = np.zeros((self.n_times * self.state_dim, self.n_constraints))
        for n, block in self.blocks.items():
            sl = self.col_slices[n]
            G[n * self.state_dim : (n + 1) * self.state_dim, sl] = block
        return G


def linearize(constraint_set, states):
    """Evaluate every constraint at the given states and pack the results.

    states has shape (N, state_dim), row n being the state at support time
    index n.  Raises ValueError when a constraint is attached beyond the grid
    or produces non-finite values.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ValueError(f"states must be 2-D, got shape {states.shape}")
    n_times, state_dim = states.shape
    if constraint_set.max_time_index() >= n_times:
        raise ValueError(
            f"constraint attached at time index {constraint_set.max_time_index()} "
            f"but only {n_times} support times exist"
        )
    blocks, col_slices, ordered, values = {}, {}, [], []
    col = 0
    for n in constraint_set.time_indices:
        group = constraint_set.at_time(n)
        block = np.empty((state_dim, len(group)))
        for j, c in enumerate(group):
            g = c.value(states[n])
            grad = np.asarray(c.gradient(states[n]), dtype=float)
            if not np.isfinite(g) or not np.all(np.isfinite(grad)):
                raise ValueError(
                    f"constraint '{c.kind}' at time index {n} produced non-finite output"
                )
            if grad.shape != (state_dim,):
                raise ValueError(
                    f"constraint '{c.kind}' gradient has shape {grad.shape}, "
                    f"expected ({state_dim},)"
                )
            block[:, j] = grad
            values.append(g)
            ordered.append(c)
        blocks[n] = block
        col_slices[n] = slice(col, col + len(group))
        col += len(group)
    return LinearizedConstraints(
        n_times=n_times,
        state_dim=state_dim,
        blocks=blocks,
        col_slices=col_slices,
        values=np.array(values) if values else np.zeros(0),
        ordered=ordered,
    )
