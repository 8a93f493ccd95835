"""Spherical obstacle cost on robot body points.

The cost on a single world point is the classic smooth hinge on the distance
d to the obstacle centre: linear inside the sphere of radius r, quadratic
inside the safety band of width eps beyond it, zero outside,

    c(d) = r - d + eps/2          for d <= r
           (d - r - eps)^2/(2 eps)  for 0 < d - r <= eps
           0                       otherwise,

which is continuously differentiable in d.  For a trajectory the cost is
summed over a set of check times, evaluating only the body point nearest to
the obstacle centre at each time.  The gradient with respect to the
configuration is lifted into the (position, velocity) state layout with zero
velocity rows, producing the stacked vector consumed by the solver update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Obstacle",
    "point_cost",
    "point_cost_gradient",
    "nearest_body_point",
    "ObstacleGradientStack",
    "assemble_gradient_stack",
]

_DEGENERATE_DISTANCE = 1e-9


@dataclass(frozen=True)
class Obstacle:
    """Sphere at centre with hard radius and a smooth safety band beyond it."""

    center: np.ndarray
    radius: float
    safety_margin: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (3,):
            raise ValueError(f"obstacle centre must be a 3-vector, got shape {center.shape}")
        object.__setattr__(self, "center", center)
        if not self.radius > 0.0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")
        if not self.safety_margin > 0.0:
            raise ValueError(f"obstacle safety margin must be positive, got {self.safety_margin}")


def point_cost(obstacle, x):
    """Cost of a world point: positive inside radius + margin, else zero."""
    d = float(np.linalg.norm(np.asarray(x, dtype=float) - obstacle.center))
    r, eps = obstacle.radius, obstacle.safety_margin
    if d <= r:
        return r - d + 0.5 * eps
    if d <= r + eps:
        return (d - r - eps) ** 2 / (2.0 * eps)
    return 0.0


def _cost_slope(obstacle, d):
    """Derivative of the distance cost; -1 inside, ramping to 0 across the band."""
    r, eps = obstacle.radius, obstacle.safety_margin
    if d <= r:
        return -1.0
    if d <= r + eps:
        return (d - r - eps) / eps
    return 0.0


def point_cost_gradient(obstacle, x):
    """Gradient of point_cost with respect to the world point.

    At the centre itself the direction is undefined; within 1e-9 of it the
    gradient is defined as the zero vector (assemble_gradient_stack flags
    such check times as degenerate).
    """
    x = np.asarray(x, dtype=float)
    offset = x - obstacle.center
    d = float(np.linalg.norm(offset))
    if d < _DEGENERATE_DISTANCE:
        return np.zeros(3)
    return _cost_slope(obstacle, d) * offset / d


def nearest_body_point(model, obstacle, q):
    """Index and distance of the body point closest to the obstacle centre.

    Ties resolve to the lowest index.  Returns (index, distance).
    """
    best_index, best_dist = 0, np.inf
    for i in range(model.n_body_points):
        x = model.body_point_position(q, i)
        d = float(np.linalg.norm(x - obstacle.center))
        if d < best_dist:
            best_index, best_dist = i, d
    return best_index, best_dist


@dataclass
class ObstacleGradientStack:
    """Per-check-time obstacle data stacked for the solver.

    stack has length 2*dof*M laid out per check time as (position rows,
    zero velocity rows).  body_point_indices, distances and costs record
    which body point was evaluated at each time; total_cost is their sum.
    degenerate lists check-time indices whose nearest point coincided with
    the obstacle centre.
    """

    stack: np.ndarray
    body_point_indices: np.ndarray
    distances: np.ndarray
    costs: np.ndarray
    total_cost: float
    degenerate: list = field(default_factory=list)


def assemble_gradient_stack(model, obstacle, configurations, body_point_indices=None):
    """Evaluate cost and configuration-space gradient at each check time.

    configurations is (M, dof): the position part of the predicted state at
    the obstacle check times.  By default the nearest body point is selected
    per time; passing body_point_indices freezes the selection (useful for
    directional-derivative checks, where the min switch would break
    differentiability).
    """
    qs = np.asarray(configurations, dtype=float)
    if qs.ndim != 2 or qs.shape[1] != model.dof:
        raise ValueError(f"configurations must have shape (M, {model.dof}), got {qs.shape}")
    m_count = qs.shape[0]
    dof = model.dof
    stack = np.zeros(2 * dof * m_count)
    indices = np.empty(m_count, dtype=int)
    distances = np.empty(m_count)
    costs = np.empty(m_count)
    degenerate = []
    for m in range(m_count):
        q = qs[m]
        if body_point_indices is None:
            u, d = nearest_body_point(model, obstacle, q)
        else:
            u = int(body_point_indices[m])
            d = float(np.linalg.norm(model.body_point_position(q, u) - obstacle.center))
        x = model.body_point_position(q, u)
        grad_x = point_cost_gradient(obstacle, x)
        if d < _DEGENERATE_DISTANCE:
            degenerate.append(m)
        J = model.body_point_jacobian(q, u)
        base = 2 * dof * m
        stack[base : base + dof] = J.T @ grad_x
        indices[m] = u
        distances[m] = d
        costs[m] = point_cost(obstacle, x)
    return ObstacleGradientStack(
        stack=stack,
        body_point_indices=indices,
        distances=distances,
        costs=costs,
        total_cost=float(costs.sum()),
        degenerate=degenerate,
    )
