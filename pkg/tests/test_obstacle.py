"""Obstacle cost pieces, gradients against finite differences, stacking."""

import numpy as np
import pytest

from ckmp.kinematics import PlanarPointModel, bundled_chain
from ckmp.obstacle import (
    Obstacle,
    assemble_gradient_stack,
    nearest_body_point,
    point_cost,
    point_cost_gradient,
)


def writing_obstacle():
    return Obstacle(center=np.array([-6.0, -4.0, 0.0]), radius=6.0, safety_margin=4.0)


def test_obstacle_validation():
    with pytest.raises(ValueError):
        Obstacle(center=np.zeros(2), radius=1.0, safety_margin=0.5)
    with pytest.raises(ValueError):
        Obstacle(center=np.zeros(3), radius=0.0, safety_margin=0.5)
    with pytest.raises(ValueError):
        Obstacle(center=np.zeros(3), radius=1.0, safety_margin=0.0)


def test_point_cost_piecewise_values():
    obs = writing_obstacle()
    # Inside the hard radius the cost is linear in the distance.
    assert np.isclose(point_cost(obs, [-6.0, -4.0, 0.0]), 6.0 + 2.0)
    assert np.isclose(point_cost(obs, [-3.0, -4.0, 0.0]), 6.0 - 3.0 + 2.0)
    # In the band it is the quadratic run-out: d = sqrt(52) for the origin.
    d = np.sqrt(52.0)
    assert np.isclose(point_cost(obs, [0.0, 0.0, 0.0]), (d - 10.0) ** 2 / 8.0)
    # Beyond radius + margin it vanishes.
    assert point_cost(obs, [20.0, 0.0, 0.0]) == 0.0


def test_point_cost_is_continuous_at_the_region_edges():
    obs = Obstacle(center=np.zeros(3), radius=1.0, safety_margin=0.5)
    for d_edge in (1.0, 1.5):
        below = point_cost(obs, [d_edge - 1e-9, 0.0, 0.0])
        above = point_cost(obs, [d_edge + 1e-9, 0.0, 0.0])
        assert abs(below - above) < 1e-8


def test_point_cost_gradient_matches_finite_differences():
    obs = Obstacle(center=np.array([0.3, -0.2, 0.5]), radius=0.4, safety_margin=0.3)
    rng = np.random.default_rng(4)
    h = 1e-7
    for _ in range(100):
        # Draw radii covering the interior, the band and outside.
        d = rng.uniform(0.05, 1.0)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        x = obs.center + d * direction
        if abs(d - obs.radius) < 1e-3 or abs(d - obs.radius - obs.safety_margin) < 1e-3:
            continue  # kinks of the piecewise definition
        grad = point_cost_gradient(obs, x)
        fd = np.zeros(3)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[k] = (point_cost(obs, x + e) - point_cost(obs, x - e)) / (2.0 * h)
        assert np.allclose(grad, fd, atol=1e-6)


def test_gradient_at_the_centre_is_zero():
    obs = Obstacle(center=np.zeros(3), radius=1.0, safety_margin=0.5)
    assert np.allclose(point_cost_gradient(obs, np.zeros(3)), 0.0)


def test_nearest_body_point_scans_all_points():
    model = bundled_chain("gen3_like")
    obs = Obstacle(center=np.array([0.5, 0.0, 0.5]), radius=0.1, safety_margin=0.1)
    rng = np.random.default_rng(6)
    for _ in range(10):
        q = rng.uniform(-1.0, 1.0, size=7)
        index, dist = nearest_body_point(model, obs, q)
        dists = np.linalg.norm(model.all_body_point_positions(q) - obs.center, axis=1)
        assert index == int(np.argmin(dists))
        assert np.isclose(dist, dists.min())


def test_stack_layout_and_totals_planar():
    model = PlanarPointModel()
    obs = writing_obstacle()
    qs = np.array([[0.0, 0.0], [-6.0, 2.0], [30.0, 0.0]])
    data = assemble_gradient_stack(model, obs, qs)
    assert data.stack.shape == (12,)
    # Velocity rows stay zero: the cost only sees positions.
    assert np.allclose(data.stack[2:4], 0.0)
    assert np.allclose(data.stack[6:8], 0.0)
    assert np.allclose(data.stack[10:12], 0.0)
    assert np.isclose(data.total_cost, data.costs.sum())
    assert data.costs[2] == 0.0 and np.allclose(data.stack[8:10], 0.0)
    # The planar Jacobian is the plane embedding, so position rows equal the
    # x-y part of the world gradient.
    grad = point_cost_gradient(obs, np.array([0.0, 0.0, 0.0]))
    assert np.allclose(data.stack[0:2], grad[:2])


def test_stack_frozen_selection_and_degenerate_flag():
    model = PlanarPointModel()
    obs = writing_obstacle()
    qs = np.array([[-6.0, -4.0], [0.0, 0.0]])
    data = assemble_gradient_stack(model, obs, qs)
    assert data.degenerate == [0]
    frozen = assemble_gradient_stack(model, obs, qs, body_point_indices=[0, 0])
    assert np.array_equal(frozen.body_point_indices, [0, 0])
    with pytest.raises(ValueError):
        assemble_gradient_stack(model, obs, np.zeros((3, 5)))


def test_stack_gradient_matches_finite_differences_through_the_chain():
    # Full pipeline check: differentiate the summed cost with respect to the
    # joint configuration, holding the body-point selection fixed so the
    # minimum switch cannot introduce kinks.
    model = bundled_chain("gen3_like")
    obs = Obstacle(center=np.array([0.55, -0.1, 0.5]), radius=0.12, safety_margin=0.2)
    rng = np.random.default_rng(9)
    h = 1e-6
    dof = model.dof
    for _ in range(10):
        q = rng.uniform(-0.8, 0.8, size=dof)
        data = assemble_gradient_stack(model, obs, q[None, :])
        indices = data.body_point_indices
        grad = data.stack[:dof]
        fd = np.zeros(dof)
        for j in range(dof):
            forward = q.copy()
            backward = q.copy()
            forward[j] += h
            backward[j] -= h
            up = assemble_gradient_stack(model, obs, forward[None, :], body_point_indices=indices)
            down = assemble_gradient_stack(model, obs, backward[None, :], body_point_indices=indices)
            fd[j] = (up.total_cost - down.total_cost) / (2.0 * h)
        assert np.allclose(grad, fd, atol=1e-6)
