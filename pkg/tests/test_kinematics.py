"""Forward kinematics against closed-form chains and finite differences."""

import numpy as np
import pytest

from ckmp.kinematics import PlanarPointModel, SerialChainModel, bundled_chain, load_chain


def two_link_planar(l1=0.8, l2=0.5):
    """Two revolute z joints in the x-y plane; classic cosine formulas apply."""
    joints = [
        ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
        ((l1, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    ]
    points = [
        (1, (l1, 0.0, 0.0)),
        (2, (l2, 0.0, 0.0)),
    ]
    return SerialChainModel(joints, points, name="two_link")


def numeric_jacobian(model, q, index, h=1e-7):
    J = np.zeros((3, model.dof))
    for j in range(model.dof):
        forward = q.copy()
        backward = q.copy()
        forward[j] += h
        backward[j] -= h
        J[:, j] = (
            model.body_point_position(forward, index)
            - model.body_point_position(backward, index)
        ) / (2.0 * h)
    return J


def test_planar_model_is_the_identity_embedding():
    model = PlanarPointModel()
    q = np.array([2.5, -1.0])
    assert np.allclose(model.end_effector_position(q), [2.5, -1.0, 0.0])
    assert np.allclose(model.end_effector_jacobian(q),
                       [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(IndexError):
        model.body_point_position(q, 1)
    with pytest.raises(ValueError):
        model.body_point_position(np.array([1.0, 2.0, 3.0]), 0)


def test_two_link_positions_match_cosine_formula():
    l1, l2 = 0.8, 0.5
    model = two_link_planar(l1, l2)
    rng = np.random.default_rng(2)
    for _ in range(25):
        q1, q2 = rng.uniform(-np.pi, np.pi, size=2)
        expected = np.array([
            l1 * np.cos(q1) + l2 * np.cos(q1 + q2),
            l1 * np.sin(q1) + l2 * np.sin(q1 + q2),
            0.0,
        ])
        got = model.end_effector_position(np.array([q1, q2]))
        assert np.allclose(got, expected, atol=1e-12)
        elbow = model.body_point_position(np.array([q1, q2]), 0)
        assert np.allclose(elbow, [l1 * np.cos(q1), l1 * np.sin(q1), 0.0], atol=1e-12)


def test_two_link_jacobian_matches_analytic():
    l1, l2 = 0.8, 0.5
    model = two_link_planar(l1, l2)
    q1, q2 = 0.4, -1.1
    J = model.end_effector_jacobian(np.array([q1, q2]))
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    expected = np.array([
        [-l1 * s1 - l2 * s12, -l2 * s12],
        [l1 * c1 + l2 * c12, l2 * c12],
        [0.0, 0.0],
    ])
    assert np.allclose(J, expected, atol=1e-12)


def test_bundled_chain_structure():
    model = bundled_chain("gen3_like")
    assert model.dof == 7
    assert model.n_body_points == 8
    q = np.zeros(7)
    positions = model.all_body_point_positions(q)
    assert positions.shape == (8, 3)
    assert np.allclose(positions[-1], model.end_effector_position(q))
    # Body points sit at increasing arc positions along the chain; the base
    # point must be well below the tool in the zero pose.
    assert positions[0, 2] < positions[-1, 2]


def test_jacobians_match_finite_differences():
    model = bundled_chain("gen3_like")
    rng = np.random.default_rng(7)
    for _ in range(25):
        q = rng.uniform(-1.5, 1.5, size=7)
        index = int(rng.integers(model.n_body_points))
        J = model.body_point_jacobian(q, index)
        assert np.allclose(J, numeric_jacobian(model, q, index), atol=1e-6)


def test_jacobian_columns_past_the_link_are_zero():
    model = bundled_chain("gen3_like")
    q = np.random.default_rng(0).uniform(-1, 1, size=7)
    for index in range(model.n_body_points):
        link = model.body_points[index][0]
        J = model.body_point_jacobian(q, index)
        assert np.allclose(J[:, link:], 0.0)


def test_all_body_point_positions_agrees_with_single_queries():
    model = bundled_chain("gen3_like")
    q = np.random.default_rng(3).uniform(-1, 1, size=7)
    stacked = model.all_body_point_positions(q)
    for i in range(model.n_body_points):
        assert np.allclose(stacked[i], model.body_point_position(q, i), atol=1e-14)


def test_chain_construction_errors():
    joints = [((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))]
    with pytest.raises(ValueError):
        SerialChainModel([], [(1, (0, 0, 0))])
    with pytest.raises(ValueError):
        SerialChainModel(joints, [])
    with pytest.raises(ValueError):
        SerialChainModel(joints, [(2, (0, 0, 0))])
    with pytest.raises(ValueError):
        SerialChainModel(joints + joints, [(1, (0, 0, 0))])  # EE not on last link
    with pytest.raises(ValueError):
        SerialChainModel([((0, 0, 0), (0, 0, 0), (0, 0, 0))], [(1, (0, 0, 0))])


def test_load_chain_errors(tmp_path):
    path = tmp_path / "chain.yaml"
    path.write_text("joints: []\n")
    with pytest.raises(ValueError, match="joints"):
        load_chain(str(path))
    path.write_text("joints:\n  - {offset: [0,0,0], axis: [0,0,1]}\n")
    with pytest.raises(ValueError, match="body_points"):
        load_chain(str(path))
    path.write_text(
        "joints:\n  - {offset: [0,0,0], axis: [0,0,1]}\n"
        "body_points:\n  - {link: 1}\n"
    )
    with pytest.raises(ValueError, match="body_points\\[0\\]"):
        load_chain(str(path))


def test_load_chain_from_mapping():
    doc = {
        "joints": [
            {"offset": [0.0, 0.0, 0.3], "axis": [0, 0, 1]},
            {"offset": [0.0, 0.0, 0.2], "rpy": [1.5707963267948966, 0.0, 0.0],
             "axis": [0, 0, 1]},
        ],
        "body_points": [{"link": 2, "offset": [0.1, 0.0, 0.05]}],
    }
    model = load_chain(doc)
    assert model.dof == 2
    # With the roll by +90 degrees the second joint's local z points along
    # world -y, so spinning it moves the off-axis tool in the x-z plane.
    p0 = model.end_effector_position(np.zeros(2))
    p1 = model.end_effector_position(np.array([0.0, 0.5]))
    assert abs(p0[1] - p1[1]) < 1e-12
    assert np.linalg.norm(p0 - p1) > 1e-3
