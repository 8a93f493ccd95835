"""Forward kinematics and body-point Jacobians.

Two interchangeable models are provided.  PlanarPointModel treats a 2-D
configuration as a point in the x-y plane, which is all the planar writing
task needs.  SerialChainModel implements a revolute serial chain described by
per-joint fixed transforms (translation plus optional roll-pitch-yaw) and a
rotation axis, with a configurable list of body points used for collision
checking.  Both expose:

    model.dof                      number of configuration variables
    model.n_body_points            number of collision check points
    model.body_point_position(q, i)  -> (3,) world position
    model.body_point_jacobian(q, i)  -> (3, dof) position Jacobian
    model.end_effector_position(q)   -> (3,)
    model.end_effector_jacobian(q)   -> (3, dof)

The end effector is by convention the last body point, which chain files must
place on the last link.
"""

from __future__ import annotations

import importlib.resources

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

__all__ = ["PlanarPointModel", "SerialChainModel", "load_chain", "bundled_chain"]


def _check_q(q, dof):
    q = np.asarray(q, dtype=float)
    if q.shape != (dof,):
        raise ValueError(f"configuration must have shape ({dof},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("configuration contains non-finite entries")
    return q


class PlanarPointModel:
    """A 2-dof point robot: the configuration is the position itself.

    The single body point is (q1, q2, 0) and its Jacobian is the constant
    embedding of the plane into 3-space.
    """

    dof = 2
    n_body_points = 1

    def body_point_position(self, q, index=0):
        q = _check_q(q, self.dof)
        if index != 0:
            raise IndexError("planar point model has a single body point")
        return np.array([q[0], q[1], 0.0])

    def body_point_jacobian(self, q, index=0):
        _check_q(q, self.dof)
        if index != 0:
            raise IndexError("planar point model has a single body point")
        return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def end_effector_position(self, q):
        return self.body_point_position(q, 0)

    def end_effector_jacobian(self, q):
        return self.body_point_jacobian(q, 0)


def _homogeneous(rotation, translation):
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


class SerialChainModel:
    """Revolute serial chain with named body points.

    joints: sequence of (offset, rpy, axis) triples.  Link j's frame is
    reached by translating/rotating by the fixed part, then rotating about
    axis by q[j].  body_points: sequence of (link, offset) with 1-based link
    indices; the last entry is the end effector and must sit on the last
    link.
    """

    def __init__(self, joints, body_points, name="chain"):
        self.name = name
        self._offsets = []
        self._fixed_rots = []
        self._axes = []
        for j, (offset, rpy, axis) in enumerate(joints):
            offset = np.asarray(offset, dtype=float)
            axis = np.asarray(axis, dtype=float)
            if offset.shape != (3,) or axis.shape != (3,):
                raise ValueError(f"joint {j + 1}: offset and axis must be 3-vectors")
            norm = np.linalg.norm(axis)
            if norm < 1e-12:
                raise ValueError(f"joint {j + 1}: rotation axis must be nonzero")
            self._offsets.append(offset)
            self._fixed_rots.append(Rotation.from_euler("xyz", rpy).as_matrix())
            self._axes.append(axis / norm)
        self.dof = len(self._offsets)
        if self.dof == 0:
            raise ValueError("chain must have at least one joint")
        self.body_points = []
        for i, (link, offset) in enumerate(body_points):
            link = int(link)
            if not 1 <= link <= self.dof:
                raise ValueError(f"body point {i}: link {link} outside 1..{self.dof}")
            self.body_points.append((link, np.asarray(offset, dtype=float)))
        if not self.body_points:
            raise ValueError("chain must define at least one body point")
        if self.body_points[-1][0] != self.dof:
            raise ValueError("the last body point (end effector) must sit on the last link")

    @property
    def n_body_points(self):
        return len(self.body_points)

    def _frames(self, q):
        """World frames of every link plus joint origins and world axes."""
        q = _check_q(q, self.dof)
        frames, origins, axes_world = [], [], []
        T = np.eye(4)
        for j in range(self.dof):
            T = T @ _homogeneous(self._fixed_rots[j], self._offsets[j])
            origins.append(T[:3, 3].copy())
            axes_world.append(T[:3, :3] @ self._axes[j])
            spin = Rotation.from_rotvec(self._axes[j] * q[j]).as_matrix()
            T = T @ _homogeneous(spin, np.zeros(3))
            frames.append(T.copy())
        return frames, origins, axes_world

    def body_point_position(self, q, index):
        link, offset = self._point(index)
        frames, _, _ = self._frames(q)
        T = frames[link - 1]
        return T[:3, :3] @ offset + T[:3, 3]

    def body_point_jacobian(self, q, index):
        """Geometric Jacobian of a body point; columns past its link are zero."""
        link, offset = self._point(index)
        frames, origins, axes_world = self._frames(q)
        T = frames[link - 1]
        x = T[:3, :3] @ offset + T[:3, 3]
        J = np.zeros((3, self.dof))
        for j in range(link):
            J[:, j] = np.cross(axes_world[j], x - origins[j])
        return J

    def end_effector_position(self, q):
        return self.body_point_position(q, self.n_body_points - 1)

    def end_effector_jacobian(self, q):
        return self.body_point_jacobian(q, self.n_body_points - 1)

    def all_body_point_positions(self, q):
        """Stack every body point position into an (n_body_points, 3) array."""
        frames, _, _ = self._frames(q)
        out = np.empty((self.n_body_points, 3))
        for i, (link, offset) in enumerate(self.body_points):
            T = frames[link - 1]
            out[i] = T[:3, :3] @ offset + T[:3, 3]
        return out

    def _point(self, index):
        if not 0 <= index < self.n_body_points:
            raise IndexError(f"body point index {index} outside 0..{self.n_body_points - 1}")
        return self.body_points[index]


def load_chain(source):
    """Build a SerialChainModel from a YAML chain description.

    source may be a path or an already-parsed mapping.  Required keys:
    joints (list of {offset, axis, optional rpy}) and body_points (list of
    {link, offset}).  Raises ValueError naming the offending field.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source) as fh:
            doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError("chain file must contain a mapping at top level")
    joints_doc = doc.get("joints")
    if not isinstance(joints_doc, list) or not joints_doc:
        raise ValueError("chain file: 'joints' must be a non-empty list")
    joints = []
    for j, entry in enumerate(joints_doc):
        if not isinstance(entry, dict) or "offset" not in entry or "axis" not in entry:
            raise ValueError(f"chain file: joints[{j}] needs 'offset' and 'axis'")
        joints.append((entry["offset"], entry.get("rpy", (0.0, 0.0, 0.0)), entry["axis"]))
    points_doc = doc.get("body_points")
    if not isinstance(points_doc, list) or not points_doc:
        raise ValueError("chain file: 'body_points' must be a non-empty list")
    points = []
    for i, entry in enumerate(points_doc):
        if not isinstance(entry, dict) or "link" not in entry or "offset" not in entry:
            raise ValueError(f"chain file: body_points[{i}] needs 'link' and 'offset'")
        points.append((entry["link"], entry["offset"]))
    return SerialChainModel(joints, points, name=str(doc.get("name", "chain")))


def bundled_chain(name="gen3_like"):
    """Load a chain description shipped with the package."""
    ref = importlib.resources.files("ckmp") / "data" / f"{name}.yaml"
    with importlib.resources.as_file(ref) as path:
        return load_chain(path)
