"""Forward kinematics of a floating base carrying a serial arm, in the plane frame.

A configuration is a flat float array ``q = [x, y, z, psi, q_m...]``: vehicle
position (m) and yaw (rad) in the plane frame, then the arm joint values
(rad for revolute, m for prismatic).  Roll and pitch are model parameters.

Rotation conventions: vehicle attitude is ``Rz(psi) Ry(theta) Rx(phi)`` in the
world frame; ``plane_R`` maps world coordinates into plane coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])

AXIS_PARALLEL_TOL = 1e-6


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_matrix(roll, pitch, yaw):
    """``Rz(yaw) Ry(pitch) Rx(roll)``."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def axis_angle(axis, angle):
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def homogeneous(R=None, p=None):
    T = np.eye(4)
    if R is not None:
        T[:3, :3] = R
    if p is not None:
        T[:3, 3] = p
    return T


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=float)
    return R.shape == (3, 3) and np.allclose(R.T @ R, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) < tol


@dataclass(frozen=True, eq=False)
class Joint:
    """One actuated joint: its axis in the joint's own frame, then the rigid
    link transform that follows it."""

    kind: str  # "revolute" | "prismatic"
    axis: np.ndarray
    link: np.ndarray  # 4x4

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise ContractError(f"joint kind must be 'revolute' or 'prismatic', got {self.kind!r}")
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or norm == 0:
            raise ContractError("joint axis must be a non-zero 3-vector")
        object.__setattr__(self, "axis", axis / norm)
        link = np.asarray(self.link, dtype=float)
        if link.shape != (4, 4) or not is_rotation(link[:3, :3]):
            raise ContractError("joint link must be a rigid 4x4 transform")
        object.__setattr__(self, "link", link)
        k = self.axis
        K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
        object.__setattr__(self, "_K", K)
        object.__setattr__(self, "_K2", K @ K)

    def rotation(self, angle):
        """Rotation produced by a revolute joint at ``angle``."""
        return np.eye(3) + np.sin(angle) * self._K + (1.0 - np.cos(angle)) * self._K2


@dataclass(frozen=True, eq=False)
class RobotModel:
    joints: tuple
    mount: np.ndarray = field(default_factory=lambda: np.eye(4))
    tool: np.ndarray = field(default_factory=lambda: np.eye(4))
    roll: float = 0.0
    pitch: float = 0.0
    plane_R: np.ndarray = field(default_factory=lambda: np.eye(3))
    plane_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # False admits a yaw axis parallel to the normal (forward kinematics only;
    # the controller's analysis needs the transverse axis)
    require_transverse_yaw: bool = True

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise ContractError("the arm needs at least one joint")
        object.__setattr__(self, "joints", joints)
        for name in ("mount", "tool"):
            T = np.asarray(getattr(self, name), dtype=float)
            if T.shape != (4, 4) or not is_rotation(T[:3, :3]):
                raise ContractError(f"{name} must be a rigid 4x4 transform")
            object.__setattr__(self, name, T)
        R = np.asarray(self.plane_R, dtype=float)
        if not is_rotation(R):
            raise ContractError("plane_R must be orthonormal with det +1")
        object.__setattr__(self, "plane_R", R)
        object.__setattr__(self, "plane_p", np.asarray(self.plane_p, dtype=float).reshape(3))
        # constant attitude factor and derived yaw-axis vectors
        object.__setattr__(self, "_tilt", rot_y(self.pitch) @ rot_x(self.roll))
        a_z = R @ E_Z
        a_y = np.cross(E_Z, a_z)
        if self.require_transverse_yaw and np.linalg.norm(a_y) <= AXIS_PARALLEL_TOL:
            raise ContractError("the yaw axis must not be parallel to the plane normal")
        object.__setattr__(self, "a_z", a_z)
        object.__setattr__(self, "a_y", a_y)
        object.__setattr__(self, "a_x", np.cross(a_y, a_z))
        object.__setattr__(self, "_kinds", np.array([j.kind == "revolute" for j in joints]))

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def n(self):
        return 4 + len(self.joints)

    @classmethod
    def from_world_plane(cls, joints, plane_rotation_world, plane_origin_world=(0, 0, 0), **kw):
        """Build from the plane frame's pose in the world (axes as columns)."""
        Rwp = np.asarray(plane_rotation_world, dtype=float)
        o = np.asarray(plane_origin_world, dtype=float)
        return cls(joints=joints, plane_R=Rwp.T, plane_p=-Rwp.T @ o, **kw)

    def world_to_plane(self, p_world):
        return self.plane_R @ np.asarray(p_world, dtype=float) + self.plane_p


def planar_arm(link_lengths=(0.15, 0.15), mount_offset=0.10, axis=E_Y):
    """Revolute chain hanging below the vehicle, all axes along ``axis`` of the
    vehicle frame.  At zero joint angles the tool z axis points straight down.

    The lengths are simulator defaults, not measured platform dimensions.
    """
    joints = [Joint("revolute", axis, homogeneous(p=[0.0, 0.0, -L])) for L in link_lengths]
    return joints, homogeneous(p=[0.0, 0.0, -mount_offset]), homogeneous(R=rot_x(np.pi))


def as_configuration(q, model):
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.shape[0] != model.n:
        raise ContractError(f"configuration must have length {model.n}, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ContractError("configuration entries must be finite")
    return q


def make_configuration(x, y, z, psi, q_m):
    return np.concatenate([[x, y, z, psi], np.atleast_1d(np.asarray(q_m, dtype=float))])


@dataclass(frozen=True)
class EndEffectorState:
    """Pose of the tool frame in the plane frame."""

    X: float
    Y: float
    Z: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray

    @property
    def position(self):
        return np.array([self.X, self.Y, self.Z])

    @property
    def rotation(self):
        return np.column_stack([self.x_axis, self.y_axis, self.z_axis])


@dataclass(frozen=True)
class KinematicState:
    """Everything one pass over the chain produces."""

    ee: EndEffectorState
    joint_axes: np.ndarray  # (n_joints, 3) unit axes in the plane frame
    joint_origins: np.ndarray  # (n_joints, 3)
    base: np.ndarray  # vehicle centre


@dataclass(frozen=True)
class TaskGradients:
    """Configuration gradients, each of length n."""

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    r_O: np.ndarray
    z_axis: np.ndarray  # (3, n) Jacobian of the tool z axis


def cross(a, b):
    """Cross product of 3-vectors (or stacks of them along the last axis);
    cheaper than ``np.cross`` for the tiny arrays used here."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def _chain(q, model):
    x, y, z, psi = q[0], q[1], q[2], q[3]
    R = model.plane_R @ rot_z(psi) @ model._tilt
    base = np.array([x, y, z])
    p = base + R @ model.mount[:3, 3]
    R = R @ model.mount[:3, :3]
    nj = model.n_joints
    axes = np.empty((nj, 3))
    origins = np.empty((nj, 3))
    for j, (joint, qj) in enumerate(zip(model.joints, q[4:])):
        axes[j] = R @ joint.axis
        origins[j] = p
        if joint.kind == "revolute":
            R = R @ joint.rotation(qj)
        else:
            p = p + axes[j] * qj
        p = p + R @ joint.link[:3, 3]
        R = R @ joint.link[:3, :3]
    p = p + R @ model.tool[:3, 3]
    R = R @ model.tool[:3, :3]
    ee = EndEffectorState(float(p[0]), float(p[1]), float(p[2]), R[:, 0].copy(), R[:, 1].copy(), R[:, 2].copy())
    return KinematicState(ee, axes, origins, base)


def kinematic_state(q, model):
    return _chain(as_configuration(q, model), model)


def forward_kinematics(q, model):
    """Tool pose in the plane frame."""
    return kinematic_state(q, model).ee


def joint_axis(q, model, j):
    """Unit axis of arm joint ``j`` (1-based) in the plane frame; zero for prismatic."""
    if not 1 <= j <= model.n_joints:
        raise IndexError(f"joint index {j} outside 1..{model.n_joints}")
    if model.joints[j - 1].kind == "prismatic":
        return np.zeros(3)
    return kinematic_state(q, model).joint_axes[j - 1]


def gradients_from_state(ks, model):
    n = model.n
    p = ks.ee.position
    zt = ks.ee.z_axis
    dp = np.zeros((3, n))
    dz = np.zeros((3, n))
    # translation block: exact identities, no arithmetic involved
    dp[0, 0] = 1.0
    dp[1, 1] = 1.0
    dp[2, 2] = 1.0
    nj = model.n_joints
    axes = ks.joint_axes
    # all lever-arm and axis cross products in one call
    left = np.empty((2 + 2 * nj, 3))
    right = np.empty((2 + 2 * nj, 3))
    left[0] = left[1] = model.a_z
    right[0] = p - ks.base
    right[1] = zt
    left[2:2 + nj] = axes
    right[2:2 + nj] = p - ks.joint_origins
    left[2 + nj:] = axes
    right[2 + nj:] = zt
    cr = cross(left, right)
    dp[:, 3] = cr[0]
    dz[:, 3] = cr[1]
    rev = model._kinds
    dp[:, 4:] = np.where(rev[:, None], cr[2:2 + nj], axes).T
    dz[:, 4:] = np.where(rev[:, None], cr[2 + nj:], 0.0).T
    dr_O = np.zeros(n)
    dr_O[3] = model.a_y @ zt
    # e_z x axis = (-axis_y, axis_x, 0)
    dr_O[4:] = np.where(rev, -axes[:, 1] * zt[0] + axes[:, 0] * zt[1], 0.0)
    return TaskGradients(dp[0], dp[1], dp[2], dr_O, dz)


def grad_task(q, model):
    """Analytic gradients of X, Y, Z and r_O = 1 + e_z . z_tool."""
    return gradients_from_state(kinematic_state(q, model), model)
