"""SO(3)/SE(3) primitives: exp/log maps, pose algebra, reprojection Jacobian.

Twist ordering is (translation, rotation) throughout: xi = (rho, phi) with
rho in meters and phi in radians.  Pose updates downstream use the right
perturbation T <- T * exp(xi).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearPiRotation, NonPositiveDepth

_EPS_ANGLE = 1e-8
_PI_GUARD = 1e-6


def skew(v):
    """3x3 cross-product matrix of a 3-vector."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def so3_exp(phi):
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    S = skew(phi)
    if theta < _EPS_ANGLE:
        # 2nd-order Taylor; exact enough below the branch threshold
        return np.eye(3) + S + 0.5 * (S @ S)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * S + b * (S @ S)


def so3_log(R):
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta > np.pi - _PI_GUARD:
        raise NearPiRotation(f"rotation angle {theta} within 1e-6 of pi")
    if theta < _EPS_ANGLE:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return theta / (2.0 * np.sin(theta)) * axis


def _so3_left_jacobian(phi):
    theta = np.linalg.norm(phi)
    S = skew(phi)
    if theta < _EPS_ANGLE:
        return np.eye(3) + 0.5 * S + (S @ S) / 6.0
    b = (1.0 - np.cos(theta)) / theta**2
    c = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + b * S + c * (S @ S)


def _so3_left_jacobian_inv(phi):
    theta = np.linalg.norm(phi)
    S = skew(phi)
    if theta < _EPS_ANGLE:
        return np.eye(3) - 0.5 * S + (S @ S) / 12.0
    half = theta / 2.0
    cot = half / np.tan(half)
    return np.eye(3) - 0.5 * S + (1.0 - cot) / theta**2 * (S @ S)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: camera-to-world rotation R and camera position p."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @staticmethod
    def identity():
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.R @ other.R, self.R @ other.p + self.p)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.p)

    def orthonormalized(self) -> "Pose":
        """Project the rotation back onto SO(3) (drift control)."""
        U, _, Vt = np.linalg.svd(self.R)
        R = U @ Vt
        if np.linalg.det(R) < 0:
            R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
        return Pose(R, self.p)


def exp_se3(xi):
    """Twist (rho, phi) -> Pose."""
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[:3], xi[3:]
    R = so3_exp(phi)
    V = _so3_left_jacobian(phi)
    return Pose(R, V @ rho)


def log_se3(T: Pose):
    """Pose -> twist (rho, phi).  Raises NearPiRotation near the pi branch."""
    phi = so3_log(T.R)
    Vinv = _so3_left_jacobian_inv(phi)
    return np.concatenate([Vinv @ T.p, phi])


def pose_distance(T1: Pose, T2: Pose) -> float:
    """||log(T1^-1 T2)||_2; bi-invariant under left action."""
    return float(np.linalg.norm(log_se3(T1.inverse() @ T2)))


def misalignment_angle(R1, R2) -> float:
    """Angle of R1^T R2, argument clamped to [-1, 1]."""
    cos_theta = np.clip((np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(cos_theta))


def right_jacobian_residual(T: Pose, X, K) -> np.ndarray:
    """2x6 Jacobian of the reprojection residual w.r.t. a right perturbation of T.

    Columns ordered (translation, rotation).  K carries fx, fy, cx, cy.
    """
    Y = T.R.T @ (np.asarray(X, dtype=float) - T.p)
    if Y[2] <= 1e-9:
        raise NonPositiveDepth(f"depth {Y[2]} not strictly positive")
    x, y, z = Y
    J_pi = np.array([
        [K.fx / z, 0.0, -K.fx * x / z**2],
        [0.0, K.fy / z, -K.fy * y / z**2],
    ])
    # Y(T exp(xi)) = exp(-xi) acting on Y: dY/drho = -I, dY/dphi = [Y]_x
    dY = np.hstack([-np.eye(3), skew(Y)])
    return J_pi @ dY


def _se3_Q(rho, phi):
    # Barfoot's Q block of the SE(3) left Jacobian.
    theta = np.linalg.norm(phi)
    rx, px = skew(rho), skew(phi)
    if theta < _EPS_ANGLE:
        c1, c2, c3 = 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0
    else:
        c1 = (theta - np.sin(theta)) / theta**3
        c2 = (theta**2 / 2.0 + np.cos(theta) - 1.0) / theta**4
        c3 = (theta**3 / 6.0 - theta + np.sin(theta)) / theta**5
    m1 = px @ rx + rx @ px + px @ rx @ px
    m2 = px @ px @ rx + rx @ px @ px - 3.0 * px @ rx @ px
    m3 = px @ rx @ px @ px + px @ px @ rx @ px
    return 0.5 * rx + c1 * m1 + c2 * m2 + 0.5 * (c2 - 3.0 * c3) * m3


def se3_right_jacobian(xi) -> np.ndarray:
    """6x6 right Jacobian of SE(3): exp(xi + dxi) ~ exp(xi) exp(J_r(xi) dxi)."""
    xi = np.asarray(xi, dtype=float)
    Jr_phi = _so3_left_jacobian(-xi[3:])
    Q = _se3_Q(-xi[:3], -xi[3:])
    J = np.zeros((6, 6))
    J[:3, :3] = Jr_phi
    J[3:, 3:] = Jr_phi
    J[:3, 3:] = Q
    return J


def se3_right_jacobian_inv(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    Jinv_phi = _so3_left_jacobian_inv(-xi[3:])
    Q = _se3_Q(-xi[:3], -xi[3:])
    J = np.zeros((6, 6))
    J[:3, :3] = Jinv_phi
    J[3:, 3:] = Jinv_phi
    J[:3, 3:] = -Jinv_phi @ Q @ Jinv_phi
    return J


def quat_to_rot(qx, qy, qz, qw):
    """Unit quaternion (w-last convention) to rotation matrix."""
    x, y, z, w = qx, qy, qz, qw
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(R):
    """Rotation matrix to unit quaternion (qx, qy, qz, qw), qw >= 0."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    if q[3] < 0:
        q = -q
    return q / np.linalg.norm(q)
