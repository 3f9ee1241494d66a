"""Constant-velocity motion model on SE(3) and covariance-weighted fusion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientHistory, NoConvergence, NoInput,
                     SingularCovariance)
from .lie import Pose, exp_se3, log_se3, misalignment_angle, se3_right_jacobian_inv
from .scene import PoseEstimate

_COV_FLOOR = 1e-8


@dataclass
class MotionWindow:
    t: int = 4
    history: list = field(default_factory=list)  # PoseEstimate, most recent last

    def append(self, estimate: PoseEstimate):
        if self.history and estimate.frame_id <= self.history[-1].frame_id:
            raise ValueError("frame ids must be strictly increasing")
        self.history.append(estimate)
        while len(self.history) > self.t:
            self.history.pop(0)


@dataclass
class MotionPrediction:
    estimate: PoseEstimate
    delta: Pose               # fitted backward per-step motion
    fit_residuals: list       # per-frame 6-vector residuals at the optimum


def _fit_residuals(A: Pose, delta: Pose, poses):
    """Stack of log((A * delta^(j-1))^-1 T_{i-j}) over the window."""
    res = []
    cur = A
    for j in range(len(poses)):
        res.append(log_se3(cur.inverse() @ poses[j]))
        cur = cur @ delta
    return res


def fit_motion_model(window: MotionWindow) -> MotionPrediction:
    """Jointly fit the anchor pose and the constant backward step delta by
    Gauss-Newton (finite-difference Jacobian over the two twists), then
    predict one step past the newest frame."""
    L = len(window.history)
    if L < 2:
        raise InsufficientHistory(f"window length {L} < 2")
    poses = [e.pose for e in reversed(window.history)]  # j=1 is the newest
    A = poses[0]
    delta = poses[0].inverse() @ poses[1]

    def stack(a_local, d_local):
        Ac = A @ exp_se3(a_local)
        dc = delta @ exp_se3(d_local)
        return np.concatenate(_fit_residuals(Ac, dc, poses))

    h = 1e-6
    converged = False
    for _ in range(100):
        r0 = stack(np.zeros(6), np.zeros(6))
        J = np.zeros((6 * L, 12))
        for k in range(12):
            e = np.zeros(12)
            e[k] = h
            J[:, k] = (stack(e[:6], e[6:]) - stack(-e[:6], -e[6:])) / (2 * h)
        H = J.T @ J + 1e-14 * np.eye(12)
        dx = np.linalg.solve(H, -J.T @ r0)
        A = (A @ exp_se3(dx[:6])).orthonormalized()
        delta = (delta @ exp_se3(dx[6:])).orthonormalized()
        if np.linalg.norm(dx) < 1e-10:
            converged = True
            break
    if not converged:
        raise NoConvergence("motion-model fit did not converge")

    residuals = _fit_residuals(A, delta, poses)
    res = np.stack(residuals)
    divisor = max(L - 2, 1)
    var = ((res - res.mean(axis=0)) ** 2).sum(axis=0) / divisor
    cov = np.diag(np.maximum(var, _COV_FLOOR))
    predicted = A @ delta.inverse()
    newest_id = window.history[-1].frame_id
    est = PoseEstimate(pose=predicted, covariance=cov, source="motion",
                       frame_id=newest_id + 1)
    return MotionPrediction(estimate=est, delta=delta, fit_residuals=residuals)


def fuse(geo, motion: MotionPrediction) -> PoseEstimate:
    """Covariance-weighted pose fusion of the geometric estimate and the
    motion prediction; Gauss-Newton on the two log-residuals."""
    inputs = [(geo.estimate.pose, geo.estimate.covariance),
              (motion.estimate.pose, motion.estimate.covariance)]
    weights = []
    for _, C in inputs:
        try:
            W = np.linalg.inv(C)
        except np.linalg.LinAlgError as e:
            raise SingularCovariance(str(e)) from e
        if not np.isfinite(W).all():
            raise SingularCovariance("covariance inverse not finite")
        weights.append(W)

    T = inputs[0][0]
    for _ in range(50):
        H = np.zeros((6, 6))
        g = np.zeros(6)
        for (Tx, _), W in zip(inputs, weights):
            e = log_se3(Tx.inverse() @ T)
            Ji = se3_right_jacobian_inv(e)
            H += Ji.T @ W @ Ji
            g += Ji.T @ W @ e
        dx = np.linalg.solve(H, -g)
        T = T @ exp_se3(dx)
        if np.linalg.norm(dx) < 1e-12:
            break
    H = np.zeros((6, 6))
    for (Tx, _), W in zip(inputs, weights):
        Ji = se3_right_jacobian_inv(log_se3(Tx.inverse() @ T))
        H += Ji.T @ W @ Ji
    C = np.linalg.inv(H)
    C = 0.5 * (C + C.T)
    return PoseEstimate(pose=T.orthonormalized(), covariance=C, source="fused",
                        frame_id=geo.estimate.frame_id)


def gate_and_fuse(geo=None, motion: MotionPrediction = None) -> PoseEstimate:
    """3-sigma consistency gate on the geometric estimate, then fuse.

    The gate uses only the geometric estimate's isometric sigmas; a geometric
    pose farther than 3 sigma from the motion prediction is treated as a
    failure and replaced by the prediction.
    """
    if geo is None and motion is None:
        raise NoInput("neither a geometric estimate nor a motion prediction")
    if motion is None:
        return geo.estimate
    if geo is None:
        return motion.estimate
    dp = np.linalg.norm(geo.estimate.pose.p - motion.estimate.pose.p)
    dth = misalignment_angle(geo.estimate.pose.R, motion.estimate.pose.R)
    if dp > 3.0 * geo.sigma_iso_p or dth > 3.0 * geo.sigma_iso_r:
        return motion.estimate
    return fuse(geo, motion)
