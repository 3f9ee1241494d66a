"""Geometric locator: map-point triangulation from labeled frames and the
query-pose solve with its 6x6 covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (DegenerateGeometry, InsufficientObservations,
                     NegativeVariance, NoConvergence, SingularInformation)
from .lie import Pose, misalignment_angle, right_jacobian_residual, so3_exp
from .scene import Intrinsics, MapPoint, PoseEstimate


@dataclass
class SolverConfig:
    huber_delta: float = 1.0        # pixels
    max_iterations: int = 50
    step_tolerance: float = 1e-9
    eps_r: float = 5.0              # mean-residual rejection threshold, pixels
    min_observations: int = 4
    lm_lambda0: float = 1e-4

    def __post_init__(self):
        if min(self.huber_delta, self.max_iterations, self.step_tolerance,
               self.eps_r, self.min_observations) <= 0:
            raise ValueError("all SolverConfig fields must be positive")


@dataclass
class TriangulationResult:
    map_points: list
    rejected_point_ids: list
    mean_residual: float


@dataclass
class GeometricEstimate:
    estimate: PoseEstimate
    residual_sum: float     # robustified squared-pixel sum at the solution
    track_count: int
    sigma_iso_p: float
    sigma_iso_r: float
    n_iterations: int = 0


def _huberized_sq(res_norms, delta):
    """Squared residual with the Huber roll-off: n^2 below delta, else
    delta*(2n - delta).  Twice the Huber loss."""
    return np.where(res_norms <= delta, res_norms**2,
                    delta * (2.0 * res_norms - delta))


def forward_intersection(frames, observations, K: Intrinsics,
                         cfg: SolverConfig = None) -> TriangulationResult:
    """Triangulate every tracked point from its observing frames (poses fixed).

    Points whose mean reprojection residual exceeds eps_r, or that fall behind
    any observing camera, are rejected rather than returned.
    """
    cfg = cfg or SolverConfig()
    frame_by_id = {fr.id: fr for fr in frames}
    by_point = {}
    for o in observations:
        if o.frame_id in frame_by_id:
            by_point.setdefault(o.point_id, []).append(o)
    if not by_point:
        raise InsufficientObservations("no observations over the given frames")
    point_ids = sorted(by_point)
    for pid in point_ids:
        if len({o.frame_id for o in by_point[pid]}) < 2:
            raise InsufficientObservations(
                f"point {pid} observed in fewer than 2 frames")

    fid_list = sorted(frame_by_id)
    fid_to_row = {fid: i for i, fid in enumerate(fid_list)}
    Rs = np.stack([frame_by_id[f].label_pose.R for f in fid_list])
    ps = np.stack([frame_by_id[f].label_pose.p for f in fid_list])

    pt_start = np.zeros(len(point_ids) + 1, dtype=np.int64)
    cam_idx, uv = [], []
    for j, pid in enumerate(point_ids):
        obs = sorted(by_point[pid], key=lambda o: o.frame_id)
        pt_start[j + 1] = pt_start[j] + len(obs)
        cam_idx.extend(fid_to_row[o.frame_id] for o in obs)
        uv.extend(o.pixel for o in obs)
    cam_idx = np.asarray(cam_idx, dtype=np.int64)
    uv = np.asarray(uv, dtype=float)

    X, mean_res, status = kernels.triangulate_kernel(
        Rs, ps, pt_start, cam_idx, uv, K.fx, K.fy, K.cx, K.cy,
        cfg.huber_delta, 30, 1e-10)

    if (status == 2).all():
        raise DegenerateGeometry("all observing rays parallel for every point")
    map_points, rejected = [], []
    for j, pid in enumerate(point_ids):
        if status[j] == 2:
            raise DegenerateGeometry(f"point {pid}: observing rays parallel")
        if status[j] != 0 or mean_res[j] > cfg.eps_r:
            rejected.append(pid)
            continue
        map_points.append(MapPoint(point_id=pid, position=X[j],
                                   observations=list(by_point[pid]),
                                   mean_residual=float(mean_res[j])))
    overall = (float(np.mean([mp.mean_residual for mp in map_points]))
               if map_points else 0.0)
    return TriangulationResult(map_points, rejected, overall)


def backward_intersection(map_points, query_obs, K: Intrinsics, init: Pose,
                          cfg: SolverConfig = None) -> GeometricEstimate:
    """Solve the query pose from known map points, then assemble the
    information matrix and covariance at the solution."""
    cfg = cfg or SolverConfig()
    pos_by_id = {mp.point_id: mp.position for mp in map_points}
    matched = [(o, pos_by_id[o.point_id]) for o in query_obs
               if o.point_id in pos_by_id]
    if len(matched) < cfg.min_observations:
        raise InsufficientObservations(
            f"{len(matched)} matched points < min_observations={cfg.min_observations}")
    X = np.stack([x for _, x in matched])
    uv = np.stack([o.pixel for o, _ in matched])

    R, p, status, n_iter = kernels.solve_pose_kernel(
        X, uv, init.R.copy(), init.p.copy(), K.fx, K.fy, K.cx, K.cy,
        cfg.huber_delta, cfg.max_iterations, cfg.step_tolerance, cfg.lm_lambda0)
    if status != 0:
        raise NoConvergence(
            f"pose solve did not converge in {cfg.max_iterations} iterations")
    T = Pose(R, p).orthonormalized()

    # residuals, weights, Jacobians at the solution
    n = len(matched)
    r = np.empty((n, 2))
    J = np.empty((n, 2, 6))
    for i in range(n):
        Y = T.R.T @ (X[i] - T.p)
        r[i] = np.array([K.fx * Y[0] / Y[2] + K.cx,
                         K.fy * Y[1] / Y[2] + K.cy]) - uv[i]
        J[i] = right_jacobian_residual(T, X[i], K)
    rn = np.linalg.norm(r, axis=1)
    w = np.where(rn <= cfg.huber_delta, 1.0,
                 cfg.huber_delta / np.maximum(rn, 1e-300))

    # Residual-variance estimate from the robustified objective; per-pixel
    # information carries the weight applied to the residual (hence squared
    # inside J^T J).  2p - 1 follows the scalar-variance approximation.
    residual_sum = float(_huberized_sq(rn, cfg.huber_delta).sum())
    sigma2 = max(residual_sum / (2 * n - 1), 1e-32)
    info = np.einsum('k,kab,kac->bc', w**2, J, J) / sigma2
    info = 0.5 * (info + info.T)
    if np.linalg.cond(info) > 1e12:
        raise SingularInformation(f"information condition {np.linalg.cond(info):.3e}")
    C = np.linalg.inv(info)
    C = 0.5 * (C + C.T)
    sp, sr = isometric_sigmas(C)
    est = PoseEstimate(pose=T, covariance=C, source="geometric",
                       frame_id=query_obs[0].frame_id if query_obs else -1)
    return GeometricEstimate(estimate=est, residual_sum=residual_sum,
                             track_count=n, sigma_iso_p=sp, sigma_iso_r=sr,
                             n_iterations=int(n_iter))


def isometric_sigmas(C):
    """Scalar (sigma_p, sigma_r) summaries of a 6x6 pose covariance."""
    C = np.asarray(C, dtype=float)
    d = np.diag(C)
    if (d < -1e-12).any():
        raise NegativeVariance(f"negative diagonal entries {d[d < -1e-12]}")
    d = np.maximum(d, 0.0)
    sigma_p = float(np.sqrt(d[:3]).sum() / 3.0)
    # rotation-angle of exp of the per-axis std vector; equals its norm
    sigma_r = misalignment_angle(np.eye(3), so3_exp(np.sqrt(d[3:])))
    return sigma_p, sigma_r
