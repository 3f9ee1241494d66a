"""Synthetic scenes, noise injection, and the Monte-Carlo coverage harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GenerationFailure, MonolocError
from .lie import Pose, log_se3, misalignment_angle, so3_exp
from .locator import (SolverConfig, backward_intersection, forward_intersection)
from .scene import Frame, Intrinsics, Observation

DEFAULT_INTRINSICS = Intrinsics(525.0, 525.0, 319.5, 239.5, width=640, height=480)


@dataclass
class SyntheticScene:
    map_points: np.ndarray          # (n, 3) ground-truth positions
    training_poses: list            # list of Pose
    query_pose: Pose
    intrinsics: Intrinsics
    visibility: list                # exact Observations; query frame id = len(training_poses)

    @property
    def query_frame_id(self):
        return len(self.training_poses)


@dataclass
class NoiseSpec:
    pixel_sigma: float = 1.0
    label_pos_sigma: float = 0.0
    label_rot_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.pixel_sigma, self.label_pos_sigma, self.label_rot_sigma) < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass
class CoverageReport:
    trials: int
    positional_coverage: Optional[float]
    angular_coverage: Optional[float]
    failures: int
    degenerate_zero_noise: bool
    config: dict
    per_trial: list = field(default_factory=list)

    def to_dict(self):
        return {
            "trials": self.trials,
            "coverage": {"positional": self.positional_coverage,
                         "angular": self.angular_coverage},
            "failures": self.failures,
            "degenerate_zero_noise": self.degenerate_zero_noise,
            "config": self.config,
            "per_trial": self.per_trial,
        }


def _look_at(position, target, up=(0.0, 1.0, 0.0)):
    z = np.asarray(target, dtype=float) - position
    z = z / np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=float), z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose(np.stack([x, y, z], axis=1), np.asarray(position, dtype=float))


def _visible(pose: Pose, X, K: Intrinsics):
    Y = (X - pose.p) @ pose.R
    ok = Y[:, 2] > 0.1
    u = K.fx * Y[:, 0] / np.where(ok, Y[:, 2], 1.0) + K.cx
    v = K.fy * Y[:, 1] / np.where(ok, Y[:, 2], 1.0) + K.cy
    w = K.width if K.width is not None else np.inf
    h = K.height if K.height is not None else np.inf
    return ok & (u >= 0) & (u < w) & (v >= 0) & (v < h), np.column_stack([u, v])


def generate_scene(point_count=119, camera_count=4, seed=0) -> SyntheticScene:
    """Points in a 4x4x2 m box, training cameras on a ~0.1 m-spaced arc aimed
    at the box centroid, query camera perturbed between the middle pair."""
    if point_count < 8:
        raise ValueError("point_count must be >= 8")
    if camera_count < 2:
        raise ValueError("camera_count must be >= 2")
    rng = np.random.default_rng(seed)
    K = DEFAULT_INTRINSICS
    centroid = np.array([0.0, 0.0, 4.0])
    radius = 4.0
    dalpha = 0.1 / radius
    training = []
    for k in range(camera_count):
        alpha = (k - (camera_count - 1) / 2.0) * dalpha
        pos = centroid + radius * np.array([np.sin(alpha), 0.0, -np.cos(alpha)])
        training.append(_look_at(pos, centroid))
    mid = camera_count // 2
    q_pos = 0.5 * (training[mid - 1].p + training[mid].p) + rng.normal(0.0, 0.02, 3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    q_rot = _look_at(q_pos, centroid).R @ so3_exp(axis * rng.normal(0.0, np.deg2rad(0.3)))
    query = Pose(q_rot, q_pos)

    for _ in range(100):
        pts = []
        guard = 0
        while len(pts) < point_count and guard < 50:
            guard += 1
            cand = np.column_stack([rng.uniform(-2, 2, point_count),
                                    rng.uniform(-2, 2, point_count),
                                    rng.uniform(3, 5, point_count)])
            vis_q, _ = _visible(query, cand, K)
            vis_t = np.stack([_visible(T, cand, K)[0] for T in training])
            keep = vis_q & (vis_t.sum(axis=0) >= 2)
            pts.extend(cand[keep])
        if len(pts) < point_count:
            continue
        pts = np.asarray(pts[:point_count])
        obs = []
        fractions = []
        for fid, T in enumerate(training + [query]):
            vis, uv = _visible(T, pts, K)
            fractions.append(vis.mean())
            for pid in np.nonzero(vis)[0]:
                obs.append(Observation(fid, int(pid), uv[pid]))
        if min(fractions) < 0.6:
            continue
        return SyntheticScene(pts, training, query, K, obs)
    raise GenerationFailure("no valid scene in 100 attempts")


def _perturbed_pose(pose: Pose, rng, pos_sigma, rot_sigma):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.normal(0.0, rot_sigma) if rot_sigma > 0 else 0.0
    dp = rng.normal(0.0, pos_sigma, 3) if pos_sigma > 0 else np.zeros(3)
    return Pose(pose.R @ so3_exp(axis * angle), pose.p + dp)


def run_coverage_experiment(scene: SyntheticScene, noise: NoiseSpec,
                            trials: int, keep_records=True) -> CoverageReport:
    """Per trial: corrupt labels, add fresh pixel noise, triangulate, solve the
    query pose, and check each error-twist component against its 1.96-sigma
    band from the covariance diagonal."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = SolverConfig()
    K = scene.intrinsics
    qid = scene.query_frame_id
    train_obs = [o for o in scene.visibility if o.frame_id != qid]
    query_obs = [o for o in scene.visibility if o.frame_id == qid]
    zero_noise = (noise.pixel_sigma == 0 and noise.label_pos_sigma == 0
                  and noise.label_rot_sigma == 0)

    children = np.random.SeedSequence(noise.rng_seed).spawn(trials)
    hits_p = hits_r = checks = failures = 0
    records = []
    for t in range(trials):
        rng = np.random.default_rng(children[t])
        frames = []
        for fid, T in enumerate(scene.training_poses):
            Tc = _perturbed_pose(T, rng, noise.label_pos_sigma, noise.label_rot_sigma)
            frames.append(Frame(id=fid, label_pose=Tc))
        nobs = [Observation(o.frame_id, o.point_id,
                            o.pixel + rng.normal(0.0, noise.pixel_sigma, 2))
                for o in train_obs]
        nquery = [Observation(o.frame_id, o.point_id,
                              o.pixel + rng.normal(0.0, noise.pixel_sigma, 2))
                  for o in query_obs]
        init = _perturbed_pose(scene.query_pose, rng, 0.01, np.deg2rad(0.3))
        try:
            tri = forward_intersection(frames, nobs, K, cfg)
            geo = backward_intersection(tri.map_points, nquery, K, init, cfg)
        except MonolocError as e:
            failures += 1
            if keep_records:
                records.append({"trial": t, "failed": True, "error": type(e).__name__})
            continue
        e = log_se3(scene.query_pose.inverse() @ geo.estimate.pose)
        sig = np.sqrt(np.maximum(np.diag(geo.estimate.covariance), 0.0))
        in_p = np.abs(e[:3]) <= 1.96 * sig[:3]
        in_r = np.abs(e[3:]) <= 1.96 * sig[3:]
        hits_p += int(in_p.sum())
        hits_r += int(in_r.sum())
        checks += 3
        if keep_records:
            records.append({
                "trial": t,
                "failed": False,
                "pos_error": [float(x) for x in e[:3]],
                "rot_error": [float(x) for x in e[3:]],
                "sigma": [float(x) for x in sig],
                "inside_pos": [bool(b) for b in in_p],
                "inside_rot": [bool(b) for b in in_r],
                "pos_error_norm": float(np.linalg.norm(e[:3])),
                "rot_error_angle": float(misalignment_angle(
                    scene.query_pose.R, geo.estimate.pose.R)),
                "sigma_iso_p": float(geo.sigma_iso_p),
                "sigma_iso_r": float(geo.sigma_iso_r),
            })
    cov_p = hits_p / checks if checks and not zero_noise else None
    cov_r = hits_r / checks if checks and not zero_noise else None
    return CoverageReport(
        trials=trials, positional_coverage=cov_p, angular_coverage=cov_r,
        failures=failures, degenerate_zero_noise=zero_noise,
        config={"pixel_sigma": noise.pixel_sigma,
                "label_pos_sigma": noise.label_pos_sigma,
                "label_rot_sigma": noise.label_rot_sigma,
                "rng_seed": noise.rng_seed,
                "points": int(len(scene.map_points)),
                "cameras": len(scene.training_poses)},
        per_trial=records)


def generate_sequence(length=50, motion="constant_velocity", seed=0,
                      query_fraction=0.2, point_count=300):
    """A dense training trajectory plus a held-out query tail.

    Returns (train_frames, train_tracks, query_frames, query_tracks, K).
    Frame timestamps encode the global frame index.
    """
    if length < 10:
        raise ValueError("length must be >= 10")
    if motion not in ("constant_velocity", "piecewise", "random_walk"):
        raise ValueError(f"unknown motion kind {motion!r}")
    rng = np.random.default_rng(seed)
    K = DEFAULT_INTRINSICS
    steps = []
    for k in range(length - 1):
        if motion == "constant_velocity":
            steps.append(np.array([0.05, 0.0, 0.0]))
        elif motion == "piecewise":
            steps.append(np.array([0.05, 0.0, 0.0]) if k < length // 2
                         else np.array([0.03, 0.03, 0.0]))
        else:
            steps.append(rng.normal(0.0, 0.02, 3) * np.array([1.0, 1.0, 0.3]))
    positions = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
    poses = [Pose(np.eye(3), p) for p in positions]

    n_query = max(6, int(round(length * query_fraction)))
    n_train = length - n_query
    lo = positions[:, 0].min() - 2.0
    hi = positions[:, 0].max() + 2.0

    for _ in range(100):
        pts = np.column_stack([rng.uniform(lo, hi, point_count),
                               rng.uniform(-2, 2, point_count),
                               rng.uniform(4, 8, point_count)])
        vis = np.stack([_visible(T, pts, K)[0] for T in poses])
        if (vis[:n_train].sum(axis=0) >= 2).sum() < point_count * 0.5:
            continue
        if (vis[n_train:].sum(axis=1) < 30).any():
            continue
        train_tracks, query_tracks = [], []
        for fid, T in enumerate(poses):
            v, uv = _visible(T, pts, K)
            sink = train_tracks if fid < n_train else query_tracks
            for pid in np.nonzero(v)[0]:
                sink.append(Observation(fid, int(pid), uv[pid]))
        train_frames = [Frame(id=i, timestamp=float(i), label_pose=poses[i])
                        for i in range(n_train)]
        query_frames = [Frame(id=i, timestamp=float(i), label_pose=poses[i])
                        for i in range(n_train, length)]
        return train_frames, train_tracks, query_frames, query_tracks, K
    raise GenerationFailure("no valid sequence in 100 attempts")
