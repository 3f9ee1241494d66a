"""Per-query orchestration: retrieval -> keyframes -> triangulation -> pose
solve -> motion prediction -> gate/fuse, with a sliding motion window."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LocalizationFailure, MonolocError
from .keyframes import KeyframeConfig, select_keyframes
from .locator import SolverConfig, backward_intersection, forward_intersection
from .motion import MotionWindow, fit_motion_model, gate_and_fuse
from .retrieval import RetrievalBackend, query_most_similar


@dataclass
class PipelineConfig:
    keyframe: KeyframeConfig = field(default_factory=KeyframeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    motion_window: int = 4
    bootstrap_frames: int = 4

    def __post_init__(self):
        if self.bootstrap_frames < 1:
            raise ValueError("bootstrap_frames must be >= 1")


class Localizer:
    """Stateful sequence localizer; one instance per query sequence."""

    def __init__(self, training_frames, training_tracks, intrinsics,
                 backend: RetrievalBackend, cfg: PipelineConfig = None):
        self.training_frames = list(training_frames)
        self.training_tracks = list(training_tracks)
        self.K = intrinsics
        self.backend = backend
        self.cfg = cfg or PipelineConfig()
        self.window = MotionWindow(t=self.cfg.motion_window)
        self.queries_seen = 0
        self.degraded_frames = []
        self._tri_cache = {}
        self._tracks_by_frame = {}
        for o in self.training_tracks:
            self._tracks_by_frame.setdefault(o.frame_id, []).append(o)

    def _triangulate(self, keyframe_ids):
        key = tuple(keyframe_ids)
        if key in self._tri_cache:
            return self._tri_cache[key]
        frames = [fr for fr in self.training_frames if fr.id in set(keyframe_ids)]
        obs = [o for fid in keyframe_ids for o in self._tracks_by_frame.get(fid, [])]
        counts = {}
        for o in obs:
            counts[o.point_id] = counts.get(o.point_id, 0) + 1
        obs = [o for o in obs if counts[o.point_id] >= 2]
        tri = forward_intersection(frames, obs, self.K, self.cfg.solver)
        self._tri_cache[key] = tri
        return tri

    def localize_query(self, query_frame, query_tracks):
        geo = None
        geo_error = None
        try:
            seed_id = query_most_similar(self.backend, query_frame)
            kf_ids = select_keyframes(self.training_frames, seed_id,
                                      self.cfg.keyframe)
            tri = self._triangulate(kf_ids)
            init = next(fr for fr in self.training_frames
                        if fr.id == seed_id).label_pose
            geo = backward_intersection(tri.map_points, query_tracks, self.K,
                                        init, self.cfg.solver)
        except MonolocError as e:
            geo_error = e

        self.queries_seen += 1
        in_bootstrap = self.queries_seen <= self.cfg.bootstrap_frames
        motion = None
        if not in_bootstrap and len(self.window.history) >= 2:
            try:
                motion = fit_motion_model(self.window)
            except MonolocError:
                motion = None

        if geo is None and motion is None:
            raise LocalizationFailure(
                f"frame {query_frame.id}: geometric locator failed "
                f"({geo_error}) and no motion prediction available")
        if geo is None:
            result = motion.estimate
            self.degraded_frames.append(query_frame.id)
        elif motion is None:
            result = geo.estimate
        else:
            result = gate_and_fuse(geo, motion)
        result.frame_id = query_frame.id
        self.window.append(result)
        return result
