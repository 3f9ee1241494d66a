"""Monocular image-based localization: 6-DoF pose + 6x6 covariance from
pose-labeled training frames, fused with a constant-velocity motion model."""

from .lie import (Pose, exp_se3, log_se3, misalignment_angle, pose_distance,
                  right_jacobian_residual)
from .scene import (Frame, Intrinsics, MapPoint, Observation, PoseEstimate,
                    project)
from .locator import (GeometricEstimate, SolverConfig, TriangulationResult,
                      backward_intersection, forward_intersection,
                      isometric_sigmas)
from .keyframes import KeyframeConfig, keyframe_score, select_keyframes
from .retrieval import RetrievalBackend, build_index, query_most_similar
from .motion import (MotionPrediction, MotionWindow, fit_motion_model, fuse,
                     gate_and_fuse)
from .simulate import (CoverageReport, NoiseSpec, SyntheticScene,
                       generate_scene, generate_sequence,
                       run_coverage_experiment)
from .pipeline import Localizer, PipelineConfig

__version__ = "0.1.0"
