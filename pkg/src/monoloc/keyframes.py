"""Keyframe scoring and bidirectional greedy selection around a seed frame."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownSeed
from .lie import Pose, misalignment_angle

_THETA_FLOOR = 1e-6


@dataclass
class KeyframeConfig:
    d_m: float = 0.1            # optimal baseline, meters
    ell: float = 0.2            # baseline score width, meters
    alpha_m: float = np.deg2rad(3.0)
    delta_k: int = 100          # search range, frames
    group_size: int = 7         # seed + 3 backward + 3 forward

    def __post_init__(self):
        if min(self.d_m, self.ell, self.alpha_m) <= 0 or self.delta_k <= 0:
            raise ValueError("all KeyframeConfig fields must be positive")
        if self.group_size < 3 or self.group_size % 2 == 0:
            raise ValueError("group_size must be odd and >= 3")


def keyframe_score(T1: Pose, T2: Pose, cfg: KeyframeConfig) -> float:
    baseline = np.linalg.norm(T1.p - T2.p)
    theta = max(misalignment_angle(T1.R, T2.R), _THETA_FLOOR)
    return float(np.exp(-((baseline - cfg.d_m) ** 2) / cfg.ell**2)
                 * max(cfg.alpha_m / theta, 1.0))


def select_keyframes(training, seed_id, cfg: KeyframeConfig):
    """Greedy bidirectional expansion from the seed, alternating backward then
    forward; each step picks the best-scoring frame within delta_k of the
    current end of the chain.  Returns frame ids sorted by sequence index."""
    index_of = {fr.id: i for i, fr in enumerate(training)}
    if seed_id not in index_of:
        raise UnknownSeed(f"seed frame {seed_id} not in training set")
    seed_idx = index_of[seed_id]
    selected = [seed_idx]
    k_b = k_f = seed_idx
    backward_open = forward_open = True

    def best_in(lo, hi, anchor_idx):
        # candidates strictly exclude the anchor and anything already selected
        best_i, best_s = None, -1.0
        for i in range(lo, hi):
            if i in selected:
                continue
            s = keyframe_score(training[i].label_pose,
                               training[anchor_idx].label_pose, cfg)
            if s > best_s:
                best_i, best_s = i, s
        return best_i

    go_backward = True
    while len(selected) < cfg.group_size and (backward_open or forward_open):
        if go_backward and backward_open:
            lo, hi = max(0, k_b - cfg.delta_k), k_b
            pick = best_in(lo, hi, k_b)
            if pick is None:
                backward_open = False
            else:
                selected.append(pick)
                k_b = pick
        elif not go_backward and forward_open:
            lo, hi = k_f + 1, min(len(training), k_f + 1 + cfg.delta_k)
            pick = best_in(lo, hi, k_f)
            if pick is None:
                forward_open = False
            else:
                selected.append(pick)
                k_f = pick
        go_backward = not go_backward
    return [training[i].id for i in sorted(set(selected))]
