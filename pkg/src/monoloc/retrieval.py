"""Nearest-neighbor retrieval over image descriptors, plus a pose-distance
oracle backend used when no descriptor network is available."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptyInput, MissingDescriptor, MissingPose
from .lie import misalignment_angle


class DescriptorIndex:
    """Exact K-D tree over descriptor vectors (Euclidean metric).

    Ties are broken by lowest frame_id so queries are deterministic.
    """

    def __init__(self, frame_ids, vectors):
        self.frame_ids = np.asarray(frame_ids, dtype=np.int64)
        self.vectors = np.asarray(vectors, dtype=float)
        self.dimension = self.vectors.shape[1]
        self._tree = cKDTree(self.vectors)

    def query(self, vector, k=1):
        """Return the k nearest (frame_id, distance) pairs, nearest first."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dimension,):
            raise DimensionMismatch(
                f"query dim {vector.shape} vs index dim {self.dimension}")
        # over-fetch so exact-distance ties can be re-ordered by frame id
        kk = min(len(self.frame_ids), max(k + 3, 8))
        dist, idx = self._tree.query(vector, k=kk)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        order = np.lexsort((self.frame_ids[idx], dist))
        picked = idx[order][:k]
        return [(int(self.frame_ids[i]), float(np.linalg.norm(self.vectors[i] - vector)))
                for i in picked]


def build_index(descriptors) -> DescriptorIndex:
    """descriptors: list of (frame_id, vector)."""
    if not descriptors:
        raise EmptyInput("no descriptors")
    dims = {len(v) for _, v in descriptors}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed descriptor dimensions {sorted(dims)}")
    ids = [fid for fid, _ in descriptors]
    vecs = [np.asarray(v, dtype=float) for _, v in descriptors]
    return DescriptorIndex(ids, vecs)


@dataclass
class RetrievalBackend:
    """Exactly one of `index` (descriptor search) or `training_frames`
    (pose-distance oracle with weight lam in meters/radian) is set."""

    index: DescriptorIndex = None
    training_frames: list = None
    lam: float = 1.0

    def __post_init__(self):
        if (self.index is None) == (self.training_frames is None):
            raise ValueError("exactly one backend variant must be active")


def query_most_similar(backend: RetrievalBackend, query) -> int:
    if backend.index is not None:
        if query.descriptor is None:
            raise MissingDescriptor(f"frame {query.id} has no descriptor")
        return backend.index.query(query.descriptor, k=1)[0][0]
    if query.label_pose is None:
        raise MissingPose(f"frame {query.id} has no pose for the oracle backend")
    qp = query.label_pose
    best_id, best_cost = None, np.inf
    for fr in backend.training_frames:
        dp = np.linalg.norm(fr.label_pose.p - qp.p)
        cost = dp + backend.lam * misalignment_angle(fr.label_pose.R, qp.R)
        if cost < best_cost or (cost == best_cost and fr.id < best_id):
            best_id, best_cost = fr.id, cost
    return best_id
