"""Dataset types (intrinsics, frames, observations, map points) and file I/O.

File formats (documented in README):
  trajectory  : "timestamp tx ty tz qx qy qz qw" per line, '#' comments
  tracks      : CSV with header "frame_id,point_id,u,v"
  intrinsics  : single line "fx fy cx cy" or key:value lines
  descriptors : little-endian binary, magic "GLDC", u32 version=1,
                u32 count, u32 dim, then count * (u64 frame_id, dim*f32)
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DuplicateObservation, IoError, NonPositiveDepth,
                     NonUnitQuaternion, ParseError)
from .lie import Pose, quat_to_rot, rot_to_quat

DESCRIPTOR_MAGIC = b"GLDC"
DESCRIPTOR_VERSION = 1


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def K(self) -> np.ndarray:
        """3x4 projection-ready matrix [K3 | 0]."""
        K = np.zeros((3, 4))
        K[0, 0], K[1, 1], K[2, 2] = self.fx, self.fy, 1.0
        K[0, 2], K[1, 2] = self.cx, self.cy
        return K


@dataclass
class Frame:
    id: int
    timestamp: Optional[float] = None
    label_pose: Optional[Pose] = None
    descriptor: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Observation:
    frame_id: int
    point_id: int
    pixel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=float))


@dataclass
class MapPoint:
    point_id: int
    position: np.ndarray
    observations: list = field(default_factory=list)
    mean_residual: float = 0.0


@dataclass
class PoseEstimate:
    pose: Pose
    covariance: np.ndarray
    source: str  # geometric | motion | fused
    frame_id: int = -1


def project(T: Pose, X, K: Intrinsics) -> np.ndarray:
    """Pinhole projection of world point X through camera at pose T."""
    Y = T.R.T @ (np.asarray(X, dtype=float) - T.p)
    if Y[2] <= 1e-9:
        raise NonPositiveDepth(f"depth {Y[2]} not strictly positive")
    return np.array([K.fx * Y[0] / Y[2] + K.cx, K.fy * Y[1] / Y[2] + K.cy])


def load_trajectory(path) -> list:
    frames = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise IoError(str(e)) from e
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ParseError(path, line_no, f"expected 8 fields, got {len(parts)}")
        try:
            vals = [float(x) for x in parts]
        except ValueError as e:
            raise ParseError(path, line_no, str(e)) from e
        ts, tx, ty, tz, qx, qy, qz, qw = vals
        norm = np.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
        if not (0.999 <= norm <= 1.001):
            raise NonUnitQuaternion(f"{path}:{line_no}: quaternion norm {norm}")
        qx, qy, qz, qw = qx / norm, qy / norm, qz / norm, qw / norm
        pose = Pose(quat_to_rot(qx, qy, qz, qw), np.array([tx, ty, tz]))
        frames.append(Frame(id=len(frames), timestamp=ts, label_pose=pose))
    frames.sort(key=lambda fr: fr.timestamp)
    for i, fr in enumerate(frames):
        fr.id = i
    return frames


def save_trajectory(path, frames):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for fr in frames:
                q = rot_to_quat(fr.label_pose.R)
                p = fr.label_pose.p
                ts = fr.timestamp if fr.timestamp is not None else float(fr.id)
                f.write(f"{ts:.6f} {p[0]:.9f} {p[1]:.9f} {p[2]:.9f} "
                        f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}\n")
    except OSError as e:
        raise IoError(str(e)) from e


def load_tracks(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise IoError(str(e)) from e
    if not lines or lines[0].strip().replace(" ", "") != "frame_id,point_id,u,v":
        raise ParseError(path, 1, 'expected header "frame_id,point_id,u,v"')
    seen = set()
    obs = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(path, line_no, f"expected 4 fields, got {len(parts)}")
        try:
            fid, pid = int(parts[0]), int(parts[1])
            u, v = float(parts[2]), float(parts[3])
        except ValueError as e:
            raise ParseError(path, line_no, str(e)) from e
        key = (fid, pid)
        if key in seen:
            raise DuplicateObservation(f"{path}:{line_no}: duplicate {key}")
        seen.add(key)
        obs.append(Observation(fid, pid, np.array([u, v])))
    return obs


def save_tracks(path, observations):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("frame_id,point_id,u,v\n")
            for o in observations:
                f.write(f"{o.frame_id},{o.point_id},{o.pixel[0]:.6f},{o.pixel[1]:.6f}\n")
    except OSError as e:
        raise IoError(str(e)) from e


def load_intrinsics(path) -> Intrinsics:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln.split("#", 1)[0].strip() for ln in f]
    except OSError as e:
        raise IoError(str(e)) from e
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ParseError(path, 1, "empty intrinsics file")
    if ":" in lines[0]:
        kv = {}
        for line_no, ln in enumerate(lines, start=1):
            if ":" not in ln:
                raise ParseError(path, line_no, "expected key:value")
            k, v = ln.split(":", 1)
            kv[k.strip()] = float(v.strip())
        try:
            return Intrinsics(kv["fx"], kv["fy"], kv["cx"], kv["cy"],
                              width=int(kv["width"]) if "width" in kv else None,
                              height=int(kv["height"]) if "height" in kv else None)
        except KeyError as e:
            raise ParseError(path, 1, f"missing key {e}") from e
    parts = " ".join(lines).split()
    if len(parts) < 4:
        raise ParseError(path, 1, "expected fx fy cx cy")
    vals = [float(x) for x in parts[:4]]
    return Intrinsics(*vals)


def save_intrinsics(path, K: Intrinsics):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"fx: {K.fx:.6f}\nfy: {K.fy:.6f}\ncx: {K.cx:.6f}\ncy: {K.cy:.6f}\n")
        if K.width is not None:
            f.write(f"width: {K.width}\nheight: {K.height}\n")


def save_estimates(path, estimates):
    """Write trajectory lines plus a sibling .json with covariances and sigmas."""
    from .locator import isometric_sigmas

    frames = [Frame(id=e.frame_id, timestamp=float(e.frame_id), label_pose=e.pose)
              for e in estimates]
    save_trajectory(path, frames)
    records = []
    for e in estimates:
        sp, sr = isometric_sigmas(e.covariance)
        records.append({
            "frame_id": e.frame_id,
            "source": e.source,
            "covariance": [float(x) for x in np.asarray(e.covariance).reshape(-1)],
            "sigma_iso_p": float(sp),
            "sigma_iso_r": float(sr),
        })
    sibling = os.path.splitext(str(path))[0] + ".json"
    try:
        with open(sibling, "w", encoding="utf-8", newline="\n") as f:
            json.dump(records, f, indent=1, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise IoError(str(e)) from e


def load_descriptors(path):
    """Read the descriptor binary format; returns list of (frame_id, vector)."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(blob) < 16 or blob[:4] != DESCRIPTOR_MAGIC:
        raise ParseError(path, 1, "bad descriptor magic")
    version, count, dim = struct.unpack_from("<III", blob, 4)
    if version != DESCRIPTOR_VERSION:
        raise ParseError(path, 1, f"unsupported version {version}")
    rec = 8 + 4 * dim
    if len(blob) != 16 + count * rec:
        raise ParseError(path, 1, "truncated descriptor file")
    out = []
    off = 16
    for _ in range(count):
        (fid,) = struct.unpack_from("<Q", blob, off)
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=off + 8).astype(np.float64)
        out.append((int(fid), vec))
        off += rec
    return out


def save_descriptors(path, entries):
    """entries: iterable of (frame_id, vector); all vectors same dimension."""
    entries = [(int(fid), np.asarray(v, dtype=np.float32)) for fid, v in entries]
    dim = len(entries[0][1]) if entries else 0
    with open(path, "wb") as f:
        f.write(DESCRIPTOR_MAGIC)
        f.write(struct.pack("<III", DESCRIPTOR_VERSION, len(entries), dim))
        for fid, vec in entries:
            if len(vec) != dim:
                raise ValueError("inconsistent descriptor dimension")
            f.write(struct.pack("<Q", fid))
            f.write(vec.astype("<f4").tobytes())
