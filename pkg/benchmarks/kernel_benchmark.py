"""Compare the compiled kernels against the plain-numpy fallback.

Run:  python benchmarks/kernel_benchmark.py [--points N] [--repeats R]

The compiled path is what `import monoloc` picks by default when numba is
installed; MONOLOC_NO_NUMBA=1 selects the fallback at import time.  Here both
are loaded side by side so a single process can time them.
"""
import argparse
import time

import numpy as np

from monoloc import kernels
from monoloc.lie import so3_exp
from monoloc.simulate import generate_scene


def build_problem(points, seed=0):
    scene = generate_scene(point_count=points, camera_count=4, seed=seed)
    rng = np.random.default_rng(seed + 1)
    qid = scene.query_frame_id
    train = [o for o in scene.visibility if o.frame_id != qid]
    query = [o for o in scene.visibility if o.frame_id == qid]
    Rs = np.stack([T.R for T in scene.training_poses])
    ps = np.stack([T.p for T in scene.training_poses])
    by_point = {}
    for o in train:
        by_point.setdefault(o.point_id, []).append(o)
    point_ids = sorted(by_point)
    pt_start = np.zeros(len(point_ids) + 1, dtype=np.int64)
    cam_idx, uv = [], []
    for j, pid in enumerate(point_ids):
        obs = sorted(by_point[pid], key=lambda o: o.frame_id)
        pt_start[j + 1] = pt_start[j] + len(obs)
        cam_idx.extend(o.frame_id for o in obs)
        uv.extend(o.pixel + rng.normal(0, 1.0, 2) for o in obs)
    tri_args = (Rs, ps, pt_start, np.asarray(cam_idx, dtype=np.int64),
                np.asarray(uv), scene.intrinsics.fx, scene.intrinsics.fy,
                scene.intrinsics.cx, scene.intrinsics.cy, 1.0, 30, 1e-10)

    X = np.stack([scene.map_points[o.point_id] for o in query])
    quv = np.stack([o.pixel + rng.normal(0, 1.0, 2) for o in query])
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    R0 = scene.query_pose.R @ so3_exp(axis * np.deg2rad(1.0))
    p0 = scene.query_pose.p + rng.normal(0, 0.03, 3)
    pose_args = (X, quv, R0, p0, scene.intrinsics.fx, scene.intrinsics.fy,
                 scene.intrinsics.cx, scene.intrinsics.cy, 1.0, 50, 1e-9, 1e-4)
    return tri_args, pose_args


def bench(fn, args, repeats):
    fn(*args)  # warm-up (and JIT compile for the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=500)
    ap.add_argument("--repeats", type=int, default=50)
    args = ap.parse_args()

    if not kernels.USE_NUMBA:
        print("numba backend unavailable; only the numpy path is timed")
        backends = {"numpy": (kernels._np_triangulate, kernels._np_solve_pose)}
    else:
        backends = {
            "numba": kernels._build_numba(),
            "numpy": (kernels._np_triangulate, kernels._np_solve_pose),
        }

    tri_args, pose_args = build_problem(args.points)
    print(f"{args.points} points, 4 cameras, {args.repeats} repeats\n")
    rows = {}
    for name, (tri, solve) in backends.items():
        t_tri = bench(tri, tri_args, args.repeats)
        t_pose = bench(solve, pose_args, args.repeats)
        rows[name] = (t_tri, t_pose)
        print(f"{name:>6}  triangulate {1e3 * t_tri:8.3f} ms   "
              f"solve_pose {1e3 * t_pose:8.3f} ms")
    if len(rows) == 2:
        print(f"\nspeedup (numpy/numba): "
              f"triangulate {rows['numpy'][0] / rows['numba'][0]:.1f}x, "
              f"solve_pose {rows['numpy'][1] / rows['numba'][1]:.1f}x")


if __name__ == "__main__":
    main()
