"""Command-line front end.

Subcommands: mc-coverage, localize, evaluate, generate, select-keyframes.
Exit codes: 0 success, 1 runtime failure, 2 bad flags or missing files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import MonolocError
from .keyframes import KeyframeConfig, select_keyframes
from .lie import misalignment_angle
from .locator import SolverConfig
from .pipeline import Localizer, PipelineConfig
from .retrieval import RetrievalBackend, build_index
from .scene import (load_descriptors, load_intrinsics, load_tracks,
                    load_trajectory, save_estimates, save_intrinsics,
                    save_tracks, save_trajectory)
from .simulate import NoiseSpec, generate_scene, generate_sequence, run_coverage_experiment


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _load_config_file(path):
    cfg = {}
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            k, v = line.split(":", 1)
            cfg[k.strip()] = v.strip()
    return cfg


def cmd_mc_coverage(args):
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 2
    scene = generate_scene(args.points, args.cameras, seed=args.seed)
    noise = NoiseSpec(pixel_sigma=args.pixel_sigma,
                      label_pos_sigma=args.label_noise_pos,
                      label_rot_sigma=np.deg2rad(args.label_noise_rot),
                      rng_seed=args.seed)
    report = run_coverage_experiment(scene, noise, args.trials)
    if report.degenerate_zero_noise:
        print("zero-noise run: errors are at solver tolerance; "
              "coverage is undefined")
    else:
        print(f"positional coverage: {100.0 * report.positional_coverage:.1f}%")
        print(f"angular coverage: {100.0 * report.angular_coverage:.1f}%")
    if report.failures:
        print(f"failed trials: {report.failures}")
    if args.out:
        _write_json(args.out, report.to_dict())
    return 0


def _remap_ids_from_timestamps(frames):
    for fr in frames:
        fr.id = int(round(fr.timestamp))
    return frames


def cmd_localize(args):
    for path in (args.train_traj, args.tracks, args.query_tracks, args.intrinsics):
        if not os.path.exists(path):
            print(f"error: missing file {path}", file=sys.stderr)
            return 2
    if (args.descriptors is None) == (not args.oracle):
        print("error: exactly one of --descriptors or --oracle is required",
              file=sys.stderr)
        return 2
    training = load_trajectory(args.train_traj)
    tracks = load_tracks(args.tracks)
    query_tracks = load_tracks(args.query_tracks)
    K = load_intrinsics(args.intrinsics)

    solver = SolverConfig()
    keyframe = KeyframeConfig()
    pcfg = PipelineConfig(keyframe=keyframe, solver=solver)
    if args.config:
        overrides = _load_config_file(args.config)
        for key, val in overrides.items():
            for target in (solver, keyframe, pcfg):
                if hasattr(target, key):
                    cast = type(getattr(target, key))
                    setattr(target, key, cast(float(val)) if cast is not str else val)

    from .scene import Frame
    qids = sorted({o.frame_id for o in query_tracks})
    query_frames = {qid: Frame(id=qid) for qid in qids}
    if args.oracle:
        if not args.query_traj or not os.path.exists(args.query_traj):
            print("error: --oracle requires --query-traj with ground-truth "
                  "query poses (MissingPose)", file=sys.stderr)
            return 2
        for fr in _remap_ids_from_timestamps(load_trajectory(args.query_traj)):
            if fr.id in query_frames:
                query_frames[fr.id].label_pose = fr.label_pose
        missing = [qid for qid in qids if query_frames[qid].label_pose is None]
        if missing:
            print(f"error: MissingPose for query frames {missing}", file=sys.stderr)
            return 2
        backend = RetrievalBackend(training_frames=training, lam=args.oracle_lambda)
    else:
        if not os.path.exists(args.descriptors) or not args.query_descriptors \
                or not os.path.exists(args.query_descriptors):
            print("error: --descriptors mode needs --descriptors and "
                  "--query-descriptors files", file=sys.stderr)
            return 2
        backend = RetrievalBackend(index=build_index(load_descriptors(args.descriptors)))
        for fid, vec in load_descriptors(args.query_descriptors):
            if fid in query_frames:
                query_frames[fid].descriptor = vec

    tracks_by_frame = {}
    for o in query_tracks:
        tracks_by_frame.setdefault(o.frame_id, []).append(o)
    loc = Localizer(training, tracks, K, backend, pcfg)
    estimates = []
    try:
        for qid in qids:
            estimates.append(loc.localize_query(query_frames[qid],
                                                tracks_by_frame[qid]))
    except MonolocError as e:
        print(f"error: localization failed at frame {qid}: {e}", file=sys.stderr)
        return 1
    save_estimates(args.out, estimates)
    counts = {}
    for e in estimates:
        counts[e.source] = counts.get(e.source, 0) + 1
    for src in sorted(counts):
        print(f"{src}: {counts[src]}")
    return 0


def cmd_evaluate(args):
    for path in (args.pred, args.gt):
        if not os.path.exists(path):
            print(f"error: missing file {path}", file=sys.stderr)
            return 2
    pred = load_trajectory(args.pred)
    gt = load_trajectory(args.gt)
    gt_by_ts = {round(fr.timestamp, 6): fr for fr in gt}
    pos_errs, ang_errs = [], []
    for fr in pred:
        key = round(fr.timestamp, 6)
        if key not in gt_by_ts:
            print(f"error: no ground-truth frame at timestamp {fr.timestamp}",
                  file=sys.stderr)
            return 2
        g = gt_by_ts[key]
        pos_errs.append(np.linalg.norm(fr.label_pose.p - g.label_pose.p))
        ang_errs.append(misalignment_angle(fr.label_pose.R, g.label_pose.R))
    med_p = float(np.median(pos_errs)) if pos_errs else 0.0
    med_a = float(np.degrees(np.median(ang_errs))) if ang_errs else 0.0
    line = f"{med_p:.3f}m, {med_a:.3f}°"
    print(line)
    if args.out:
        _write_json(args.out, {"median_positional_m": med_p,
                               "median_angular_deg": med_a})
    return 0


def cmd_generate(args):
    try:
        bundle = generate_sequence(args.length, args.motion, args.seed)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    train_frames, train_tracks, query_frames, query_tracks, K = bundle
    os.makedirs(args.out_dir, exist_ok=True)
    save_trajectory(os.path.join(args.out_dir, "train_traj.txt"), train_frames)
    save_tracks(os.path.join(args.out_dir, "train_tracks.csv"), train_tracks)
    save_tracks(os.path.join(args.out_dir, "query_tracks.csv"), query_tracks)
    save_trajectory(os.path.join(args.out_dir, "query_gt.txt"), query_frames)
    save_intrinsics(os.path.join(args.out_dir, "intrinsics.txt"), K)
    print(f"wrote {args.out_dir}: {len(train_frames)} training frames, "
          f"{len(query_frames)} query frames")
    return 0


def cmd_select_keyframes(args):
    if not os.path.exists(args.traj):
        print(f"error: missing file {args.traj}", file=sys.stderr)
        return 2
    training = load_trajectory(args.traj)
    cfg = KeyframeConfig(d_m=args.d_m, ell=args.ell,
                         alpha_m=np.deg2rad(args.alpha_m_deg),
                         delta_k=args.delta_k, group_size=args.group_size)
    ids = select_keyframes(training, args.seed_id, cfg)
    print(" ".join(str(i) for i in ids))
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="monoloc",
        description="Monocular localization: pose + covariance from "
                    "pose-labeled training frames.")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    mc = sub.add_parser("mc-coverage", formatter_class=fmt,
                        help="Monte-Carlo covariance coverage experiment")
    mc.add_argument("--trials", type=int, default=1000, help="number of Monte-Carlo trials")
    mc.add_argument("--pixel-sigma", type=float, default=1.0, help="pixel noise std, pixels")
    mc.add_argument("--label-noise-pos", type=float, default=0.0,
                    help="training-label position noise std, meters")
    mc.add_argument("--label-noise-rot", type=float, default=0.0,
                    help="training-label rotation noise std, degrees")
    mc.add_argument("--seed", type=int, default=0, help="RNG seed (scene and noise)")
    mc.add_argument("--points", type=int, default=119, help="number of 3D points")
    mc.add_argument("--cameras", type=int, default=4, help="number of training cameras")
    mc.add_argument("--out", default=None, help="path for the JSON report (optional)")
    mc.set_defaults(func=cmd_mc_coverage)

    lo = sub.add_parser("localize", formatter_class=fmt,
                        help="localize a query sequence against training data")
    lo.add_argument("--train-traj", required=True, help="training trajectory file")
    lo.add_argument("--tracks", required=True, help="training tracks CSV")
    lo.add_argument("--query-tracks", required=True, help="query tracks CSV")
    lo.add_argument("--intrinsics", required=True, help="intrinsics file")
    lo.add_argument("--descriptors", default=None, help="training descriptor binary")
    lo.add_argument("--query-descriptors", default=None, help="query descriptor binary")
    lo.add_argument("--oracle", action="store_true",
                    help="use the pose-distance retrieval oracle instead of descriptors")
    lo.add_argument("--oracle-lambda", type=float, default=1.0,
                    help="oracle rotation weight, meters per radian")
    lo.add_argument("--query-traj", default=None,
                    help="ground-truth query trajectory (needed by --oracle)")
    lo.add_argument("--config", default=None, help="key:value config file")
    lo.add_argument("--out", required=True, help="output trajectory path")
    lo.set_defaults(func=cmd_localize)

    ev = sub.add_parser("evaluate", formatter_class=fmt,
                        help="median pose errors of a prediction vs ground truth")
    ev.add_argument("--pred", required=True, help="predicted trajectory file")
    ev.add_argument("--gt", required=True, help="ground-truth trajectory file")
    ev.add_argument("--out", default=None, help="optional JSON output path")
    ev.set_defaults(func=cmd_evaluate)

    ge = sub.add_parser("generate", formatter_class=fmt,
                        help="generate a synthetic sequence bundle")
    ge.add_argument("--length", type=int, default=50, help="total frames (training + query)")
    ge.add_argument("--motion", default="constant_velocity",
                    choices=["constant_velocity", "piecewise", "random_walk"],
                    help="trajectory motion profile")
    ge.add_argument("--seed", type=int, default=0, help="RNG seed")
    ge.add_argument("--out-dir", required=True, help="output directory")
    ge.set_defaults(func=cmd_generate)

    sk = sub.add_parser("select-keyframes", formatter_class=fmt,
                        help="inspect keyframe selection around a seed frame")
    sk.add_argument("--traj", required=True, help="training trajectory file")
    sk.add_argument("--seed-id", type=int, required=True, help="seed frame id")
    sk.add_argument("--d-m", type=float, default=0.1, help="optimal baseline, meters")
    sk.add_argument("--ell", type=float, default=0.2, help="baseline score width, meters")
    sk.add_argument("--alpha-m-deg", type=float, default=3.0,
                    help="angular proximity threshold, degrees")
    sk.add_argument("--delta-k", type=int, default=100, help="search range, frames")
    sk.add_argument("--group-size", type=int, default=7, help="keyframe group size")
    sk.set_defaults(func=cmd_select_keyframes)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MonolocError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
