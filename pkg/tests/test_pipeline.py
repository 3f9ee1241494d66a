import numpy as np
import pytest

from monoloc.errors import LocalizationFailure
from monoloc.lie import misalignment_angle
from monoloc.pipeline import Localizer, PipelineConfig
from monoloc.retrieval import RetrievalBackend
from monoloc.scene import Observation


def _split_tracks(query_tracks):
    by_frame = {}
    for o in query_tracks:
        by_frame.setdefault(o.frame_id, []).append(o)
    return by_frame


def _run_sequence(bundle, mangle=None):
    train_frames, train_tracks, query_frames, query_tracks, K = bundle
    backend = RetrievalBackend(training_frames=train_frames)
    loc = Localizer(train_frames, train_tracks, K, backend)
    by_frame = _split_tracks(query_tracks)
    results = []
    for fr in query_frames:
        tracks = by_frame[fr.id]
        if mangle is not None:
            tracks = mangle(fr.id, tracks)
        results.append(loc.localize_query(fr, tracks))
    return loc, results


def test_sequence_localization_accuracy(cv_sequence):
    train_frames, _, query_frames, _, _ = cv_sequence
    loc, results = _run_sequence(cv_sequence)
    gt = {fr.id: fr.label_pose for fr in query_frames}
    pos_errs, ang_errs = [], []
    for r in results:
        pos_errs.append(np.linalg.norm(r.pose.p - gt[r.frame_id].p))
        ang_errs.append(misalignment_angle(r.pose.R, gt[r.frame_id].R))
    assert np.median(pos_errs) < 1e-3
    assert np.median(ang_errs) < 1e-3
    assert all(r.source in ("geometric", "motion", "fused") for r in results)
    assert [r.frame_id for r in results] == [fr.id for fr in query_frames]
    assert not loc.degraded_frames


def test_bootstrap_frames_skip_motion(cv_sequence):
    _, results = _run_sequence(cv_sequence)
    # motion fitting only starts after the bootstrap window
    assert all(r.source == "geometric" for r in results[:4])


def test_covariances_well_formed(cv_sequence):
    _, results = _run_sequence(cv_sequence)
    for r in results:
        C = np.asarray(r.covariance)
        assert C.shape == (6, 6)
        assert np.allclose(C, C.T, atol=1e-12)
        assert (np.linalg.eigvalsh(C) > -1e-15).all()


def test_geometric_failure_falls_back_to_motion(cv_sequence):
    train_frames, _, query_frames, _, _ = cv_sequence
    victim = query_frames[6].id

    def mangle(fid, tracks):
        if fid != victim:
            return tracks
        # remap all point ids so no map-point match survives
        return [Observation(o.frame_id, o.point_id + 10_000, o.pixel)
                for o in tracks]

    loc, results = _run_sequence(cv_sequence, mangle)
    by_id = {r.frame_id: r for r in results}
    assert by_id[victim].source == "motion"
    assert loc.degraded_frames == [victim]


def test_failure_without_history_raises(cv_sequence):
    train_frames, train_tracks, query_frames, query_tracks, K = cv_sequence
    backend = RetrievalBackend(training_frames=train_frames)
    loc = Localizer(train_frames, train_tracks, K, backend)
    first = query_frames[0]
    garbage = [Observation(first.id, o.point_id + 10_000, o.pixel)
               for o in _split_tracks(query_tracks)[first.id]]
    with pytest.raises(LocalizationFailure):
        loc.localize_query(first, garbage)


def test_triangulation_cache_reused(cv_sequence):
    loc, _ = _run_sequence(cv_sequence)
    # consecutive queries share keyframe groups, so the cache stays small
    assert 1 <= len(loc._tri_cache) <= 10


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(bootstrap_frames=0)
