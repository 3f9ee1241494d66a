import subprocess
import sys

import pytest

from monoloc.cli import build_parser, main

RUN = [sys.executable, "-m", "monoloc.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(RUN + list(args), capture_output=True, text=True,
                          cwd=cwd)


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bundle")
    r = run_cli("generate", "--length", "30", "--motion", "constant_velocity",
                "--seed", "3", "--out-dir", str(d))
    assert r.returncode == 0, r.stderr
    return d


def test_every_flag_has_help_text():
    parser = build_parser()
    subs = parser._subparsers._group_actions[0]
    for name, sp in subs.choices.items():
        for action in sp._actions:
            assert action.help, f"{name}: {action.option_strings} lacks help"


@pytest.mark.parametrize("cmd", ["mc-coverage", "localize", "evaluate",
                                 "generate", "select-keyframes"])
def test_help_lists_flags_and_defaults(cmd):
    r = run_cli(cmd, "--help")
    assert r.returncode == 0
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices[cmd]
    for action in subs._actions:
        for flag in action.option_strings:
            assert flag in r.stdout, f"{cmd} --help missing {flag}"


def test_unknown_subcommand_exits_2():
    r = run_cli("frobnicate")
    assert r.returncode == 2


def test_mc_coverage_small_run(tmp_path):
    out = tmp_path / "report.json"
    r = run_cli("mc-coverage", "--trials", "20", "--seed", "1",
                "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert "positional coverage:" in r.stdout
    assert "angular coverage:" in r.stdout
    assert out.exists()


def test_mc_coverage_zero_trials_exits_2():
    r = run_cli("mc-coverage", "--trials", "0")
    assert r.returncode == 2
    assert "trials" in r.stderr


def test_mc_coverage_zero_noise_message():
    r = run_cli("mc-coverage", "--trials", "2", "--pixel-sigma", "0")
    assert r.returncode == 0
    assert "coverage is undefined" in r.stdout


def test_localize_and_evaluate_round_trip(bundle_dir, tmp_path):
    out = tmp_path / "est.txt"
    r = run_cli("localize",
                "--train-traj", str(bundle_dir / "train_traj.txt"),
                "--tracks", str(bundle_dir / "train_tracks.csv"),
                "--query-tracks", str(bundle_dir / "query_tracks.csv"),
                "--intrinsics", str(bundle_dir / "intrinsics.txt"),
                "--oracle", "--query-traj", str(bundle_dir / "query_gt.txt"),
                "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert out.exists() and (tmp_path / "est.json").exists()

    ev = run_cli("evaluate", "--pred", str(out),
                 "--gt", str(bundle_dir / "query_gt.txt"))
    assert ev.returncode == 0, ev.stderr
    med = float(ev.stdout.split("m,")[0])
    assert med < 0.01


def test_localize_missing_file_exits_2(bundle_dir, tmp_path):
    r = run_cli("localize",
                "--train-traj", str(bundle_dir / "nope.txt"),
                "--tracks", str(bundle_dir / "train_tracks.csv"),
                "--query-tracks", str(bundle_dir / "query_tracks.csv"),
                "--intrinsics", str(bundle_dir / "intrinsics.txt"),
                "--oracle", "--query-traj", str(bundle_dir / "query_gt.txt"),
                "--out", str(tmp_path / "o.txt"))
    assert r.returncode == 2


def test_localize_backend_flags_exclusive(bundle_dir, tmp_path):
    common = ["--train-traj", str(bundle_dir / "train_traj.txt"),
              "--tracks", str(bundle_dir / "train_tracks.csv"),
              "--query-tracks", str(bundle_dir / "query_tracks.csv"),
              "--intrinsics", str(bundle_dir / "intrinsics.txt"),
              "--out", str(tmp_path / "o.txt")]
    neither = run_cli("localize", *common)
    assert neither.returncode == 2
    both = run_cli("localize", *common, "--oracle", "--descriptors", "d.bin",
                   "--query-traj", str(bundle_dir / "query_gt.txt"))
    assert both.returncode == 2


def test_localize_oracle_needs_query_poses(bundle_dir, tmp_path):
    r = run_cli("localize",
                "--train-traj", str(bundle_dir / "train_traj.txt"),
                "--tracks", str(bundle_dir / "train_tracks.csv"),
                "--query-tracks", str(bundle_dir / "query_tracks.csv"),
                "--intrinsics", str(bundle_dir / "intrinsics.txt"),
                "--oracle", "--out", str(tmp_path / "o.txt"))
    assert r.returncode == 2
    assert "MissingPose" in r.stderr


def test_evaluate_timestamp_mismatch_exits_2(bundle_dir):
    r = run_cli("evaluate", "--pred", str(bundle_dir / "query_gt.txt"),
                "--gt", str(bundle_dir / "train_traj.txt"))
    assert r.returncode == 2


def test_generate_bad_length_exits_2(tmp_path):
    r = run_cli("generate", "--length", "3", "--out-dir", str(tmp_path / "x"))
    assert r.returncode == 2


def test_select_keyframes_output(bundle_dir):
    r = run_cli("select-keyframes", "--traj", str(bundle_dir / "train_traj.txt"),
                "--seed-id", "12")
    assert r.returncode == 0
    ids = [int(x) for x in r.stdout.split()]
    assert 12 in ids and ids == sorted(ids) and len(ids) == 7


def test_main_returns_int_in_process(tmp_path, capsys):
    rc = main(["mc-coverage", "--trials", "2", "--pixel-sigma", "0"])
    assert rc == 0
    assert "undefined" in capsys.readouterr().out


def test_config_override_applied(bundle_dir, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("group_size: 5\nhuber_delta: 2.0\n")
    out = tmp_path / "est.txt"
    r = run_cli("localize",
                "--train-traj", str(bundle_dir / "train_traj.txt"),
                "--tracks", str(bundle_dir / "train_tracks.csv"),
                "--query-tracks", str(bundle_dir / "query_tracks.csv"),
                "--intrinsics", str(bundle_dir / "intrinsics.txt"),
                "--oracle", "--query-traj", str(bundle_dir / "query_gt.txt"),
                "--config", str(cfg), "--out", str(out))
    assert r.returncode == 0, r.stderr
