"""End-to-end CLI behavior: files, exit codes, determinism, degenerate skips."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from mvg import cli
from mvg import dataset as ds


def _write_scene(path: Path, scene_dict: dict) -> Path:
    path.write_text(json.dumps(scene_dict))
    return path


@pytest.fixture()
def small_scene_cfg(tmp_path) -> Path:
    scene = ds.default_scene(frames=5, samples_per_curve=10)
    return _write_scene(tmp_path / "scene_cfg.json", ds.scene_to_dict(scene))


# ---------------------------------------------------------------------------
# generate


def test_generate_default_layout(small_dataset_dir):
    assert (small_dataset_dir / "scene.json").is_file()
    assert (small_dataset_dir / "samples3d.jsonl").is_file()
    views = sorted((small_dataset_dir / "views").glob("frame_*.jsonl"))
    assert len(views) == 5
    header = json.loads(views[0].read_text().splitlines()[0])
    assert header["dropped_behind"] == 0
    assert header["dropped_out_of_frame"] == 0
    assert header["samples"] == 60  # 5 curves x 12 samples, nothing dropped


def test_generate_missing_scene_exits_2(tmp_path, capsys):
    rc = cli.main(["generate", "--scene", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_generate_bad_scene_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    rc = cli.main(["generate", "--scene", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_generate_single_frame(tmp_path, small_scene_cfg):
    out = tmp_path / "one"
    rc = cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out), "--frames", "1"])
    assert rc == 0
    assert len(list((out / "views").glob("frame_*.jsonl"))) == 1


def test_generate_deterministic(tmp_path, small_scene_cfg):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out1)]) == 0
    assert cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out2)]) == 0
    assert (out1 / "samples3d.jsonl").read_bytes() == (out2 / "samples3d.jsonl").read_bytes()
    for f in range(5):
        a = (out1 / "views" / f"frame_{f:03d}.jsonl").read_bytes()
        b = (out2 / "views" / f"frame_{f:03d}.jsonl").read_bytes()
        assert a == b


# ---------------------------------------------------------------------------
# verify


def test_verify_pass_and_report(small_dataset_dir):
    rc = cli.main(["verify", str(small_dataset_dir), "--views", "0,2"])
    assert rc == 0
    rep = json.loads((small_dataset_dir / "report.json").read_text())
    assert rep["pass"] is True
    names = {q["name"] for q in rep["quantities"]}
    assert {"proj.kappa", "recon.Gamma", "recon.tau", "recon.Kdot"} <= names


def test_verify_third_view(small_dataset_dir):
    rc = cli.main(["verify", str(small_dataset_dir), "--views", "0,2,3"])
    assert rc == 0
    rep = json.loads((small_dataset_dir / "report.json").read_text())
    names = {q["name"] for q in rep["quantities"]}
    assert {"transfer.gamma", "transfer.kappa", "transfer.kappadot"} <= names


def test_verify_report_deterministic(tmp_path, small_scene_cfg):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out1)])
    cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out2)])
    assert cli.main(["verify", str(out1), "--views", "0,2"]) == 0
    assert cli.main(["verify", str(out2), "--views", "0,2"]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_verify_bad_views_exits_2(small_dataset_dir, capsys):
    assert cli.main(["verify", str(small_dataset_dir), "--views", "0"]) == 2
    assert cli.main(["verify", str(small_dataset_dir), "--views", "a,b"]) == 2


def test_verify_missing_dataset_exits_2(tmp_path):
    assert cli.main(["verify", str(tmp_path / "missing"), "--views", "0,1"]) == 2


def test_verify_tolerance_failure_exits_1(tmp_path, small_scene_cfg):
    out = tmp_path / "bad"
    cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out)])
    view = out / "views" / "frame_000.jsonl"
    lines = view.read_text().splitlines()
    rec = json.loads(lines[10])
    rec["kappa"] += 1e-3
    lines[10] = json.dumps(rec)
    view.write_text("\n".join(lines) + "\n")
    assert cli.main(["verify", str(out), "--views", "0,2"]) == 1
    rep = json.loads((out / "report.json").read_text())
    assert rep["pass"] is False


def test_verify_degenerate_skips_counted(tmp_path):
    # a line inside the orbit plane is epipolar-tangent in every view pair:
    # every sample skips, the run still passes, --strict-degenerate fails it
    scene = ds.default_scene(frames=5, samples_per_curve=10)
    d = ds.scene_to_dict(scene)
    d["curves"] = [c for c in d["curves"] if c["kind"] == "line"]
    d["curves"][0]["params"] = {"dx": 0.5, "dy": 0.3, "dz": 0.0}
    d["curves"][0]["origin"] = [0.4, -0.2, 0.0]
    cfg = _write_scene(tmp_path / "skip.json", d)
    out = tmp_path / "skip_ds"
    assert cli.main(["generate", "--scene", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["verify", str(out), "--views", "0,2"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["counters"]["skipped_epipolar_tangency"] == 10
    assert cli.main(["verify", str(out), "--views", "0,2", "--strict-degenerate"]) == 1


def test_verify_adjacent_views_skip_ill_conditioned(dataset_dir):
    # an 18-degree baseline has one near-tangency helix sample whose
    # reconstruction system is conditioned ~1e6: skipped, run still passes
    assert cli.main(["verify", str(dataset_dir), "--views", "0,1"]) == 0
    rep = json.loads((dataset_dir / "report.json").read_text())
    assert rep["pass"] is True
    assert rep["counters"].get("skipped_ill_conditioned", 0) == 1
    # restore the acceptance report for other session-scoped consumers
    assert cli.main(["verify", str(dataset_dir), "--views", "0,10"]) == 0


def test_verify_tolerance_profiles(small_dataset_dir):
    assert cli.main(["verify", str(small_dataset_dir), "--views", "0,2", "--tol", "strict"]) == 0
    rep = json.loads((small_dataset_dir / "report.json").read_text())
    assert rep["profile"] == {"name": "strict", "tol": 1e-8}


# ---------------------------------------------------------------------------
# flow


def test_flow_pass(small_dataset_dir):
    rc = cli.main(["flow", str(small_dataset_dir), "--frame", "2"])
    assert rc == 0
    rep = json.loads((small_dataset_dir / "flow_report.json").read_text())
    assert rep["pass"] is True
    conv = {c["name"]: c for c in rep["convergence"]}
    for name in ("fixed_point_flow", "image_acceleration", "occluding_flow.sphere",
                 "occluding_gamma_tt.sphere", "occluding_flow.ellipsoid",
                 "occluding_gamma_tt.ellipsoid", "gamma_st"):
        assert name in conv
        assert 1.8 <= conv[name]["order"] <= 2.2


def test_flow_two_frames_exits_2(tmp_path, small_scene_cfg, capsys):
    out = tmp_path / "two"
    cli.main(["generate", "--scene", str(small_scene_cfg), "--out", str(out), "--frames", "2"])
    assert cli.main(["flow", str(out)]) == 2
    assert "3 frames" in capsys.readouterr().err


def test_flow_edge_frame_exits_2(small_dataset_dir):
    assert cli.main(["flow", str(small_dataset_dir), "--frame", "0"]) == 2


# ---------------------------------------------------------------------------
# plot


def test_plot_outputs(small_dataset_dir, tmp_path):
    cli.main(["verify", str(small_dataset_dir), "--views", "0,2"])
    out = tmp_path / "plots"
    rc = cli.main(["plot", str(small_dataset_dir / "report.json"), "--out", str(out)])
    assert rc == 0
    assert (out / "quantities.csv").is_file()
    assert (out / "errors.png").is_file()
    cli.main(["flow", str(small_dataset_dir), "--frame", "2"])
    rc = cli.main(["plot", str(small_dataset_dir / "flow_report.json"), "--out", str(out)])
    assert rc == 0
    assert (out / "convergence.png").is_file()


def test_plot_empty_report(tmp_path):
    rep = tmp_path / "empty.json"
    rep.write_text("{}")
    rc = cli.main(["plot", str(rep), "--out", str(tmp_path / "p")])
    assert rc == 0
    assert (tmp_path / "p" / "quantities.csv").is_file()


def test_plot_missing_report_exits_2(tmp_path):
    assert cli.main(["plot", str(tmp_path / "nope.json"), "--out", str(tmp_path / "p")]) == 2


# ---------------------------------------------------------------------------
# console entry point


def test_tilted_scene_end_to_end(tmp_path):
    # nothing assumes the default geometry: tilted orbit axis, axis offset,
    # skewed/anisotropic intrinsics, off-center orbit
    scene = ds.default_scene(frames=6, samples_per_curve=8)
    d = ds.scene_to_dict(scene)
    d["orbit"].update(
        {
            "axis": [0.2, -0.1, 1.0],
            "axis_offset": 1.2,
            "phase": 0.4,
            "center": [0.1, -0.05, 0.0],
            "radius": 11.0,
        }
    )
    d["intrinsics"].update({"alpha_u": 520.0, "alpha_v": 480.0, "skew": 1.5})
    cfg = _write_scene(tmp_path / "tilted.json", d)
    out = tmp_path / "tilted_ds"
    assert cli.main(["generate", "--scene", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["verify", str(out), "--views", "0,3,4"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["pass"] is True
    worst = max(
        q["max_rel"]
        for q in rep["quantities"]
        if q["curve"] == "all" and q["name"].startswith(("recon", "proj", "transfer"))
    )
    assert worst <= 1e-6
    assert cli.main(["flow", str(out), "--frame", "3"]) == 0
    frep = json.loads((out / "flow_report.json").read_text())
    assert frep["pass"] is True


def test_console_script_smoke(tmp_path):
    out = tmp_path / "cli_ds"
    r = subprocess.run(
        [sys.executable, "-m", "mvg.cli", "generate", "--out", str(out), "--frames", "3"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    r = subprocess.run(
        [sys.executable, "-m", "mvg.cli", "verify", str(out), "--views", "0,1"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert "PASS" in r.stdout
