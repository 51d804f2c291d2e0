"""Configuration loading, the command-line surface, artifact round trips."""

import json
from pathlib import Path

import numpy as np
import pytest

from logflow.cli import emit_plotdata, load_trajectory_dir, main
from logflow.config import ExperimentConfig, load_config, parse_keyvalue
from logflow.errors import ConfigError, MissingArtifact
from logflow.presets import experiment_preset, preset_names


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_round_trips_losslessly():
    cfg = load_config({"preset": "quadratic-exact"})
    clone = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert clone.to_dict() == cfg.to_dict()


def test_keyvalue_format():
    text = """
    # comment
    pipeline = flow
    grid.n = 1
    grid.L = 4.0
    grid.m = 33
    flow.tau = 0.5          # inline comment
    flow.t_end = 0.1
    initial.kind = quadratic
    """
    data = parse_keyvalue(text)
    cfg = ExperimentConfig.from_dict(data)
    assert cfg.flow["tau"] == 0.5
    assert cfg.grid["m"] == 33


def test_keyvalue_reports_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_keyvalue("pipeline = flow\nbroken line without equals\n")


def test_too_small_grid_rejected():
    with pytest.raises(ConfigError, match="m >= 5"):
        load_config({"pipeline": "flow", "grid": {"n": 1, "L": 1.0, "m": 3}})


def test_unknown_preset_lists_catalogue():
    with pytest.raises(ConfigError) as exc:
        experiment_preset("no-such-preset")
    for name in preset_names():
        assert name in str(exc.value)


def test_every_preset_validates():
    for name in preset_names():
        cfg = load_config({"preset": name})
        assert cfg.preset == name


# ---------------------------------------------------------------------------
# CLI round trips
# ---------------------------------------------------------------------------

def _write_cfg(tmp_path, data) -> Path:
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_flow_run_writes_artifacts(tmp_path):
    cfg = _write_cfg(tmp_path, {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.05, "snapshot_times": [0.025, 0.05]},
        "outdir": str(tmp_path / "run"),
    })
    assert main(["flow", "run", "--config", str(cfg)]) == 0
    rundir = tmp_path / "run"
    assert (rundir / "config.json").exists()
    assert (rundir / "monitors.csv").exists()
    assert (rundir / "report.json").exists()
    assert (rundir / "manifest.json").exists()
    snaps = sorted(rundir.glob("snapshot_*.snap"))
    assert len(snaps) == 2
    manifest = json.loads((rundir / "manifest.json").read_text())
    names = {e["name"] for e in manifest["files"]}
    assert "monitors.csv" in names and "report.json" in names

    traj, tau = load_trajectory_dir(rundir)
    assert tau == 1.0
    assert [t for t, _ in traj.snapshots] == [0.025, 0.05]

    emit_plotdata(rundir)
    text = (rundir / "plotdata.csv").read_text().splitlines()
    assert text[0] == "quantity,t,value"
    assert len(text) > 5


def test_flow_run_deterministic_snapshots(tmp_path):
    base = {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.05, "snapshot_times": [0.05]},
        "seed": 7,
    }
    out = []
    for tag in ("a", "b"):
        cfg = dict(base, outdir=str(tmp_path / tag))
        p = tmp_path / f"{tag}.json"
        p.write_text(json.dumps(cfg))
        assert main(["flow", "run", "--config", str(p)]) == 0
        snap = sorted((tmp_path / tag).glob("snapshot_*.snap"))[0]
        out.append(snap.read_bytes())
    assert out[0] == out[1]


def test_check_mode_exit_code(tmp_path):
    cfg = _write_cfg(tmp_path, {
        "preset": "quadratic-exact",
        "grid": {"m": 17},
        "check": {"sup_error": 1e-30},  # impossible threshold
        "outdir": str(tmp_path / "run"),
    })
    assert main(["flow", "run", "--config", str(cfg), "--check"]) == 4


def test_config_error_exit_code(tmp_path):
    cfg = _write_cfg(tmp_path, {"pipeline": "flow", "grid": {"n": 1, "L": 1.0, "m": 3}})
    assert main(["flow", "run", "--config", str(cfg)]) == 2


def test_expander_shoot_and_certify(tmp_path):
    out = tmp_path / "prof"
    assert main(["expander", "shoot", "--n", "1", "--a", "-0.1",
                 "--rmax", "2.0", "--out", str(out)]) == 0
    rows = (out / "profile.csv").read_text().splitlines()
    assert rows[0] == "r,u,du,d2u"
    assert len(rows) > 100


def test_legendre_transform_cli(tmp_path):
    from logflow.grid import BoxDomain, GridFunction
    from logflow.snapshots import write_snapshot
    dom = BoxDomain(n=1, half_width=2.0, m=33)
    u = GridFunction(dom, 0.5 * dom.axis ** 2, label="u")
    src = tmp_path / "u.snap"
    dst = tmp_path / "ustar.snap"
    write_snapshot(src, u, t=0.0, tau=1.0)
    assert main(["legendre", "transform", "--input", str(src),
                 "--output", str(dst)]) == 0
    from logflow.snapshots import read_snapshot
    star, _ = read_snapshot(dst)
    grids = star.domain.meshgrid()
    assert np.max(np.abs(star.values - 0.5 * grids[0] ** 2)) < 1e-10


def test_analyze_condition_cli(tmp_path):
    from logflow.grid import BoxDomain, GridFunction
    from logflow.snapshots import write_snapshot
    dom = BoxDomain(n=1, half_width=2.0, m=33)
    u = GridFunction(dom, 0.5 * dom.axis ** 2)
    src = tmp_path / "u.snap"
    write_snapshot(src, u)
    assert main(["analyze", "condition", "--input", str(src),
                 "--lambda", "1.0", "--Lambda", "1.0"]) == 0
    assert main(["analyze", "condition", "--input", str(src),
                 "--lambda", "2.0", "--Lambda", "3.0"]) == 4


def test_emit_requires_artifacts(tmp_path):
    with pytest.raises(MissingArtifact):
        emit_plotdata(tmp_path)


def test_mcf_reconstruct_cli(tmp_path):
    cfg = _write_cfg(tmp_path, {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.05, "store_every": 1},
        "outdir": str(tmp_path / "run"),
    })
    assert main(["flow", "run", "--config", str(cfg)]) == 0
    seeds = tmp_path / "seeds.json"
    seeds.write_text("[[0.2], [-0.3]]")
    assert main(["mcf", "reconstruct", "--trajectory", str(tmp_path / "run"),
                 "--seeds", str(seeds)]) == 0
    assert (tmp_path / "run" / "paths.csv").exists()
    assert (tmp_path / "run" / "mcf_report.json").exists()


def test_heat_solve_cli(tmp_path):
    cfg = _write_cfg(tmp_path, {
        "pipeline": "heat",
        "grid": {"n": 1, "L": 4.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 0.0, "t_end": 0.05},
        "outdir": str(tmp_path / "heat"),
    })
    assert main(["heat", "solve", "--config", str(cfg)]) == 0
    assert list((tmp_path / "heat").glob("aux_snapshot_*.snap"))


def test_frozen_boundary_selectable(tmp_path):
    cfg = _write_cfg(tmp_path, {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 17},
        "initial": {"kind": "quadratic", "A": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.01},
        "boundary": "frozen",
        "outdir": str(tmp_path / "frozen"),
    })
    assert main(["flow", "run", "--config", str(cfg)]) == 0


def test_numerical_abort_exit_code_and_last_good_state(tmp_path):
    # a reckless safety factor forces step rejection; with no halvings allowed
    # the run aborts, exits 3 and persists the last accepted state
    cfg = _write_cfg(tmp_path, {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.12, "width": 0.7},
        "flow": {"tau": 1.0, "t_end": 1.0, "stepper": "euler",
                 "safety": 200.0, "max_halvings": 0},
        "outdir": str(tmp_path / "abort"),
    })
    assert main(["flow", "run", "--config", str(cfg)]) == 3
    assert (tmp_path / "abort" / "last_good.snap").exists()
    report = json.loads((tmp_path / "abort" / "report.json").read_text())
    assert report["aborted"]


def test_nonconvex_initial_data_exits_numerical(tmp_path):
    # amplitude 0.9 makes the data concave at the origin: tau = 1 cannot start
    cfg = _write_cfg(tmp_path, {
        "pipeline": "flow",
        "grid": {"n": 1, "L": 3.0, "m": 33},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.9, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.1},
        "outdir": str(tmp_path / "bad"),
    })
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["flow", "run", "--config", str(cfg)]) == 3
