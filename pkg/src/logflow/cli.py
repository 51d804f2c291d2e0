"""Command-line entry point.

One binary, one subcommand per module::

    logflow flow run --config cfg.json [--check]
    logflow heat solve --config cfg.json
    logflow expander shoot --n 1 --a -0.1 --rmax 2.0 --out dir
    logflow expander newton --config cfg.json
    logflow expander certify --input snapshot.snap
    logflow legendre transform --input u.snap --output ustar.snap
    logflow legendre check-dual --trajectory rundir
    logflow mcf reconstruct --trajectory rundir --seeds seeds.json
    logflow analyze blowdown --config cfg.json
    logflow analyze decay --trajectory rundir --order 3
    logflow analyze plane --trajectory rundir
    logflow analyze condition --input u.snap --lambda 0.5 --Lambda 2.0
    logflow emit rundir

Configs are JSON or ``dotted.key = value`` text; ``{"preset": "<name>"}``
pulls a named experiment.  Exit codes: 0 success, 2 configuration error,
3 numerical abort, 4 threshold failure in ``--check`` mode.  The environment
variable ``LOGFLOW_THREADS`` sizes the worker pool when several configs are
given; each run writes into its own directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, expander, legendre, mcf
from .config import ExperimentConfig, load_config
from .errors import (AbortedNonConvex, ConfigError, LogFlowError, MissingArtifact)
from .experiments import run_pipeline
from .flow import MonitorRecord, Trajectory
from .snapshots import read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4


# ---------------------------------------------------------------------------
# artifact directory helpers
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(outdir: Path) -> None:
    entries = []
    for p in sorted(outdir.iterdir()):
        if p.name == "manifest.json" or p.is_dir():
            continue
        entries.append({"name": p.name, "bytes": p.stat().st_size,
                        "sha256": _sha256(p)})
    manifest = {"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "files": entries}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _write_monitors(outdir: Path, monitors) -> None:
    with open(outdir / "monitors.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MonitorRecord.COLUMNS)
        for rec in monitors:
            writer.writerow([f"{v:.17g}" for v in rec.as_row()])


def _snapshot_name(idx: int, t) -> str:
    tag = "final" if t is None else f"{t:.12g}".replace(".", "p").replace("-", "m")
    return f"snapshot_{idx:04d}_t{tag}.snap"


def persist_run(outdir: Path, cfg: ExperimentConfig, report: dict,
                artifacts: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2,
                                                   sort_keys=True))
    traj = artifacts.get("trajectory")
    tau = float(cfg.flow.get("tau", 1.0))
    if traj is not None:
        _write_monitors(outdir, traj.monitors)
        for k, (t, u) in enumerate(traj.snapshots):
            write_snapshot(outdir / _snapshot_name(k, t), u, t=t, tau=tau,
                           fmt=cfg.snapshot_format)
    for k, (t, u) in enumerate(artifacts.get("snapshots", [])):
        write_snapshot(outdir / f"aux_{_snapshot_name(k, t)}", u, t=t, tau=tau,
                       fmt=cfg.snapshot_format)
    prof = artifacts.get("profile")
    if prof is not None:
        with open(outdir / "profile.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["r", "u", "du", "d2u"])
            for row in zip(prof.r, prof.u, prof.du, prof.d2u):
                writer.writerow([f"{v:.17g}" for v in row])
    paths = artifacts.get("paths")
    if paths is not None:
        _write_paths_csv(outdir / "paths.csv", paths, report)
    fits = artifacts.get("ratefits")
    if fits:
        (outdir / "ratefit.json").write_text(json.dumps(
            [f.to_dict() for f in fits], indent=2))
    # wall-clock figures live in the manifest, never in the report, so that
    # identical configs reproduce identical reports
    persisted = {k: v for k, v in report.items() if k != "runtime_s"}
    (outdir / "report.json").write_text(json.dumps(persisted, indent=2,
                                                   sort_keys=True))
    _write_manifest(outdir)


def _write_paths_csv(path: Path, paths, report: dict) -> None:
    n = paths[0].positions.shape[1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        head = (["path", "t"] + [f"r{i + 1}" for i in range(n)]
                + [f"F{i + 1}" for i in range(2 * n)])
        writer.writerow(head)
        for p_idx, p in enumerate(paths):
            for k in range(len(p.times)):
                row = [p_idx, f"{p.times[k]:.17g}"]
                row += [f"{v:.17g}" for v in p.positions[k]]
                row += [f"{v:.17g}" for v in p.F[k]]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# trajectory directory loading
# ---------------------------------------------------------------------------

def load_trajectory_dir(path) -> tuple[Trajectory, float]:
    """Rebuild (trajectory, tau) from a persisted run directory."""
    path = Path(path)
    if not path.is_dir():
        raise MissingArtifact(f"{path} is not a run directory")
    snaps = []
    tau = None
    for p in sorted(path.glob("snapshot_*.snap")):
        u, head = read_snapshot(p)
        snaps.append((head["t"], u))
        tau = head.get("tau", tau)
    if not snaps:
        raise MissingArtifact(f"no snapshots found in {path}")
    snaps.sort(key=lambda s: s[0])
    from .flow import FlowState, Frozen
    state = FlowState(u=snaps[-1][1], t=snaps[-1][0],
                      tau=1.0 if tau is None else tau, boundary=Frozen())
    return Trajectory(state=state, snapshots=snaps), (1.0 if tau is None else tau)


# ---------------------------------------------------------------------------
# tidy plot data
# ---------------------------------------------------------------------------

def emit_plotdata(artifact_dir) -> Path:
    """Long-format CSV (quantity, t, value) from a run directory."""
    outdir = Path(artifact_dir)
    monitors = outdir / "monitors.csv"
    ratefit = outdir / "ratefit.json"
    report = outdir / "report.json"
    if not outdir.is_dir() or not (monitors.exists() or report.exists()):
        raise MissingArtifact(f"{artifact_dir} has no monitors.csv or report.json")
    target = outdir / "plotdata.csv"
    rows = []
    if monitors.exists():
        with open(monitors, newline="") as f:
            for rec in csv.DictReader(f):
                t = rec["t"]
                for key in ("lambda_min", "lambda_max", "grad_sq_window",
                            "d3_norm", "residual"):
                    rows.append((key, t, rec[key]))
    if ratefit.exists():
        for fit in json.loads(ratefit.read_text()):
            for t, v in zip(fit["times"], fit["values"]):
                rows.append((fit["quantity"], f"{t:.17g}", f"{v:.17g}"))
    if report.exists():
        rep = json.loads(report.read_text())
        if "errors" in rep and "times" in rep:
            for t, v in zip(rep["times"], rep["errors"]):
                rows.append(("blowdown_error", f"{t:.17g}", f"{v:.17g}"))
        if "max_gradient" in rep:
            for t, v in zip(rep["times"], rep["max_gradient"]):
                rows.append(("max_gradient", f"{t:.17g}", f"{v:.17g}"))
    with open(target, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["quantity", "t", "value"])
        writer.writerows(rows)
    return target


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _run_configs(config_paths, check: bool, outdir_flag: str | None) -> int:
    cfgs = []
    for p in config_paths:
        cfg = load_config(p)
        if outdir_flag:
            cfg.outdir = outdir_flag if len(config_paths) == 1 else str(
                Path(outdir_flag) / Path(str(p)).stem)
        cfgs.append(cfg)
    workers = int(os.environ.get("LOGFLOW_THREADS", "1"))
    status = EXIT_OK
    if workers > 1 and len(cfgs) > 1:
        import concurrent.futures as fut
        with fut.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one_worker, [c.to_dict() for c in cfgs],
                                    [check] * len(cfgs)))
        status = max(results, default=EXIT_OK)
    else:
        for cfg in cfgs:
            status = max(status, _run_one(cfg, check))
    return status


def _run_one_worker(cfg_dict: dict, check: bool) -> int:
    return _run_one(ExperimentConfig.from_dict(cfg_dict), check)


def _run_one(cfg: ExperimentConfig, check: bool) -> int:
    outdir = Path(cfg.outdir)
    try:
        report, artifacts = run_pipeline(cfg)
    except AbortedNonConvex as exc:
        outdir.mkdir(parents=True, exist_ok=True)
        if exc.state is not None:
            write_snapshot(outdir / "last_good.snap", exc.state.u,
                           t=exc.state.t, tau=exc.state.tau)
        (outdir / "report.json").write_text(json.dumps(
            {"error": str(exc), "aborted": True}, indent=2))
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    persist_run(outdir, cfg, report, artifacts)
    print(json.dumps({k: v for k, v in report.items()
                      if not isinstance(v, (list, dict))}, indent=2))
    if check and not report.get("passed", False):
        print("threshold check failed", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _cmd_expander_shoot(args) -> int:
    prof = expander.radial_shoot(args.n, args.a, args.rmax)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "profile.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["r", "u", "du", "d2u"])
        for row in zip(prof.r, prof.u, prof.du, prof.d2u):
            writer.writerow([f"{v:.17g}" for v in row])
    print(f"profile written to {outdir / 'profile.csv'}")
    return EXIT_OK


def _cmd_expander_certify(args) -> int:
    u, head = read_snapshot(args.input)
    rep = expander.certify(u)
    out = Path(args.output or (Path(args.input).with_suffix(".certification.json")))
    out.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_legendre_transform(args) -> int:
    u, head = read_snapshot(args.input)
    star = legendre.legendre_transform(u)
    write_snapshot(args.output, star, t=head.get("t"), tau=head.get("tau"))
    print(f"conjugate written to {args.output}")
    return EXIT_OK


def _cmd_legendre_checkdual(args) -> int:
    traj, tau = load_trajectory_dir(args.trajectory)
    if len(traj.snapshots) < 3:
        raise ConfigError("need at least three snapshots for the duality check")
    res = legendre.dual_flow_check(traj.snapshots[-3:])
    print(json.dumps({"dual_residual": res}, indent=2))
    return EXIT_OK


def _cmd_mcf_reconstruct(args) -> int:
    traj, tau = load_trajectory_dir(args.trajectory)
    seeds = json.loads(Path(args.seeds).read_text())
    paths = mcf.integrate_particles(traj, seeds, t_start=args.t_start)
    rep = mcf.verify_mcf(paths, traj)
    outdir = Path(args.trajectory)
    _write_paths_csv(outdir / "paths.csv", paths, {})
    (outdir / "mcf_report.json").write_text(json.dumps({
        "max_deviation": rep.max_deviation,
        "max_tangential": rep.max_tangential,
        "max_normal": rep.max_normal,
        "per_path": rep.per_path}, indent=2))
    print(json.dumps({"max_deviation": rep.max_deviation,
                      "tangential_ratio": rep.tangential_ratio}, indent=2))
    return EXIT_OK


def _cmd_analyze_decay(args) -> int:
    traj, tau = load_trajectory_dir(args.trajectory)
    fit = analysis.fit_decay(traj, order=args.order)
    out = Path(args.trajectory) / "ratefit.json"
    out.write_text(json.dumps([fit.to_dict()], indent=2))
    print(json.dumps(fit.to_dict(), indent=2))
    return EXIT_OK


def _cmd_analyze_plane(args) -> int:
    traj, tau = load_trajectory_dir(args.trajectory)
    rep = analysis.plane_convergence(traj, window_half=args.window)
    out = Path(args.trajectory) / "plane_report.json"
    out.write_text(json.dumps(rep.to_dict(), indent=2))
    print(json.dumps({k: v for k, v in rep.to_dict().items()
                      if not isinstance(v, list)}, indent=2))
    return EXIT_OK


def _cmd_analyze_condition(args) -> int:
    u, head = read_snapshot(args.input)
    rep = analysis.check_condition_B(u, args.lam, args.Lam)
    defect = None
    try:
        defect = analysis.check_condition_A(u)
    except LogFlowError:
        pass
    out = {"condition_B": rep.to_dict(), "condition_A_defect": defect}
    print(json.dumps(out, indent=2))
    return EXIT_OK if rep.passed else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logflow",
                                     description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    top = parser.add_subparsers(dest="command", required=True)

    def config_runner(sub, names):
        for name in names:
            p = sub.add_parser(name)
            p.add_argument("--config", nargs="+", required=True)
            p.add_argument("--check", action="store_true",
                           help="exit 4 when a frozen threshold fails")
            p.add_argument("--outdir", default=None)

    flow = top.add_parser("flow").add_subparsers(dest="sub", required=True)
    config_runner(flow, ["run"])

    heat_p = top.add_parser("heat").add_subparsers(dest="sub", required=True)
    config_runner(heat_p, ["solve"])

    exp = top.add_parser("expander").add_subparsers(dest="sub", required=True)
    shoot = exp.add_parser("shoot")
    shoot.add_argument("--n", type=int, required=True)
    shoot.add_argument("--a", type=float, required=True)
    shoot.add_argument("--rmax", type=float, required=True)
    shoot.add_argument("--out", default="out")
    config_runner(exp, ["newton"])
    cert = exp.add_parser("certify")
    cert.add_argument("--input", required=True)
    cert.add_argument("--output", default=None)

    leg = top.add_parser("legendre").add_subparsers(dest="sub", required=True)
    tr = leg.add_parser("transform")
    tr.add_argument("--input", required=True)
    tr.add_argument("--output", required=True)
    cd = leg.add_parser("check-dual")
    cd.add_argument("--trajectory", required=True)

    mc = top.add_parser("mcf").add_subparsers(dest="sub", required=True)
    rec = mc.add_parser("reconstruct")
    rec.add_argument("--trajectory", required=True)
    rec.add_argument("--seeds", required=True)
    rec.add_argument("--t-start", type=float, default=None)

    an = top.add_parser("analyze").add_subparsers(dest="sub", required=True)
    config_runner(an, ["blowdown"])
    dec = an.add_parser("decay")
    dec.add_argument("--trajectory", required=True)
    dec.add_argument("--order", type=int, default=3)
    pl = an.add_parser("plane")
    pl.add_argument("--trajectory", required=True)
    pl.add_argument("--window", type=float, default=2.0)
    cond = an.add_parser("condition")
    cond.add_argument("--input", required=True)
    cond.add_argument("--lambda", dest="lam", type=float, required=True)
    cond.add_argument("--Lambda", dest="Lam", type=float, required=True)

    em = top.add_parser("emit")
    em.add_argument("artifact_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("flow", "heat") or (
                args.command == "expander" and args.sub == "newton") or (
                args.command == "analyze" and args.sub == "blowdown"):
            return _run_configs(args.config, args.check, args.outdir)
        if args.command == "expander" and args.sub == "shoot":
            return _cmd_expander_shoot(args)
        if args.command == "expander" and args.sub == "certify":
            return _cmd_expander_certify(args)
        if args.command == "legendre" and args.sub == "transform":
            return _cmd_legendre_transform(args)
        if args.command == "legendre" and args.sub == "check-dual":
            return _cmd_legendre_checkdual(args)
        if args.command == "mcf":
            return _cmd_mcf_reconstruct(args)
        if args.command == "analyze" and args.sub == "decay":
            return _cmd_analyze_decay(args)
        if args.command == "analyze" and args.sub == "plane":
            return _cmd_analyze_plane(args)
        if args.command == "analyze" and args.sub == "condition":
            return _cmd_analyze_condition(args)
        if args.command == "emit":
            emit_plotdata(args.artifact_dir)
            print(f"plot data written to {Path(args.artifact_dir) / 'plotdata.csv'}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AbortedNonConvex as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LogFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    parser.error(f"unhandled command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
