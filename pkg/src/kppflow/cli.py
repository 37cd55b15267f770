"""Command-line entry point: ``kppflow run|reproduce-all|validate``.

Exit codes: 0 success, 1 acceptance or solver failure, 2 configuration
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .acceptance import FAIL, run_all
from .cell import diffusivity_identity_check, diffusivity_sweep
from .config import ConfigError, ExperimentConfig, load_config
from .flows import SHEAR, validate_flow
from .limits import general_flow_limit_crosscheck, limit_report, shear_profile
from .simulate import ChannelDomain, TruncationWarning, measure_speed, simulate_front
from .speed import minimal_speed, speed_sweep, validate_reaction
from .sweep import WORKERS_ENV, format_number

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("kppflow")


class Outputs:
    """Writes result files into one directory and keeps the manifest in step."""

    def __init__(self, root: Path, config: dict | None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        probe = self.root / ".write-test"
        probe.write_text("")
        probe.unlink()
        # A marker left by an earlier failed run would misdescribe this one.
        (self.root / "FAILED").unlink(missing_ok=True)
        self.files: list[str] = []
        self.timings: dict[str, float] = {}
        self.plots: dict[str, str] = {}
        self.config = config
        self.started = time.perf_counter()

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if name not in self.files:
            self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def series(self, name: str, x, y, caption: str):
        lines = [f"{format_number(a)} {format_number(b)}" for a, b in zip(x, y)]
        self.write(f"plots/{name}.txt", "\n".join(lines) + "\n")
        self.plots[name] = caption

    def fail_marker(self, message: str):
        self.write("FAILED", message.rstrip() + "\n")

    def finish(self):
        if self.plots:
            self.json("plots/index.json", {k: {"file": f"{k}.txt", "caption": v}
                                           for k, v in self.plots.items()})
        entries = []
        for name in self.files:
            data = (self.root / name).read_bytes()
            entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(),
                            "bytes": len(data)})
        manifest = {
            "config": self.config,
            "versions": {"kppflow": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_times": {**self.timings, "total": time.perf_counter() - self.started},
            "files": entries,
        }
        with open(self.root / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _timed(out: Outputs, label: str, fn, *args, **kw):
    t0 = time.perf_counter()
    try:
        return fn(*args, **kw)
    finally:
        out.timings[label] = time.perf_counter() - t0


def _flow_report(u) -> dict:
    r = validate_flow(u)
    return {"kind": u.kind, "grid": list(u.grid.shape), "div_residual": r.div_residual,
            "mean_residuals": list(r.mean_residuals), "max_u_i": list(r.max_speed),
            "max_abs_u_i": list(r.max_abs_speed), "ok": r.ok}


def _mode_diffusivity(cfg: ExperimentConfig, out: Outputs):
    u = cfg.flow()
    e = cfg.direction(u.dim)
    curve = _timed(out, "diffusivity_sweep", diffusivity_sweep, u, e, cfg.amplitudes(),
                   tol=cfg.tolerances["cell"], workers=cfg.get("workers"))
    out.write("diffusivity.csv", curve.to_csv())
    out.series("D_e_over_A2", curve.column("A"), curve.column("D_e_over_A2"),
               "D_e(A)/A^2 against A")
    ids = [diffusivity_identity_check(s, u) for s in curve.results]
    out.json("diffusivity_summary.json", {"flags": curve.flags, "identities": ids})


def _mode_speed(cfg: ExperimentConfig, out: Outputs):
    u = cfg.flow()
    e = cfg.direction(u.dim)
    tol = cfg.tolerances
    curve = _timed(out, "speed_sweep", speed_sweep, u, e, cfg.amplitudes(), cfg.reaction(),
                   workers=cfg.get("workers"), lam_rtol=tol["lambda"], eigen_tol=tol["eigen"])
    out.write("speed.csv", curve.to_csv())
    out.series("c_star_over_A", curve.column("A"), curve.column("c_star_over_A"),
               "c*(A)/A against A")
    out.json("speed_summary.json", {"flags": curve.flags})


def _mode_limits(cfg: ExperimentConfig, out: Outputs):
    u = cfg.flow()
    e = cfg.direction(u.dim)
    fprime0 = cfg.reaction().fprime0
    if u.kind == SHEAR:
        alpha, axis = shear_profile(u)
        grid = cfg.get("lambda_grid")
        rep = _timed(out, "limits", limit_report, alpha, e, fprime0, axis,
                     lambda_grid=[0.0] + [x for x in grid if x > 0] if grid else None)
        out.json("limits.json", rep.to_json())
        lam, gam = zip(*rep.gamma_curve)
        out.series("gamma_curve", lam, gam, "gamma(lambda) = ||grad w0(lambda)||^2")
        out.json("limits_checks.json", {"invariants": rep.invariants, "speed_branch": rep.speed_branch})
        return
    amps = cfg.amplitudes()
    if len(amps) < 2:
        raise ConfigError("amplitudes", "general-flow limits need at least two amplitudes")
    tol = cfg.tolerances
    cells = _timed(out, "diffusivity_sweep", diffusivity_sweep, u, e, amps, tol=tol["cell"])
    speeds = _timed(out, "speed_sweep", speed_sweep, u, e, amps, cfg.reaction(),
                    lam_rtol=tol["lambda"], eigen_tol=tol["eigen"])
    out.write("diffusivity.csv", cells.to_csv())
    out.write("speed.csv", speeds.to_csv())
    out.json("crosscheck.json", general_flow_limit_crosscheck(u, e, cells, speeds).to_json())


def _mode_simulate(cfg: ExperimentConfig, out: Outputs):
    u = cfg.flow()
    e = cfg.direction(u.dim)
    axis = int(np.argmax(np.abs(e)))
    if sorted(np.abs(e)) != [0.0] * (u.dim - 1) + [1.0]:
        raise ConfigError("direction", "simulation needs e along a coordinate axis")
    sim = cfg.get("simulation", {})
    dom = ChannelDomain(int(sim.get("length_periods", 256)), int(sim.get("resolution", 16)), axis)
    spec = cfg.reaction()
    summary = []
    for A in cfg.amplitudes():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncationWarning)
            traj = _timed(out, f"simulate_A={A:g}", simulate_front, u, A, spec, dom,
                          float(sim.get("t_final", 60.0)))
        out.write(f"trajectory_A={A:g}.csv", traj.to_csv())
        out.series(f"front_A={A:g}", traj.times, traj.positions, f"front position, A={A:g}")
        fit = measure_speed(traj, float(sim.get("window_fraction", 0.75)))
        target = 2.0 * spec.fprime0**0.5 if A == 0 else minimal_speed(u, e, A, spec).c_star
        summary.append({"A": A, "measured_speed": fit.speed, "fit_residual": fit.fit_residual,
                        "minimal_speed": target, "truncated": bool(caught) or traj.truncated,
                        "clip_count": int(traj.clip_counts[-1])})
    out.json("simulate_summary.json", summary)


def _mode_validate(cfg: ExperimentConfig, out: Outputs):
    report = {}
    if "flow" in cfg.raw:
        report["flow"] = _flow_report(cfg.flow())
    rr = validate_reaction(cfg.reaction())
    report["reaction"] = {k: {"passed": c.passed, "worst_s": c.worst_s, "worst_value": c.worst_value}
                          for k, c in rr.conditions.items()}
    out.json("validation.json", report)
    ok = rr.ok and report.get("flow", {"ok": True})["ok"]
    print(json.dumps(report, indent=2))
    return EXIT_OK if ok else EXIT_FAIL


def _acceptance(out: Outputs, fast: bool, resolution: int | None) -> int:
    def show(r):
        print(r.line(), flush=True)

    results = _timed(out, "acceptance", run_all, fast=fast, resolution=resolution, report=show)
    for r in results:
        out.timings[f"criterion_{r.number}"] = r.runtime
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "name", "status", "runtime_s", "measured", "tolerance", "note"])
    for r in results:
        w.writerow([r.number, r.name, r.status, format_number(r.runtime),
                    json.dumps(r.measured, default=float), r.tolerance, r.note])
    out.write("acceptance.csv", buf.getvalue())
    out.write("acceptance.txt", "\n".join(r.line() for r in results) + "\n")
    failed = [r for r in results if r.status == FAIL]
    if failed:
        out.fail_marker("failed criteria: " + ", ".join(str(r.number) for r in failed))
    counts = {s: sum(r.status == s for r in results) for s in ("PASS", "FAIL", "SKIPPED")}
    print(f"summary: {counts['PASS']} passed, {counts['FAIL']} failed, {counts['SKIPPED']} skipped")
    return EXIT_FAIL if failed else EXIT_OK


MODE_RUNNERS = {
    "diffusivity": _mode_diffusivity,
    "speed": _mode_speed,
    "limits": _mode_limits,
    "simulate": _mode_simulate,
    "validate": _mode_validate,
}


def run_config(path, out_dir=None) -> int:
    try:
        cfg = load_config(path)
    except OSError as err:
        print(f"error: cannot read {path}: {err}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    target = out_dir or cfg.get("output_dir") or f"kppflow_out/{cfg.mode}"
    if cfg.get("seed") is not None:
        np.random.seed(cfg["seed"])
    try:
        out = Outputs(Path(target), cfg.raw)
    except OSError as err:
        print(f"error: cannot write to {target}: {err}", file=sys.stderr)
        return EXIT_IO
    code = EXIT_OK
    try:
        if cfg.mode == "reproduce-all":
            acc = cfg.get("acceptance", {})
            code = _acceptance(out, bool(acc.get("fast", False)), acc.get("resolution"))
        else:
            code = MODE_RUNNERS[cfg.mode](cfg, out) or EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        out.fail_marker(str(err))
        code = EXIT_CONFIG
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except Exception as err:  # solver failure: keep partial artifacts
        log.exception("run failed")
        out.fail_marker(f"{type(err).__name__}: {err}")
        code = EXIT_FAIL
    try:
        out.finish()
    except OSError as err:
        print(f"error: cannot write manifest: {err}", file=sys.stderr)
        return EXIT_IO
    print(f"outputs in {out.root}")
    return code


def reproduce_all(out_dir="kppflow_out/reproduce", fast=False, resolution=None) -> int:
    try:
        out = Outputs(Path(out_dir), {"mode": "reproduce-all", "fast": fast, "resolution": resolution})
    except OSError as err:
        print(f"error: cannot write to {out_dir}: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        code = _acceptance(out, fast, resolution)
        out.finish()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return code


def validate_command(path) -> int:
    try:
        cfg = load_config(path)
    except OSError as err:
        print(f"error: cannot read {path}: {err}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    report = {"config": "ok", "mode": cfg.mode}
    if "flow" in cfg.raw:
        report["flow"] = _flow_report(cfg.flow())
    print(json.dumps(report, indent=2))
    return EXIT_OK if report.get("flow", {"ok": True})["ok"] else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kppflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--workers", type=int, help=f"worker threads (overrides ${WORKERS_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p = sub.add_parser("reproduce-all", help="run every acceptance criterion")
    p.add_argument("--out", default="kppflow_out/reproduce")
    p.add_argument("--fast", action="store_true", help="skip the long-running criteria")
    p.add_argument("--resolution", type=int, help="force every grid to this size")
    p = sub.add_parser("validate", help="check a config and the flow it describes")
    p.add_argument("config")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers:
        os.environ[WORKERS_ENV] = str(args.workers)
    if args.command == "run":
        return run_config(args.config, args.out)
    if args.command == "reproduce-all":
        return reproduce_all(args.out, args.fast, args.resolution)
    return validate_command(args.config)


if __name__ == "__main__":
    sys.exit(main())
