"""Command line entry point: ``sqglab {run,sweep,verify,stats}``.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical failure,
3 verification failure.  ``SQGLAB_OUTPUT_ROOT`` prefixes relative output
directories.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump_config, load_config
from .diagnostics import ConvergenceReport, average_convergence, delta_report, epsilon_estimate, support_envelope
from .experiments import MIN_WINDOW_SAMPLES
from .integrator import NumericalFailure, simulate
from .spectral import SpectralField, norm

log = logging.getLogger("sqglab")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
OUTPUT_ENV = "SQGLAB_OUTPUT_ROOT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, payload) -> None:
    # json uses repr for floats, so every value keeps full precision
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


def output_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override or cfg.output_dir)
    root = os.environ.get(OUTPUT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window_convergence(traj, window):
    i0, i1 = traj.window(window)
    if i1 - i0 + 1 < MIN_WINDOW_SAMPLES:
        return ConvergenceReport(np.empty(0), math.nan, math.nan, False)
    return average_convergence(traj.column("gradsq")[i0:i1 + 1], traj.times[i0:i1 + 1])


def run_summary(cfg: RunConfig, solver_cfg, traj, field0) -> dict:
    st = traj.final_state
    summary = {
        "config": cfg.to_dict(),
        "t_final": st.t,
        "steps": st.steps,
        "substeps": st.substeps,
        "energy_residual_abs": st.abs_residual,
        "injected": st.injected,
        "relative_energy_residual": st.abs_residual / st.injected if st.injected > 0 else None,
    }
    if len(traj) >= 2:
        est = epsilon_estimate(traj, cfg.nu, cfg.discard_fraction)
        conv = _window_convergence(traj, cfg.discard_fraction)
        summary.update(
            epsilon=est.value, epsilon_limsup=est.limsup, window=[est.t0, est.t1],
            converged=conv.converged, cesaro_oscillation=conv.oscillation,
        )
    if cfg.equation == "sqg" and cfg.gamma > 0 and len(traj) >= 2:
        f = solver_cfg.forcing or SpectralField.zeros(solver_cfg.grid)
        th0 = field0 or SpectralField.zeros(solver_cfg.grid)
        sup = support_envelope(traj, f, th0, cfg.gamma, cfg.discard_fraction)
        summary["support"] = {
            "maxima": sup.maxima, "bounds": sup.bounds, "h12_average": sup.h12_average,
            "h12_bound": sup.h12_bound, "violations": sup.violations,
        }
    if cfg.equation == "nse":
        rep = delta_report(traj, cfg.nu)
        summary["delta"] = {
            "delta0": float(rep.delta[0]),
            "max_excess_over_delta_plus0": float(np.max(rep.delta - rep.delta_plus0)),
            "max_excess_over_envelope": float(np.max(rep.delta - rep.bound)) if rep.delta[0] > 0 else None,
            "mu_min": float(np.min(rep.mu)),
        }
    return summary


def _save_snapshot(out: Path, exc: NumericalFailure) -> Path:
    path = out / "snapshot.npz"
    snap = exc.snapshot
    if snap is not None:
        np.savez(path, t=snap.t, coeffs=snap.field.coeffs)
    return path


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    base = Path(args.config).resolve().parent
    out = output_dir(cfg, args.output_dir)
    solver_cfg, field0 = cfg.build(base)
    try:
        traj = simulate(solver_cfg, field0)
    except NumericalFailure as exc:
        path = _save_snapshot(out, exc)
        print(f"numerical failure: {exc}; snapshot written to {path}", file=sys.stderr)
        return EXIT_NUMERICAL
    (out / "config.yaml").write_text(dump_config(cfg))
    traj.to_csv(out / "trajectory.csv")
    write_json(out / "summary.json", run_summary(cfg, solver_cfg, traj, field0))
    if not args.no_plots:
        from .plotting import plot_trajectory

        plot_trajectory(traj, out / "trajectory.png")
    print(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .experiments import kolmogorov_divergence, sqg_nu_sweep

    cfg = load_config(args.config)
    if not cfg.nus:
        raise ConfigError("nus", "required for a sweep")
    base = Path(args.config).resolve().parent
    out = output_dir(cfg, args.output_dir)
    mode = cfg.mode or ("kolmogorov" if cfg.equation == "nse" else "sqg")
    if mode == "kolmogorov":
        if cfg.forcing.kind != "kolmogorov":
            raise ConfigError("forcing.kind", "kolmogorov sweeps need kind 'kolmogorov'")
        w = cfg.forcing.wavenumber
        result = kolmogorov_divergence(
            cfg.grid, cfg.nus, mode=w[0] if len(w) == 1 else tuple(w), amplitude=cfg.forcing.amplitude,
            dt=cfg.dt, t_end=cfg.t_end, sample_stride=cfg.sample_stride,
            discard_fraction=cfg.discard_fraction, jobs=args.jobs,
        )
    else:
        solver_cfg, field0 = cfg.build(base)
        result = sqg_nu_sweep(solver_cfg, cfg.nus, field0, jobs=args.jobs)
    (out / "config.yaml").write_text(dump_config(cfg))
    for entry, traj in zip(result.entries, result.trajectories):
        if traj is None:
            continue
        sub = out / f"nu_{entry.nu:.6g}"
        sub.mkdir(exist_ok=True)
        traj.to_csv(sub / "trajectory.csv")
    write_json(out / "sweep.json", result.to_dict())
    if not args.no_plots:
        from .plotting import plot_sweep

        plot_sweep(result, out / "sweep.png")
    if all(traj is None for traj in result.trajectories):
        print("every run in the sweep failed numerically", file=sys.stderr)
        return EXIT_NUMERICAL
    print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    report = run_suite(args.suite)
    ok = all(c["passed"] for checks in report.values() for c in checks)
    payload = {"suite": args.suite, "passed": ok, "results": report}
    text = json.dumps(_jsonable(payload), indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    print(text)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_stats(args) -> int:
    from .statistics import (
        CylindricalFunctional,
        check_report,
        dissipation_balance_defect,
        energy_condition_c,
        stationarity_integrands,
        stationarity_residual,
    )

    cfg = load_config(args.config)
    if cfg.equation != "sqg":
        raise ConfigError("equation", "statistics checks apply to sqg runs")
    base = Path(args.config).resolve().parent
    out = output_dir(cfg, args.output_dir)
    solver_cfg, field0 = cfg.build(base)
    functional = CylindricalFunctional.quadratic(solver_cfg.grid, args.modes, args.eps)
    ig, ob = stationarity_integrands(functional, cfg.nu, cfg.gamma, solver_cfg.forcing)
    try:
        traj = simulate(solver_cfg, field0, observers=ob, integrands=ig)
    except NumericalFailure as exc:
        path = _save_snapshot(out, exc)
        print(f"numerical failure: {exc}; snapshot written to {path}", file=sys.stderr)
        return EXIT_NUMERICAL
    window = cfg.discard_fraction
    i0, i1 = traj.window(window)
    win = [float(traj.times[i0]), float(traj.times[i1])]
    checks = []
    rep = stationarity_residual(traj)
    tol = 1e-6 * rep.psi_scale
    checks.append(check_report("stationarity_telescoping", abs(rep.defect), tol, abs(rep.defect) <= tol, [0.0, rep.horizon]))
    conv = _window_convergence(traj, window)
    if cfg.gamma > 0:
        f_l2 = norm(solver_cfg.forcing) if solver_cfg.forcing is not None else 0.0
        avg = cfg.gamma * traj.window_average("h12sq", window)
        bound = f_l2**2 / cfg.gamma
        checks.append(check_report("h12_support_average", avg, bound * 1.01, avg <= bound * 1.01, win))
        above = energy_condition_c(traj, cfg.nu, (f_l2 / cfg.gamma * 1.0001, math.inf), window)
        checks.append(check_report("support_shell_empty", above.count, 0, above.empty, win))
    full = energy_condition_c(traj, cfg.nu, (0.0, math.inf), window)
    span = win[1] - win[0]
    l2 = traj.column("l2sq")
    drift = 0.5 * (l2[i1] - l2[i0]) / span
    # the condition holds up to the L2 drift over the window
    tol_c = abs(drift) + 1e-8
    checks.append(check_report("energy_condition_c", full.value, tol_c, conv.converged and full.value <= tol_c, win))
    defect = dissipation_balance_defect(traj, cfg.nu, window)
    eps = epsilon_estimate(traj, cfg.nu, window).value
    ident = abs(defect + eps + drift)
    checks.append(check_report("dissipation_balance_identity", ident, 1e-5 * max(eps, 1e-300) + 1e-12, ident <= 1e-5 * max(eps, 1e-300) + 1e-12, win))
    checks.append(check_report("averaging_converged", conv.oscillation, 0.05 * abs(conv.mean), conv.converged, win))
    write_json(out / "statistics.json", checks)
    traj.to_csv(out / "trajectory.csv")
    if not args.no_plots:
        from .plotting import plot_trajectory

        plot_trajectory(traj, out / "trajectory.png")
    print(json.dumps(_jsonable(checks), indent=2))
    return EXIT_OK if all(c["verdict"] == "pass" for c in checks) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    p = _Parser(prog="sqglab", description="Pseudo-spectral SQG / 2D Navier-Stokes laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("config", help="YAML configuration file")
        sp.add_argument("-o", "--output-dir", help="override output_dir from the config")
        sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    sp = sub.add_parser("run", help="single simulation: trajectory CSV + summary JSON")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="viscosity sweep: SweepResult JSON + per-run CSV")
    common(sp)
    sp.add_argument("-j", "--jobs", type=int, default=1, help="concurrent runs")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("verify", help="invariant suites")
    sp.add_argument("suite", nargs="?", default="all", choices=SUITES)
    sp.add_argument("--json", help="also write the report to this file")
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("stats", help="stationary-statistics checks on one run")
    common(sp)
    sp.add_argument("--eps", type=float, default=0.1, help="mollifier width of the test functional")
    sp.add_argument("--modes", type=int, default=16, help="number of test modes")
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
