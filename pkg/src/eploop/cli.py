"""Command-line front end: figure-style experiments, CSV and SVG output.

Subcommands select the experiment; a config file supplies parameters
(the subcommand overrides the [experiment] type in the file). Sweep
points run in a thread pool; a numeric failure in one point flags that
row and leaves the others untouched. All computations are deterministic
- there is no random number generator anywhere in the pipeline, which is
what --seedless documents.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, ExperimentKind, load_config
from .control import build_linear_system, synthesize_corrected_loop
from .csvio import column, read_csv, write_csv
from .dynamics import FrameKind
from .errors import EploopError, SchemaError
from .flows import integrate_flow
from .magnus import classify_gain_mode, efficiency_eta
from .metrics import average_error, column_probabilities, time_averaged_error
from .spectral import build_spectral_frame
from .svg import render_svg
from .system import SystemParams, circular_loop, eval_path

GAMMA = 1.0  # the internal rate unit; configs are in units of Gamma


@dataclass
class ResultRecord:
    experiment: str
    inputs: dict
    scalars: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)  # name -> (header, rows)


def _sysp() -> SystemParams:
    return SystemParams.from_gamma(GAMMA)


def _loop_from(cfg: ExperimentConfig, *, alpha=None, s=None, t_f=None):
    return circular_loop(_sysp(), r0=cfg.r0,
                         alpha=cfg.alpha if alpha is None else alpha,
                         s=cfg.s if s is None else s,
                         t_f=cfg.gamma_tf if t_f is None else t_f,
                         zero_coupling=cfg.zero_coupling)


def _inputs_echo(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment.value,
        "r0": cfg.r0, "alpha": cfg.alpha, "s": cfg.s,
        "gamma_tf": cfg.gamma_tf, "zero_coupling": cfg.zero_coupling,
        "n_grid": cfg.n_grid, "jump_tol": cfg.jump_tol,
        "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol,
        "alpha_points": cfg.alpha_points,
        "durations": list(cfg.durations), "orders": list(cfg.orders),
        "max_order": cfg.max_order,
        "truncation": {
            "k": list(cfg.truncation.k), "l": list(cfg.truncation.l),
            "m": list(cfg.truncation.m), "n": list(cfg.truncation.n),
        },
    }


def run_trajectory(cfg: ExperimentConfig) -> ResultRecord:
    sysp = _sysp()
    loop = _loop_from(cfg)
    sf = build_spectral_frame(loop, sysp, n_grid=cfg.n_grid,
                              jump_tol=cfg.jump_tol)
    traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC,
                          rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
    header = ["t [1/Gamma]", "Delta [Gamma]", "g [Gamma]",
              "log10_phi2_pp", "log10_phi2_pm", "log10_phi2_mp",
              "log10_phi2_mm", "P_pp", "P_pm", "P_mp", "P_mm"]
    rows = []
    ln10 = math.log(10.0)
    for f in traj.flows:
        d, g = eval_path(loop, f.t)
        logs = f.log_abs_entries() * 2.0 / ln10  # log10 of |Phi_ij|^2
        p = column_probabilities(f).p
        rows.append([f.t, d, g,
                     logs[0, 0], logs[0, 1], logs[1, 0], logs[1, 1],
                     p[0, 0], p[0, 1], p[1, 0], p[1, 1]])
    rec = ResultRecord("trajectory", _inputs_echo(cfg))
    rec.series["timeseries"] = (header, rows)
    rec.scalars["im_lam_tf"] = float(sf.Lam[-1].imag)
    rec.scalars["eta_tf"] = efficiency_eta(sf, loop.t_f)
    rec.labels["gain_mode"] = classify_gain_mode(sf).value
    rec.labels["amplitude_columns_are_log10"] = "yes"
    return rec


def run_magnus_validation(cfg: ExperimentConfig) -> ResultRecord:
    sysp = _sysp()
    orders = sorted(set(cfg.orders))
    header = (["gamma_tf", *[f"delta_phi_order{o}" for o in orders], "status"])
    rows = []
    for t_f in cfg.durations:
        try:
            loop = _loop_from(cfg, t_f=t_f)
            sf = build_spectral_frame(loop, sysp, n_grid=cfg.n_grid,
                                      jump_tol=cfg.jump_tol)
            traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC,
                                  rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
            deltas = [time_averaged_error(traj, o, sf) for o in orders]
            rows.append([t_f, *deltas, "ok"])
        except EploopError as exc:
            rows.append([t_f, *[math.nan] * len(orders),
                         f"error: {exc}"])
    rec = ResultRecord("magnus-validate", _inputs_echo(cfg))
    rec.series["magnus_error"] = (header, rows)
    return rec


def _sweep(points, worker, threads: int):
    results = [None] * len(points)
    if threads <= 1:
        for i, p in enumerate(points):
            results[i] = worker(p)
        return results
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(worker, p): i for i, p in enumerate(points)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


def run_alpha_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultRecord:
    sysp = _sysp()
    alphas = [2.0 * math.pi * k / cfg.alpha_points
              for k in range(cfg.alpha_points)]

    def point(alpha):
        try:
            loop = _loop_from(cfg, alpha=alpha)
            sf = build_spectral_frame(loop, sysp, n_grid=cfg.n_grid,
                                      jump_tol=cfg.jump_tol)
            ebar = average_error(loop, sysp, n_grid=cfg.n_grid,
                                 jump_tol=cfg.jump_tol, rel_tol=cfg.rel_tol,
                                 abs_tol=cfg.abs_tol)
            return [alpha, ebar, float(sf.Lam[-1].imag), "ok"]
        except EploopError as exc:
            return [alpha, math.nan, math.nan, f"error: {exc}"]

    rows = _sweep(alphas, point, threads)
    rec = ResultRecord("alpha-sweep", _inputs_echo(cfg))
    rec.series["alpha_sweep"] = (
        ["alpha [rad]", "ebar", "im_lam_tf", "status"], rows)
    ok = [r for r in rows if r[3] == "ok"]
    if ok:
        worst = max(ok, key=lambda r: r[1])
        rec.scalars["alpha_worst"] = worst[0]
        rec.scalars["ebar_worst"] = worst[1]
    return rec


def run_duration_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultRecord:
    sysp = _sysp()

    def point(t_f):
        try:
            loop = _loop_from(cfg, t_f=t_f)
            sf = build_spectral_frame(loop, sysp, n_grid=cfg.n_grid,
                                      jump_tol=cfg.jump_tol)
            traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC,
                                  rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol)
            p = column_probabilities(traj.final).p
            gain_row = 0 if sf.Lam[-1].imag > 0 else 1
            leak = 1.0 - p[gain_row, gain_row]
            ebar = average_error(loop, sysp, n_grid=cfg.n_grid,
                                 jump_tol=cfg.jump_tol, rel_tol=cfg.rel_tol,
                                 abs_tol=cfg.abs_tol)
            return [t_f, ebar, leak, "ok"]
        except EploopError as exc:
            return [t_f, math.nan, math.nan, f"error: {exc}"]

    rows = _sweep(list(cfg.durations), point, threads)
    rec = ResultRecord("duration-sweep", _inputs_echo(cfg))
    rec.series["duration_sweep"] = (
        ["gamma_tf", "ebar", "gain_leak", "status"], rows)
    return rec


def run_correction(cfg: ExperimentConfig) -> ResultRecord:
    sysp = _sysp()
    base = _loop_from(cfg)
    ebar_before = average_error(base, sysp, n_grid=cfg.n_grid,
                                jump_tol=cfg.jump_tol, rel_tol=cfg.rel_tol,
                                abs_tol=cfg.abs_tol)
    corrected = synthesize_corrected_loop(
        base, sysp, max_order=cfg.max_order, truncation=cfg.truncation,
        n_grid=cfg.n_grid, jump_tol=cfg.jump_tol, svd_cutoff=cfg.svd_cutoff,
        inner_iterations=cfg.inner_iterations)
    ebar_after = average_error(corrected, sysp, n_grid=cfg.n_grid,
                               jump_tol=cfg.jump_tol, rel_tol=cfg.rel_tol,
                               abs_tol=cfg.abs_tol)

    y_base = build_linear_system(base, sysp, None, cfg.truncation, order=1,
                                 n_grid=cfg.n_grid, jump_tol=cfg.jump_tol).y
    y_corr = build_linear_system(base, sysp, None, cfg.truncation, order=1,
                                 prior=list(corrected.controls),
                                 n_grid=cfg.n_grid, jump_tol=cfg.jump_tol).y

    ts = np.linspace(0.0, base.t_f, 513)
    db, gb = eval_path(base, ts)
    dc, gc = eval_path(corrected, ts)
    field_rows = [[t, dbv, gbv, dcv, gcv]
                  for t, dbv, gbv, dcv, gcv in zip(ts, db, gb, dc, gc)]

    coeff_rows = []
    for fc in corrected.controls:
        for family, dct in (("c_delta", fc.c_delta), ("d_delta", fc.d_delta),
                            ("c_g", fc.c_g), ("d_g", fc.d_g)):
            for idx in sorted(dct):
                coeff_rows.append([family, float(fc.order), float(idx),
                                   dct[idx]])

    rec = ResultRecord("correct", _inputs_echo(cfg))
    rec.series["fields"] = (
        ["t [1/Gamma]", "Delta_base [Gamma]", "g_base [Gamma]",
         "Delta_corrected [Gamma]", "g_corrected [Gamma]"], field_rows)
    rec.series["coefficients"] = (
        ["family", "order", "index", "value [Gamma]"], coeff_rows)
    rec.scalars["ebar_uncorrected"] = ebar_before
    rec.scalars["ebar_corrected"] = ebar_after
    rec.scalars["ebar_reduction_factor"] = (
        ebar_before / ebar_after if ebar_after > 0 else math.inf)
    rec.scalars["y1_norm_base"] = float(np.linalg.norm(y_base))
    rec.scalars["y1_norm_corrected"] = float(np.linalg.norm(y_corr))
    return rec


def run(cfg: ExperimentConfig, threads: int = 1) -> ResultRecord:
    """Dispatch one experiment; deterministic for a fixed config."""
    if cfg.experiment is ExperimentKind.TRAJECTORY:
        return run_trajectory(cfg)
    if cfg.experiment is ExperimentKind.MAGNUS_VALIDATION:
        return run_magnus_validation(cfg)
    if cfg.experiment is ExperimentKind.ALPHA_SWEEP:
        return run_alpha_sweep(cfg, threads)
    if cfg.experiment is ExperimentKind.DURATION_SWEEP:
        return run_duration_sweep(cfg, threads)
    if cfg.experiment is ExperimentKind.CORRECTION:
        return run_correction(cfg)
    raise SchemaError(f"unhandled experiment {cfg.experiment}")


def emit_csv(rec: ResultRecord, out_dir: str) -> list[str]:
    """One file per array output plus one scalars file; returns paths."""
    paths = []
    for name, (header, rows) in rec.series.items():
        path = os.path.join(out_dir, f"{rec.experiment}_{name}.csv")
        paths.append(write_csv(path, header, rows))
    meta_rows = [[k, v] for k, v in sorted(rec.scalars.items())]
    meta_rows += [[k, v] for k, v in sorted(rec.labels.items())]
    path = os.path.join(out_dir, f"{rec.experiment}_scalars.csv")
    paths.append(write_csv(path, ["name", "value"], meta_rows))
    return paths


def _cmd_experiment(kind: str, args) -> int:
    cfg = load_config(args.config, experiment=kind)
    if args.out:
        cfg = ExperimentConfig(**{**cfg.__dict__, "out_dir": args.out})
    rec = run(cfg, threads=args.threads)
    paths = emit_csv(rec, cfg.out_dir)
    for k, v in sorted(rec.scalars.items()):
        print(f"{k} = {v:.6g}")
    for k, v in sorted(rec.labels.items()):
        print(f"{k} = {v}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_plot(args) -> int:
    header, rows = read_csv(args.csv)
    rows = [r for r in rows if not any(isinstance(c, str) and
                                       str(c).startswith("error") for c in r)]
    x = [float(v) for v in column(header, rows, args.x)]
    ys = {}
    for name in args.y.split(","):
        name = name.strip()
        ys[name] = [float(v) for v in column(header, rows, name)]
    svg = render_svg(x, ys, title=args.title or "", x_label=args.x,
                     y_label=args.y, log_y=args.logy)
    out = args.out_file
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w") as fh:
        fh.write(svg)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eploop",
        description="Dissipative two-mode loops around an exceptional point: "
                    "exact propagation, perturbative validation, and "
                    "corrected control loops.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_experiment(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sweep points")
        p.add_argument("--seedless", action="store_true",
                       help="documents that no RNG exists; always true")
        return p

    add_experiment("trajectory", "time series of one loop")
    add_experiment("magnus-validate",
                   "time-averaged truncation error vs duration")
    add_experiment("alpha-sweep", "non-reciprocity error vs starting angle")
    add_experiment("duration-sweep", "non-reciprocity error vs duration")
    add_experiment("correct", "synthesize a corrected loop")

    p = sub.add_parser("plot", help="render a CSV column pair as SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", required=True, help="x column name")
    p.add_argument("--y", required=True, help="comma-separated y columns")
    p.add_argument("--logy", action="store_true")
    p.add_argument("--title", default="")
    p.add_argument("--out-file", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return _cmd_plot(args)
        return _cmd_experiment(args.command, args)
    except EploopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
