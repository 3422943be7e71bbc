"""Command-line entry point.

Subcommands: ``validate`` (check a model file), ``master`` (integrate the
exact evolution), ``simulate`` (run a trajectory ensemble, write the event
log and report), ``compare`` (run both and score the agreement). Exit
status: 0 success, 1 usage or validation error, 2 numerical failure
(an invariant broke mid-run, or a compare verdict failed).

The ``--model`` argument is a file path; the bundled demo names
(``yes_no_counter``, ``three_detector``) also resolve directly. Reports
render PNG figures next to the data files unless ``--no-figures`` is given.
The worker count defaults to $HYBRIDJUMP_WORKERS, then 1; the flag wins.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import EnsembleConfig, compare_to_master, run_ensemble
from .errors import InvariantViolation, ValidationError
from .hilbert import frobenius
from .master import IntegratorConfig, integrate_master
from .model import classical_probabilities, effective_quantum_state, embed_pure
from .modelio import SCHEMA_VERSION, bundled_model_path, load_model
from .pdp import TrajectoryConfig
from .report import (
    render_compare_figure,
    render_event_figure,
    render_population_figure,
    write_events_csv,
    write_table,
)

__all__ = ["main"]

WORKERS_ENV = "HYBRIDJUMP_WORKERS"


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError(f"${WORKERS_ENV}={raw!r} is not an integer") from None
    return 1


def _resolve_model_path(spec: str) -> Path:
    path = Path(spec)
    if path.exists():
        return path
    if "/" not in spec and "\\" not in spec and not spec.endswith(".json"):
        return bundled_model_path(spec)
    raise ValidationError(f"model file not found: {spec}")


def _grid_times(t_max: float, dt: float, points: int) -> tuple[list[float], int]:
    """Uniform sample grid snapped to step boundaries; returns (times, stride)."""
    steps = int(round(t_max / dt))
    points = max(1, min(points, steps)) if steps else 1
    stride = max(1, steps // points)
    grid_steps = list(range(0, steps + 1, stride))
    if grid_steps[-1] != steps:
        grid_steps.append(steps)
    return [s * dt for s in grid_steps], stride


def _meta(args, **extra) -> dict:
    meta = {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "model": str(args.model),
    }
    meta.update(extra)
    return meta


def _out_base(out: Path) -> str:
    return str(out.with_suffix("")) if out.suffix else str(out)


def cmd_validate(args) -> int:
    model, initial = load_model(_resolve_model_path(args.model))
    print(f"model file OK: {args.model}")
    print(f"  quantum dimension n = {model.n}")
    print(f"  classical states m = {model.m}: {', '.join(model.classical.labels)}")
    print(f"  event channels (m^2 - m) = {model.event_channels}")
    for a in range(1, model.m + 1):
        print(
            f"  sector {a} ({model.classical.labels[a - 1]}): "
            f"||H|| = {frobenius(model.hamiltonian(a)):.4g}, "
            f"||Lambda|| = {frobenius(model.damping(a)):.4g}"
        )
    print(
        f"  initial state: sector {initial.alpha} "
        f"({model.classical.labels[initial.alpha - 1]})"
    )
    return 0


def cmd_master(args) -> int:
    model, initial = load_model(_resolve_model_path(args.model))
    rho0 = embed_pure(initial, m=model.m)
    steps = int(round(args.t_max / args.dt))
    _, stride = _grid_times(args.t_max, args.dt, args.grid_points)
    cfg = IntegratorConfig(dt=args.dt, t_max=args.t_max, record_every=stride)
    snapshots = integrate_master(model, rho0, cfg)

    m, n = model.m, model.n
    columns = ["t"] + [f"p_{a}" for a in range(1, m + 1)] + ["tr_rho_hat"]
    for a in range(1, m + 1):
        for i in range(n):
            for j in range(n):
                columns += [f"rho{a}_{i + 1}{j + 1}_re", f"rho{a}_{i + 1}{j + 1}_im"]
    rows = []
    for t, rho in snapshots:
        probs = classical_probabilities(rho)
        eff_trace = float(np.trace(effective_quantum_state(rho)).real)
        row = [t, *probs.tolist(), eff_trace]
        flat = rho.blocks.ravel()
        row.extend(float(v) for pair in ((z.real, z.imag) for z in flat) for v in pair)
        rows.append(row)

    out = Path(args.out)
    meta = _meta(args, dt=args.dt, t_max=args.t_max, record_every=stride, steps=steps)
    write_table(out, meta, columns, rows)
    print(f"wrote {out} ({len(rows)} snapshots)")
    if args.figures:
        fig = render_population_figure(
            _out_base(out) + "_populations.png",
            [r[0] for r in rows],
            [r[1 : 1 + m] for r in rows],
            model.classical.labels,
            f"exact evolution: {args.model}",
        )
        print(f"wrote {fig}")
    return 0


def _ensemble_config(args, t0: float) -> EnsembleConfig:
    grid, _ = _grid_times(args.t_max - t0, args.dt, args.grid_points)
    traj = TrajectoryConfig(dt=args.dt, t_max=args.t_max, seed=args.seed)
    return EnsembleConfig(
        n_traj=args.n_traj, trajectory=traj, grid=tuple(grid), workers=args.workers
    )


def cmd_simulate(args) -> int:
    model, initial = load_model(_resolve_model_path(args.model))
    cfg = _ensemble_config(args, initial.t)
    report = run_ensemble(model, initial, cfg)

    out = Path(args.out)
    base = _out_base(out)
    # worker count is scheduling, not physics: results are identical for any
    # value, and keeping it out of headers keeps equal-seed runs byte-equal
    meta = _meta(
        args,
        dt=args.dt,
        t_max=args.t_max,
        n_traj=args.n_traj,
        seed=args.seed,
        grid_points=args.grid_points,
        histogram_bins=len(report.event_histograms.bin_edges) - 1,
    )
    write_events_csv(out, meta, report.events)
    print(f"wrote {out} ({len(report.events)} events)")

    m = model.m
    columns = ["t"] + [f"p_{a}" for a in range(1, m + 1)] + ["tr_rho_hat"]
    rows = []
    for t, rho in report.averaged:
        probs = classical_probabilities(rho)
        rows.append([t, *probs.tolist(), float(np.trace(effective_quantum_state(rho)).real)])
    report_path = Path(base + "_report.txt")
    counts = report.channel_counts
    hist_meta = dict(meta)
    hist_meta["channel_counts"] = " ".join(
        f"{a + 1}->{b + 1}:{counts[a, b]}" for a in range(m) for b in range(m) if a != b
    )
    write_table(report_path, hist_meta, columns, rows)
    print(f"wrote {report_path}")

    if args.figures:
        figs = [
            render_population_figure(
                base + "_populations.png",
                [r[0] for r in rows],
                [r[1 : 1 + m] for r in rows],
                model.classical.labels,
                f"ensemble average (N={args.n_traj}): {args.model}",
            )
        ]
        if report.events:
            figs.append(
                render_event_figure(
                    base + "_events.png",
                    report,
                    model.classical.labels,
                    f"event statistics (N={args.n_traj}): {args.model}",
                )
            )
        for fig in figs:
            print(f"wrote {fig}")
    return 0


def cmd_compare(args) -> int:
    model, initial = load_model(_resolve_model_path(args.model))
    cfg = _ensemble_config(args, initial.t)
    report = run_ensemble(model, initial, cfg)

    steps = int(round(args.t_max / args.dt))
    _, stride = _grid_times(args.t_max, args.dt, args.grid_points)
    master_cfg = IntegratorConfig(dt=args.dt, t_max=args.t_max, record_every=stride)
    master_run = integrate_master(model, embed_pure(initial, m=model.m), master_cfg)
    rows = compare_to_master(report, master_run)

    threshold = 5.0 / np.sqrt(args.n_traj)
    max_trace = max(r[1] for r in rows)
    max_tv = max(r[2] for r in rows)
    passed = max_trace <= threshold and max_tv <= threshold

    out = Path(args.out)
    meta = _meta(
        args,
        dt=args.dt,
        t_max=args.t_max,
        n_traj=args.n_traj,
        seed=args.seed,
        threshold=f"{threshold:.6g}",
        max_trace_distance=f"{max_trace:.6g}",
        max_tv_distance=f"{max_tv:.6g}",
        verdict="PASS" if passed else "FAIL",
    )
    write_table(out, meta, ["t", "trace_distance", "tv_distance"], rows)
    print(f"wrote {out} ({len(rows)} grid times, {steps} steps)")
    if args.figures:
        fig = render_compare_figure(
            _out_base(out) + "_distances.png",
            rows,
            threshold,
            f"ensemble vs exact (N={args.n_traj}): {args.model}",
        )
        print(f"wrote {fig}")
    print(
        f"verdict: {'PASS' if passed else 'FAIL'} "
        f"(max trace distance {max_trace:.4g}, max TV distance {max_tv:.4g}, "
        f"threshold {threshold:.4g})"
    )
    return 0 if passed else 2


def _add_common(parser: argparse.ArgumentParser, *, ensemble: bool) -> None:
    parser.add_argument("--model", required=True, help="model file path or bundled name")
    parser.add_argument("--dt", type=float, default=1e-3, help="time step (default 1e-3)")
    parser.add_argument("--t-max", type=float, default=5.0, help="final time (default 5)")
    parser.add_argument(
        "--grid-points", type=int, default=50, help="sample grid resolution (default 50)"
    )
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument(
        "--figures",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render PNG figures next to the output (default on)",
    )
    if ensemble:
        parser.add_argument("--n-traj", type=int, default=1000, help="trajectories (default 1000)")
        parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        parser.add_argument(
            "--workers",
            type=int,
            default=None,
            help=f"worker processes (default ${WORKERS_ENV} or 1)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridjump",
        description="Hybrid quantum-classical master equation and jump-trajectory simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a model file and print a summary")
    p_validate.add_argument("--model", required=True, help="model file path or bundled name")

    p_master = sub.add_parser("master", help="integrate the exact statistical evolution")
    _add_common(p_master, ensemble=False)

    p_sim = sub.add_parser("simulate", help="run a trajectory ensemble")
    _add_common(p_sim, ensemble=True)

    p_cmp = sub.add_parser("compare", help="score ensemble average against the exact run")
    _add_common(p_cmp, ensemble=True)

    return parser


_HANDLERS = {
    "validate": cmd_validate,
    "master": cmd_master,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if getattr(args, "workers", None) is None and args.command in ("simulate", "compare"):
            args.workers = _default_workers()
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
