"""Ensembles of jump trajectories and their comparison to the exact evolution.

Averaging the sector projector |psi><psi| of many independent runs over a
time grid reconstructs the hybrid statistical state; the reconstruction is
compared against the deterministic integrator through the trace distance
of the effective quantum states and the total-variation distance of the
classical probabilities.

Trajectories are partitioned into fixed-size blocks stepped in lockstep
(see :mod:`.pdp`). Block boundaries and per-trajectory random streams
depend only on the master seed and trajectory index, and block results are
reduced in block order, so a report is bit-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hilbert import trace_distance
from .model import (
    EventRecord,
    HybridDensity,
    HybridModel,
    PureHybridState,
    classical_probabilities,
    effective_quantum_state,
)
from .pdp import (
    BLOCK_SIZE,
    Trajectory,
    TrajectoryConfig,
    _steps_for,
    build_pilot,
    build_tables,
    simulate_block,
)

__all__ = [
    "EnsembleConfig",
    "EventStatistics",
    "EnsembleReport",
    "run_ensemble",
    "compare_to_master",
    "event_statistics",
]

HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    trajectory: TrajectoryConfig
    grid: tuple[float, ...]
    workers: int = 1

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValidationError("n_traj must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be positive")
        dt = self.trajectory.dt
        snapped = []
        for t in self.grid:
            step = int(round(float(t) / dt))
            if step < 0 or step * dt > self.trajectory.t_max * (1 + 1e-12):
                raise ValidationError(f"grid time {t} outside [0, t_max]")
            snapped.append(step)
        steps = tuple(sorted(set(snapped)))
        if not steps:
            raise ValidationError("grid must contain at least one time")
        object.__setattr__(self, "grid", tuple(s * dt for s in steps))
        object.__setattr__(self, "_grid_steps", steps)

    @property
    def grid_steps(self) -> tuple[int, ...]:
        return self._grid_steps


@dataclass
class EventStatistics:
    """First-event and inter-event time statistics over an ensemble."""

    bin_edges: np.ndarray  # (HISTOGRAM_BINS + 1,)
    first_event_times: dict  # (from, to) -> sorted ndarray of times
    first_event_hist: dict  # (from, to) -> (HISTOGRAM_BINS,) counts
    inter_event_hist: np.ndarray  # (HISTOGRAM_BINS,) counts, all channels pooled
    channel_counts: np.ndarray  # (m, m) event totals, zero diagonal
    n_traj: int


@dataclass
class EnsembleReport:
    """Averaged states on the grid plus event statistics for one ensemble."""

    grid: tuple[float, ...]
    averaged: list  # (t, HybridDensity)
    events: list  # EventRecord, sorted by (traj_id, t)
    event_histograms: EventStatistics
    channel_counts: np.ndarray
    n_traj: int
    seed: int
    comparison: list | None = None


def _event_stats_from_tuples(raw_events, m: int, n_traj: int, t_max: float) -> EventStatistics:
    edges = np.linspace(0.0, t_max, HISTOGRAM_BINS + 1)
    counts = np.zeros((m, m), dtype=np.int64)
    first_times: dict = {}
    inter: list = []
    last_time: dict = {}
    for tid, t, fa, ta in raw_events:
        counts[fa - 1, ta - 1] += 1
        prev = last_time.get(tid)
        if prev is None:
            first_times.setdefault((fa, ta), []).append(t)
        else:
            inter.append(t - prev)
        last_time[tid] = t
    first_sorted = {ch: np.sort(np.asarray(ts)) for ch, ts in first_times.items()}
    first_hist = {
        ch: np.histogram(ts, bins=edges)[0] for ch, ts in first_sorted.items()
    }
    inter_hist = np.histogram(np.asarray(inter), bins=edges)[0]
    return EventStatistics(
        bin_edges=edges,
        first_event_times=first_sorted,
        first_event_hist=first_hist,
        inter_event_hist=inter_hist,
        channel_counts=counts,
        n_traj=n_traj,
    )


def event_statistics(trajectories: list[Trajectory], m: int | None = None, t_max: float | None = None) -> EventStatistics:
    """Event statistics for explicit trajectories.

    ``m`` and ``t_max`` default to the largest sector index seen and the
    final time of the first trajectory.
    """
    if not trajectories:
        raise ValidationError("event_statistics needs at least one trajectory")
    raw = []
    max_sector = 1
    for traj in trajectories:
        last = 0.0
        prev_to = traj.initial.alpha
        for ev in traj.events:
            if not ev.t > last:
                raise ValidationError(
                    f"trajectory {traj.traj_id}: event times not strictly increasing"
                )
            if ev.from_alpha != prev_to:
                raise ValidationError(
                    f"trajectory {traj.traj_id}: event chain broken at t={ev.t}"
                )
            last = ev.t
            prev_to = ev.to_alpha
            raw.append((traj.traj_id, ev.t, ev.from_alpha, ev.to_alpha))
            max_sector = max(max_sector, ev.from_alpha, ev.to_alpha)
        max_sector = max(max_sector, traj.initial.alpha, traj.final.alpha)
    if m is None:
        m = max_sector
    if t_max is None:
        t_max = trajectories[0].final.t
    raw.sort(key=lambda e: (e[0], e[1]))
    return _event_stats_from_tuples(raw, m, len(trajectories), t_max)


def _block_task(args):
    (model, cfg_traj, initial, pilot, first, count, grid_steps) = args
    tables = build_tables(model, cfg_traj.dt)
    return simulate_block(
        tables,
        pilot,
        initial,
        cfg_traj,
        first_traj=first,
        n_traj=count,
        grid_steps=grid_steps,
    )


def run_ensemble(
    model: HybridModel, initial: PureHybridState, cfg: EnsembleConfig
) -> EnsembleReport:
    """Run ``cfg.n_traj`` trajectories and average them on the sample grid.

    At each grid time the averaged sector blocks are the mean of the
    trajectories' current projectors |psi><psi| placed in their current
    classical sector. Deterministic for a given master seed, independent
    of ``cfg.workers``.
    """
    if initial.alpha > model.m:
        raise ValidationError(f"initial sector {initial.alpha} outside 1..{model.m}")
    if initial.psi.shape[0] != model.n:
        raise ValidationError(
            f"initial state dimension {initial.psi.shape[0]} != model dimension {model.n}"
        )
    traj_cfg = cfg.trajectory
    tables = build_tables(model, traj_cfg.dt)
    n_steps = _steps_for(traj_cfg, initial.t)
    for step in cfg.grid_steps:
        if step > n_steps:
            raise ValidationError(f"grid step {step} beyond final step {n_steps}")
    pilot = build_pilot(tables, initial.psi, initial.alpha, n_steps)
    grid_steps = np.asarray(cfg.grid_steps, dtype=np.int64)

    blocks = []
    first = 0
    while first < cfg.n_traj:
        count = min(BLOCK_SIZE, cfg.n_traj - first)
        blocks.append((model, traj_cfg, initial, pilot, first, count, grid_steps))
        first += count

    if cfg.workers > 1 and len(blocks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_block_task, blocks))
    else:
        results = [_block_task(b) for b in blocks]

    # deterministic indexed reduction: block order, never completion order
    grid_acc = np.zeros((grid_steps.size, model.m, model.n, model.n), dtype=np.complex128)
    raw_events: list = []
    for res in results:
        grid_acc += res.grid_acc
        raw_events.extend(res.events)
    raw_events.sort(key=lambda e: (e[0], e[1]))

    averaged = []
    for gi, t in enumerate(cfg.grid):
        averaged.append((t, HybridDensity.from_blocks(grid_acc[gi] / cfg.n_traj, check=False)))

    stats = _event_stats_from_tuples(raw_events, model.m, cfg.n_traj, traj_cfg.t_max)
    events = [
        EventRecord(t=t, from_alpha=fa, to_alpha=ta, traj_id=tid)
        for tid, t, fa, ta in raw_events
    ]
    return EnsembleReport(
        grid=cfg.grid,
        averaged=averaged,
        events=events,
        event_histograms=stats,
        channel_counts=stats.channel_counts,
        n_traj=cfg.n_traj,
        seed=traj_cfg.seed,
    )


def compare_to_master(
    report: EnsembleReport, master_run: list[tuple[float, HybridDensity]]
) -> list[tuple[float, float, float]]:
    """Per-grid-time distances between an ensemble average and the exact run.

    Returns ``(t, trace_distance, tv_distance)`` rows: trace distance of
    the effective quantum states, total-variation distance of the
    classical probability vectors. Grids must match.
    """
    master_map = {round(t, 12): rho for t, rho in master_run}
    rows = []
    for t, rho_ens in report.averaged:
        rho_master = master_map.get(round(t, 12))
        if rho_master is None:
            raise ValidationError(f"master run has no snapshot at grid time {t}")
        dist = trace_distance(
            effective_quantum_state(rho_ens), effective_quantum_state(rho_master)
        )
        p_ens = classical_probabilities(rho_ens)
        p_master = classical_probabilities(rho_master)
        tv = 0.5 * float(np.sum(np.abs(p_ens - p_master)))
        rows.append((t, float(dist), tv))
    report.comparison = rows
    return rows
