"""Piecewise deterministic jump trajectories for hybrid models.

A single run carries a pure state (psi, alpha). Each time step of size dt:
compute the rate lambda = <psi, Lambda_alpha psi>; draw a uniform u; if
u < lambda*dt a classical event fires - the target beta is drawn with
probability ||g_{beta alpha} psi||^2 / lambda and psi collapses to the
normalized image g_{beta alpha} psi - otherwise psi flows through the
contraction exp(-i H_alpha dt - Lambda_alpha dt / 2) and is renormalized.
Events are stamped at the end of the step interval, so event times are
strictly increasing multiples of dt.

Randomness is counter-based and per-trajectory (:class:`TrajectoryRandom`),
which makes every run bit-reproducible in isolation and lets the block
engine below step thousands of trajectories in lockstep without any shared
RNG state. The engine exploits three structural facts: trajectories that
have not yet jumped all ride one shared deterministic path; sectors with
zero damping can never fire again; sectors with zero damping and zero
Hamiltonian are inert, so their occupants freeze.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ValidationError
from .hilbert import as_state, frobenius, hermitian_eigen, mat_exp
from .model import EventRecord, HybridModel, PureHybridState

__all__ = [
    "TrajectoryConfig",
    "Trajectory",
    "TrajectoryRandom",
    "jump_rate",
    "jump_distribution",
    "post_jump_state",
    "deterministic_step",
    "run_trajectory",
]

# dt * ||Lambda|| guard: the per-step Bernoulli model degrades as lambda*dt grows
STEP_GUARD_WARN = 0.1
STEP_GUARD_REJECT = 1.0

# pre-normalization squared norm must stay in (0, 1 + 1e-9]^2
_DRIFT_BOUND = (1.0 + 1e-9) ** 2

BLOCK_SIZE = 8192  # trajectories stepped in lockstep; fixed so results never depend on workers
_CHUNK_STEPS = 2048  # uniforms buffered per trajectory per refill


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float
    t_max: float
    seed: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.t_max < 0:
            raise ValidationError(f"t_max must be nonnegative, got {self.t_max}")
        if self.t_max > 0 and self.dt > self.t_max * (1 + 1e-12):
            raise ValidationError(f"dt={self.dt} exceeds t_max={self.t_max}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if self.snapshot_every < 0:
            raise ValidationError("snapshot_every must be nonnegative")


@dataclass
class Trajectory:
    """One experimental run: its event series plus optional state snapshots."""

    traj_id: int
    initial: PureHybridState
    events: list[EventRecord]
    snapshots: list[tuple[float, PureHybridState]] | None
    final: PureHybridState


class TrajectoryRandom:
    """Two deterministic substreams of randomness for one trajectory.

    The primary stream supplies the per-step jump-test uniforms (value s
    belongs to step s, whether or not it is ever inspected); the secondary
    stream supplies one uniform per event for the jump-target draw. Both
    are Philox streams keyed by (seed, 2*traj_id) and (seed, 2*traj_id+1),
    so trajectory k of a given master seed is reproducible in isolation
    and independent of batching or worker count.
    """

    __slots__ = ("seed", "traj_id", "_primary", "_secondary")

    def __init__(self, seed: int, traj_id: int = 0):
        self.seed = int(seed)
        self.traj_id = int(traj_id)
        self._primary = None
        self._secondary = None

    def _gen(self, lane: int) -> np.random.Generator:
        key = np.array([self.seed, 2 * self.traj_id + lane], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def fill_step_uniforms(self, out: np.ndarray) -> None:
        """Fill ``out`` with the next values of the primary stream."""
        if self._primary is None:
            self._primary = self._gen(0)
        self._primary.random(out=out)

    def next_target_uniform(self) -> float:
        if self._secondary is None:
            self._secondary = self._gen(1)
        return float(self._secondary.random())


def jump_rate(model: HybridModel, psi, alpha: int) -> float:
    """Instantaneous event rate <psi, Lambda_alpha psi> (clipped at zero)."""
    vec = as_state(psi, normalized=True, name="psi")
    lam = model.damping(alpha)
    val = float(np.real(np.vdot(vec, lam @ vec)))
    return max(val, 0.0)


def jump_distribution(model: HybridModel, psi, alpha: int) -> list[tuple[int, float]]:
    """Target probabilities (beta, ||g_{beta alpha} psi||^2 / rate), beta ascending."""
    vec = as_state(psi, normalized=True, name="psi")
    rate = jump_rate(model, vec, alpha)
    if rate <= 0.0:
        raise ValidationError(f"no jump possible from sector {alpha}: zero rate")
    out = []
    for beta in range(1, model.m + 1):
        if beta == alpha:
            continue
        image = model.coupling(beta, alpha) @ vec
        out.append((beta, float(np.real(np.vdot(image, image))) / rate))
    return out


def post_jump_state(model: HybridModel, psi, alpha: int, beta: int) -> np.ndarray:
    """Collapsed state after the event alpha -> beta."""
    vec = as_state(psi, name="psi")
    image = model.coupling(beta, alpha) @ vec
    nrm = float(np.linalg.norm(image))
    if nrm == 0.0:
        raise ValidationError(f"channel {alpha}->{beta} has zero probability for this state")
    return image / nrm


def deterministic_step(model: HybridModel, psi, alpha: int, dt: float) -> np.ndarray:
    """One step of the between-events flow: contract by the sector propagator, renormalize."""
    vec = as_state(psi, normalized=True, name="psi")
    kmat = mat_exp(-1j * model.hamiltonian(alpha) * dt - 0.5 * model.damping(alpha) * dt)
    image = kmat @ vec
    nrm = float(np.linalg.norm(image))
    if not 0.0 < nrm * nrm <= _DRIFT_BOUND:
        raise InvariantViolation(f"pre-normalization norm {nrm!r} outside (0, 1 + 1e-9]")
    return image / nrm


# ---------------------------------------------------------------------------
# block engine


@dataclass
class _Tables:
    """Per-(model, dt) data the stepping kernel needs, precomputed once."""

    m: int
    n: int
    dt: float
    propagators: np.ndarray  # (m, n, n)
    lambdas: np.ndarray  # (m, n, n)
    lam_diags: list  # (n,) real diagonal when Lambda_a is exactly diagonal, else None
    couplings: np.ndarray  # (m, m, n, n)
    can_jump: np.ndarray  # (m,) bool: Lambda_a != 0
    evolving: np.ndarray  # (m,) bool: propagator != identity


def build_tables(model: HybridModel, dt: float) -> _Tables:
    """Precompute propagators and sector classification; enforce the dt guard."""
    m, n = model.m, model.n
    lam_norm = 0.0
    for a in range(m):
        vals, _ = hermitian_eigen(model.lambdas[a])
        lam_norm = max(lam_norm, float(np.max(np.abs(vals))))
    guard = lam_norm * dt
    if guard > STEP_GUARD_REJECT:
        raise ValidationError(
            f"dt too large: max ||Lambda|| * dt = {guard:.3g} exceeds {STEP_GUARD_REJECT}"
        )
    if guard > STEP_GUARD_WARN:
        warnings.warn(
            f"max ||Lambda|| * dt = {guard:.3g} above {STEP_GUARD_WARN}; "
            "jump statistics carry an O(dt) bias",
            stacklevel=2,
        )
    props = np.stack(
        [
            mat_exp(-1j * model.hamiltonians[a] * dt - 0.5 * model.lambdas[a] * dt)
            for a in range(m)
        ]
    )
    can_jump = np.array([frobenius(model.lambdas[a]) > 0.0 for a in range(m)])
    evolving = np.array(
        [can_jump[a] or frobenius(model.hamiltonians[a]) > 0.0 for a in range(m)]
    )
    lam_diags = []
    for a in range(m):
        lam = model.lambdas[a]
        off = lam - np.diag(np.diag(lam))
        lam_diags.append(np.diag(lam).real.copy() if not np.any(off != 0) else None)
    return _Tables(
        m=m,
        n=n,
        dt=dt,
        propagators=props,
        lambdas=model.lambdas,
        lam_diags=lam_diags,
        couplings=model.couplings,
        can_jump=can_jump,
        evolving=evolving,
    )


def _rates(tables: _Tables, batch: np.ndarray, sector: int) -> np.ndarray:
    """Event rates for a batch of normalized states in one sector (0-based)."""
    diag = tables.lam_diags[sector]
    if diag is not None:
        return (batch.real**2 + batch.imag**2) @ diag
    lam = tables.lambdas[sector]
    return np.einsum("bi,ij,bj->b", batch.conj(), lam, batch).real


def _propagate(tables: _Tables, batch: np.ndarray, sector: int, t_hint: float) -> np.ndarray:
    """Deterministic flow for a batch in one sector (0-based), renormalized."""
    phi = batch @ tables.propagators[sector].T
    n2 = np.einsum("bi,bi->b", phi.conj(), phi).real
    if n2.size:
        top = float(n2.max())
        bot = float(n2.min())
        if top > _DRIFT_BOUND or bot <= 0.0:
            bad = top if top > _DRIFT_BOUND else bot
            raise InvariantViolation(
                f"pre-normalization squared norm {bad!r} outside (0, 1 + 1e-9]^2 "
                f"near t={t_hint}"
            )
    return phi / np.sqrt(n2)[:, None]


@dataclass
class _Pilot:
    """The deterministic path shared by all trajectories before their first jump."""

    psis: np.ndarray  # (S+1, n): state at each step boundary
    lams: np.ndarray  # (S,): rate entering each step
    thresholds: np.ndarray  # (S,): lam * dt, the per-step jump-test threshold


def build_pilot(tables: _Tables, psi0: np.ndarray, alpha0: int, n_steps: int) -> _Pilot:
    n = tables.n
    sector = alpha0 - 1
    psis = np.empty((n_steps + 1, n), dtype=np.complex128)
    lams = np.zeros(n_steps, dtype=np.float64)
    thresholds = np.zeros(n_steps, dtype=np.float64)
    state = psi0.reshape(1, n).astype(np.complex128)
    psis[0] = state[0]
    jumpy = bool(tables.can_jump[sector])
    moves = bool(tables.evolving[sector])
    for s in range(n_steps):
        if jumpy:
            lam = float(_rates(tables, state, sector)[0])
            lams[s] = lam
            thresholds[s] = lam * tables.dt
        if moves:
            state = _propagate(tables, state, sector, (s + 1) * tables.dt)
        psis[s + 1] = state[0]
    return _Pilot(psis=psis, lams=lams, thresholds=thresholds)


def _sample_target(
    tables: _Tables, psi_row: np.ndarray, alpha: int, lam_val: float, v: float
) -> tuple[int, np.ndarray]:
    """Draw the jump target by cumulative channel weights; collapse the state.

    ``v * lam_val`` is compared against the running sum of the channel
    weights ||g_{beta alpha} psi||^2 in ascending beta order; roundoff in
    the lam/weight identity is absorbed by falling back to the last
    positive channel.
    """
    a = alpha - 1
    cum = 0.0
    chosen = None
    last_positive = None
    best_image = None
    for b in range(tables.m):
        if b == a:
            continue
        image = tables.couplings[b, a] @ psi_row
        q = float(np.real(np.vdot(image, image)))
        if q > 0.0:
            last_positive = b
            best_image = image
        cum += q
        if v * lam_val < cum and q > 0.0:
            chosen = b
            break
    if chosen is None:
        if last_positive is None:
            raise InvariantViolation(
                f"jump fired in sector {alpha} but every channel weight is zero"
            )
        chosen = last_positive
        image = best_image
    nrm = np.sqrt(float(np.real(np.vdot(image, image))))
    return chosen + 1, image / nrm


_VIRGIN, _INDIVIDUAL, _FROZEN = 0, 1, 2


class _SectorSet:
    """Mutable row-index set for one sector: O(1) append, rare O(n) removal."""

    __slots__ = ("arr", "count")

    def __init__(self):
        self.arr = np.empty(64, dtype=np.int64)
        self.count = 0

    def rows(self) -> np.ndarray:
        return self.arr[: self.count]

    def append(self, row: int) -> None:
        if self.count == self.arr.shape[0]:
            self.arr = np.resize(self.arr, 2 * self.arr.shape[0])
        self.arr[self.count] = row
        self.count += 1

    def remove_at(self, positions: np.ndarray) -> None:
        """Drop the given positions (ascending) from the set."""
        keep = np.ones(self.count, dtype=bool)
        keep[positions] = False
        kept = self.arr[: self.count][keep]
        self.arr[: kept.size] = kept
        self.count = kept.size


@dataclass
class BlockResult:
    """Raw output of one lockstep block of trajectories."""

    first_traj: int
    events: list  # (traj_id, t, from_alpha, to_alpha) tuples, chronological
    grid_acc: np.ndarray | None  # (G, m, n, n) summed sector projectors
    final_psis: np.ndarray  # (B, n)
    final_alphas: np.ndarray  # (B,)
    snapshots: list | None  # (t, psi, alpha) for B == 1 when requested


def simulate_block(
    tables: _Tables,
    pilot: _Pilot,
    initial: PureHybridState,
    cfg: TrajectoryConfig,
    first_traj: int,
    n_traj: int,
    grid_steps: np.ndarray | None = None,
    streams: list[TrajectoryRandom] | None = None,
    want_snapshots: bool = False,
) -> BlockResult:
    """Run ``n_traj`` trajectories (ids ``first_traj..``) in lockstep.

    The uniforms each trajectory consumes depend only on (cfg.seed,
    traj_id), never on the block composition, so any partition of an
    ensemble into blocks produces identical trajectories.
    """
    m, n, dt = tables.m, tables.n, tables.dt
    t0 = initial.t
    alpha0 = initial.alpha
    sector0 = alpha0 - 1
    n_steps = pilot.lams.shape[0]
    grid = np.asarray(grid_steps, dtype=np.int64) if grid_steps is not None else np.empty(0, np.int64)

    B = n_traj
    psi = np.zeros((B, n), dtype=np.complex128)
    alpha = np.full(B, alpha0, dtype=np.int32)
    status = np.full(B, _VIRGIN, dtype=np.int8)
    if streams is None:
        streams = [None] * B
    elif len(streams) != B:
        raise ValidationError(f"{len(streams)} streams for {B} trajectories")

    events: list = []
    snapshots: list | None = [] if (want_snapshots and B == 1) else None
    grid_acc = np.zeros((grid.size, m, n, n), dtype=np.complex128) if grid.size else None
    frozen_acc = np.zeros((m, n, n), dtype=np.complex128)
    virgin_count = B
    virgin_rows = np.arange(B, dtype=np.int64)
    virgin_dirty = False
    sectors = [_SectorSet() for _ in range(m)]  # individual rows per sector (0-based)

    chunk = min(_CHUNK_STEPS, max(n_steps, 1))
    any_jumpy = bool(tables.can_jump.any())
    buf = np.empty((B, chunk if any_jumpy else 0), dtype=np.float64)
    source_jumpy = bool(tables.can_jump[sector0])

    grid_lookup = {int(s): i for i, s in enumerate(grid)}

    def stream_for(row: int) -> TrajectoryRandom:
        st = streams[row]
        if st is None:
            st = TrajectoryRandom(cfg.seed, first_traj + row)
            streams[row] = st
        return st

    def accumulate_grid(gi: int, step: int) -> None:
        if virgin_count:
            pv = pilot.psis[step]
            grid_acc[gi, sector0] += virgin_count * np.outer(pv, pv.conj())
        grid_acc[gi] += frozen_acc
        for a in range(m):
            rows = sectors[a].rows()
            if rows.size:
                sub = psi[rows]
                grid_acc[gi, a] += np.einsum("bi,bj->ij", sub, sub.conj())

    def settle(row: int, new_alpha: int, new_psi: np.ndarray) -> None:
        """Place a row after its jump: keep stepping it, or freeze it."""
        alpha[row] = new_alpha
        psi[row] = new_psi
        if tables.evolving[new_alpha - 1]:
            status[row] = _INDIVIDUAL
            sectors[new_alpha - 1].append(row)
        else:
            status[row] = _FROZEN
            frozen_acc[new_alpha - 1] += np.outer(new_psi, new_psi.conj())

    # a grid point at step 0 samples the initial state
    if grid.size and 0 in grid_lookup:
        accumulate_grid(grid_lookup[0], 0)

    for c0 in range(0, n_steps, chunk):
        c1 = min(c0 + chunk, n_steps)
        cs = c1 - c0

        # refill the primary-uniform buffer for rows that may read it this chunk
        if source_jumpy and virgin_count:
            if virgin_dirty:
                virgin_rows = np.nonzero(status == _VIRGIN)[0]
                virgin_dirty = False
            for row in virgin_rows:
                stream_for(int(row)).fill_step_uniforms(buf[row, :cs])
        for a in range(m):
            if tables.can_jump[a]:
                for row in sectors[a].rows():
                    stream_for(int(row)).fill_step_uniforms(buf[row, :cs])

        # vectorized first-jump detection on the shared path
        virgin_hits: dict[int, list] = {}
        if source_jumpy and virgin_count:
            sub = buf[virgin_rows, :cs] < pilot.thresholds[c0:c1][None, :]
            hit_mask = sub.any(axis=1)
            if hit_mask.any():
                hit_rows = virgin_rows[hit_mask]
                hit_steps = c0 + sub[hit_mask].argmax(axis=1)
                for row, s in zip(hit_rows, hit_steps):
                    virgin_hits.setdefault(int(s), []).append(int(row))

        for s in range(c0, c1):
            jj = s - c0
            t_end = t0 + (s + 1) * dt

            # individual rows first: their jump tests and flow belong to the
            # membership as of the start of this step; rows jumping now are
            # settled afterwards so nothing is stepped twice
            moved_this_step: list = []
            for a in range(m):
                rows = sectors[a].rows()
                if not rows.size:
                    continue
                batch = psi[rows]
                if tables.can_jump[a]:
                    lam_vec = _rates(tables, batch, a)
                    u = buf[rows, jj]
                    jump_mask = u < lam_vec * dt
                    if jump_mask.any():
                        hits_at = np.nonzero(jump_mask)[0]
                        for pos in hits_at:
                            row = int(rows[pos])
                            v = stream_for(row).next_target_uniform()
                            beta, collapsed = _sample_target(
                                tables, psi[row], a + 1, float(lam_vec[pos]), v
                            )
                            events.append((first_traj + row, t_end, a + 1, beta))
                            moved_this_step.append((row, beta, collapsed))
                        keep = ~jump_mask
                        rows = rows[keep]
                        batch = batch[keep]
                        sectors[a].remove_at(hits_at)
                if rows.size:
                    psi[rows] = _propagate(tables, batch, a, t_end)

            for row, beta, collapsed in moved_this_step:
                settle(row, beta, collapsed)

            hits = virgin_hits.get(s)
            if hits:
                psi_pre = pilot.psis[s]
                lam_val = pilot.lams[s]
                for row in hits:
                    v = stream_for(row).next_target_uniform()
                    beta, collapsed = _sample_target(tables, psi_pre, alpha0, lam_val, v)
                    events.append((first_traj + row, t_end, alpha0, beta))
                    settle(row, beta, collapsed)
                    virgin_count -= 1
                virgin_dirty = True

            gi = grid_lookup.get(s + 1)
            if gi is not None and grid_acc is not None:
                accumulate_grid(gi, s + 1)
            if snapshots is not None and cfg.snapshot_every and (s + 1) % cfg.snapshot_every == 0:
                if status[0] == _VIRGIN:
                    snap_psi, snap_alpha = pilot.psis[s + 1], alpha0
                else:
                    snap_psi, snap_alpha = psi[0], int(alpha[0])
                snapshots.append((t_end, snap_psi.copy(), snap_alpha))

    final_psis = np.empty((B, n), dtype=np.complex128)
    if virgin_count:
        if virgin_dirty:
            virgin_rows = np.nonzero(status == _VIRGIN)[0]
        final_psis[virgin_rows] = pilot.psis[n_steps]
    moved = status != _VIRGIN
    final_psis[moved] = psi[moved]
    return BlockResult(
        first_traj=first_traj,
        events=events,
        grid_acc=grid_acc,
        final_psis=final_psis,
        final_alphas=alpha.astype(np.int64),
        snapshots=snapshots,
    )


def _steps_for(cfg: TrajectoryConfig, t0: float) -> int:
    span = cfg.t_max - t0
    if span < -1e-12:
        raise ValidationError(f"initial time {t0} beyond t_max {cfg.t_max}")
    steps = int(round(span / cfg.dt))
    if abs(steps * cfg.dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValidationError(
            f"time span {span} is not an integer multiple of dt={cfg.dt}"
        )
    return steps


def run_trajectory(
    model: HybridModel,
    initial: PureHybridState,
    cfg: TrajectoryConfig,
    rng: TrajectoryRandom | None = None,
    traj_id: int = 0,
) -> Trajectory:
    """Simulate one experimental run.

    ``rng`` defaults to the trajectory's own deterministic stream built
    from (cfg.seed, traj_id); passing the same model, initial state,
    config and seed always reproduces the identical trajectory.
    """
    if initial.alpha > model.m:
        raise ValidationError(f"initial sector {initial.alpha} outside 1..{model.m}")
    if initial.psi.shape[0] != model.n:
        raise ValidationError(
            f"initial state dimension {initial.psi.shape[0]} != model dimension {model.n}"
        )
    tables = build_tables(model, cfg.dt)
    n_steps = _steps_for(cfg, initial.t)
    pilot = build_pilot(tables, initial.psi, initial.alpha, n_steps)
    streams = [rng] if rng is not None else None
    result = simulate_block(
        tables,
        pilot,
        initial,
        cfg,
        first_traj=traj_id,
        n_traj=1,
        streams=streams,
        want_snapshots=cfg.snapshot_every > 0,
    )
    events = [
        EventRecord(t=t, from_alpha=fa, to_alpha=ta, traj_id=tid)
        for tid, t, fa, ta in result.events
    ]
    snaps = None
    if result.snapshots is not None:
        snaps = [
            (t, PureHybridState(psi=vec, alpha=a, t=t)) for t, vec, a in result.snapshots
        ]
    final_t = initial.t + n_steps * cfg.dt
    final = PureHybridState(
        psi=result.final_psis[0], alpha=int(result.final_alphas[0]), t=final_t
    )
    return Trajectory(
        traj_id=traj_id, initial=initial, events=events, snapshots=snaps, final=final
    )
