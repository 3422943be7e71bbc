"""Deterministic evolution of hybrid statistical states and observables.

Per sector the state equation reads

    drho_a/dt = -i[H_a, rho_a] + sum_b g_ab rho_b g_ab^dag - (1/2){Lambda_a, rho_a}

and the dual observable equation

    dA_a/dt = +i[H_a, A_a] + sum_b g_ba^dag A_b g_ba - (1/2){Lambda_a, A_a}.

Both generators are linear and time-independent, so the integrators build
the generator matrix once (by applying the componentwise right-hand side
to basis elements) and step the flattened state with fixed-step RK4. The
ensemble engine treats these runs as the exact reference, so invariant
drift beyond tolerance aborts the run instead of being papered over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ValidationError
from .hilbert import hermitian_eigen
from .model import HybridDensity, HybridModel

__all__ = [
    "IntegratorConfig",
    "liouville_rhs",
    "heisenberg_rhs",
    "integrate_master",
    "integrate_heisenberg",
]

SNAPSHOT_TRACE_TOL = 1e-8
SNAPSHOT_EIG_TOL = 1e-8


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_max: float
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.t_max < 0:
            raise ValidationError(f"t_max must be nonnegative, got {self.t_max}")
        if self.t_max > 0 and self.dt > self.t_max * (1 + 1e-12):
            raise ValidationError(f"dt={self.dt} exceeds t_max={self.t_max}")
        if self.record_every < 1:
            raise ValidationError("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        steps = int(round(self.t_max / self.dt))
        if abs(steps * self.dt - self.t_max) > 1e-9 * max(1.0, abs(self.t_max)):
            raise ValidationError(
                f"t_max={self.t_max} is not an integer multiple of dt={self.dt}"
            )
        return steps


def _blocks_of(state) -> np.ndarray:
    blocks = state.blocks if isinstance(state, HybridDensity) else np.asarray(state, dtype=np.complex128)
    if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
        raise ValidationError(f"expected (m, n, n) blocks, got shape {blocks.shape}")
    return blocks


def _check_shapes(model: HybridModel, blocks: np.ndarray, what: str) -> None:
    if blocks.shape != (model.m, model.n, model.n):
        raise ValidationError(
            f"{what} shape {blocks.shape} does not match model ({model.m}, {model.n}, {model.n})"
        )


def liouville_rhs(model: HybridModel, rho) -> np.ndarray:
    """Componentwise time derivative of a hybrid statistical state."""
    blocks = _blocks_of(rho)
    _check_shapes(model, blocks, "state")
    h, g, lam = model.hamiltonians, model.couplings, model.lambdas
    comm = h @ blocks - blocks @ h
    gain = np.einsum("abij,bjk,ablk->ail", g, blocks, g.conj())
    anti = lam @ blocks + blocks @ lam
    return -1j * comm + gain - 0.5 * anti


def heisenberg_rhs(model: HybridModel, observable) -> np.ndarray:
    """Componentwise time derivative of an observable (dual generator)."""
    blocks = _blocks_of(observable)
    _check_shapes(model, blocks, "observable")
    h, g, lam = model.hamiltonians, model.couplings, model.lambdas
    comm = h @ blocks - blocks @ h
    gain = np.einsum("baji,bjk,bakl->ail", g.conj(), blocks, g)
    anti = lam @ blocks + blocks @ lam
    return 1j * comm + gain - 0.5 * anti


def _generator_matrix(model: HybridModel, rhs) -> np.ndarray:
    """Matrix of the (complex-linear) generator on flattened (m, n, n) blocks."""
    m, n = model.m, model.n
    dim = m * n * n
    gen = np.empty((dim, dim), dtype=np.complex128)
    basis = np.zeros((m, n, n), dtype=np.complex128)
    for j in range(dim):
        basis.flat[j] = 1.0
        gen[:, j] = rhs(model, basis).ravel()
        basis.flat[j] = 0.0
    return gen


def _rk4_run(model, gen, v0, cfg, *, hermitize, on_snapshot):
    m, n = model.m, model.n
    n_steps = cfg.n_steps
    dt = cfg.dt
    v = v0.copy()
    out = [(0.0, v.copy())]
    on_snapshot(0.0, v)
    for step in range(1, n_steps + 1):
        k1 = gen @ v
        k2 = gen @ (v + (0.5 * dt) * k1)
        k3 = gen @ (v + (0.5 * dt) * k2)
        k4 = gen @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if hermitize:
            b = v.reshape(m, n, n)
            v = (0.5 * (b + b.conj().transpose(0, 2, 1))).ravel()
        if step % cfg.record_every == 0 or step == n_steps:
            t = step * dt
            if not np.all(np.isfinite(v.view(np.float64))):
                raise InvariantViolation(f"non-finite state at t={t}")
            on_snapshot(t, v)
            out.append((t, v.copy()))
    return out


def integrate_master(
    model: HybridModel, rho0: HybridDensity, cfg: IntegratorConfig
) -> list[tuple[float, HybridDensity]]:
    """Fixed-step RK4 integration of the hybrid state equation.

    Returns ``(t, state)`` snapshots every ``record_every`` steps (always
    including t=0 and the final time). Each recorded snapshot is checked:
    total trace within 1e-8 of one and sector eigenvalues above -1e-8;
    a violation raises :class:`InvariantViolation` naming the time.
    """
    blocks0 = _blocks_of(rho0)
    _check_shapes(model, blocks0, "initial state")
    m, n = model.m, model.n

    def check(t: float, v: np.ndarray) -> None:
        b = v.reshape(m, n, n)
        total = float(np.einsum("aii->", b).real)
        if abs(total - 1.0) > SNAPSHOT_TRACE_TOL:
            raise InvariantViolation(
                f"trace invariant violated at t={t}: |trace - 1| = {abs(total - 1.0):.2e}"
            )
        for a in range(m):
            vals, _ = hermitian_eigen(b[a])
            if vals[0] < -SNAPSHOT_EIG_TOL:
                raise InvariantViolation(
                    f"positivity invariant violated at t={t}: "
                    f"sector {a + 1} min eigenvalue {vals[0]:.2e}"
                )

    if cfg.t_max == 0 or cfg.n_steps == 0:
        check(0.0, blocks0.ravel())
        return [(0.0, HybridDensity.from_blocks(blocks0.copy(), check=False))]

    gen = _generator_matrix(model, liouville_rhs)
    raw = _rk4_run(model, gen, blocks0.ravel(), cfg, hermitize=True, on_snapshot=check)
    return [
        (t, HybridDensity.from_blocks(v.reshape(m, n, n), check=False)) for t, v in raw
    ]


def integrate_heisenberg(
    model: HybridModel, a0, cfg: IntegratorConfig
) -> list[tuple[float, np.ndarray]]:
    """Fixed-step RK4 integration of the dual observable equation."""
    blocks0 = _blocks_of(a0)
    _check_shapes(model, blocks0, "initial observable")
    m, n = model.m, model.n
    if cfg.t_max == 0 or cfg.n_steps == 0:
        return [(0.0, blocks0.copy())]
    gen = _generator_matrix(model, heisenberg_rhs)
    raw = _rk4_run(
        model, gen, blocks0.ravel(), cfg, hermitize=False, on_snapshot=lambda t, v: None
    )
    return [(t, v.reshape(m, n, n)) for t, v in raw]
