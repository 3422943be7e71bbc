"""Hybrid quantum-classical system definition and statistical states.

A model couples an n-dimensional quantum system to a classical system with
m pure states. Events are transitions ``alpha -> beta`` of the classical
state. Per classical sector the quantum side evolves under a Hamiltonian
``H_alpha``; the coupling is an m x m grid of operators ``g[alpha][beta]``
(zero diagonal) whose column sums of squares form the damping operators
``Lambda_alpha``. Classical indices are 1-based everywhere a user sees
them, matching the file formats and event logs.

Statistical states of the total system are block-diagonal: one positive
n x n block per classical sector, with total trace one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hilbert import as_matrix, as_state, hermitian_eigen, require_hermitian

__all__ = [
    "ClassicalSpace",
    "HybridModel",
    "HybridDensity",
    "PureHybridState",
    "EventRecord",
    "diag_projection",
    "compute_lambdas",
    "validate_model",
    "effective_quantum_state",
    "classical_probabilities",
    "expectation",
    "embed_pure",
]

PSD_TOL = 1e-10
TRACE_TOL = 1e-8


@dataclass(frozen=True)
class ClassicalSpace:
    """Finite set of classical pure states, with display labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ValidationError("classical space needs at least one state")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("classical labels must be distinct")
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @classmethod
    def of_size(cls, m: int) -> "ClassicalSpace":
        if m < 1:
            raise ValidationError(f"classical size must be >= 1, got {m}")
        return cls(tuple(str(i) for i in range(1, m + 1)))

    @property
    def m(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        """1-based index of a label."""
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise ValidationError(
                f"unknown classical label {label!r}; expected one of {list(self.labels)}"
            ) from None


@dataclass(frozen=True)
class HybridModel:
    """Validated hybrid system: Hamiltonians, couplings, derived dampings.

    Built through :func:`validate_model`; the stacked arrays are read-only
    and safe to share across worker processes. ``hamiltonians`` has shape
    (m, n, n), ``couplings`` (m, m, n, n) with ``couplings[a-1, b-1]`` the
    operator g_{ab}, and ``lambdas`` (m, n, n).
    """

    n: int
    classical: ClassicalSpace
    hamiltonians: np.ndarray
    couplings: np.ndarray
    lambdas: np.ndarray

    @property
    def m(self) -> int:
        return self.classical.m

    @property
    def event_channels(self) -> int:
        """Number of possible event channels (ordered sector pairs)."""
        return self.m * self.m - self.m

    def hamiltonian(self, alpha: int) -> np.ndarray:
        return self.hamiltonians[self._idx(alpha)]

    def coupling(self, alpha: int, beta: int) -> np.ndarray:
        return self.couplings[self._idx(alpha), self._idx(beta)]

    def damping(self, alpha: int) -> np.ndarray:
        return self.lambdas[self._idx(alpha)]

    def _idx(self, alpha: int) -> int:
        if not 1 <= alpha <= self.m:
            raise ValidationError(f"classical index {alpha} outside 1..{self.m}")
        return alpha - 1


@dataclass(frozen=True)
class HybridDensity:
    """Statistical state: one n x n block per classical sector, trace one."""

    blocks: np.ndarray  # (m, n, n) complex

    @classmethod
    def from_blocks(cls, blocks, *, check: bool = True) -> "HybridDensity":
        arr = np.asarray(blocks, dtype=np.complex128)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(
                f"density blocks must have shape (m, n, n), got {arr.shape}"
            )
        rho = cls(arr)
        if check:
            rho.validate()
        return rho

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    def validate(self, *, trace_tol: float = TRACE_TOL, psd_tol: float = PSD_TOL) -> None:
        total = 0.0
        for a in range(self.m):
            block = require_hermitian(self.blocks[a], name=f"density block {a + 1}")
            vals, _ = hermitian_eigen(block)
            if vals[0] < -psd_tol:
                raise ValidationError(
                    f"density block {a + 1} not positive: min eigenvalue {vals[0]:.2e}"
                )
            total += float(np.trace(block).real)
        if abs(total - 1.0) > trace_tol:
            raise ValidationError(f"total trace {total!r} deviates from 1 by {abs(total - 1.0):.2e}")


@dataclass(frozen=True)
class PureHybridState:
    """Individual-system state: quantum vector plus classical sector index."""

    psi: np.ndarray
    alpha: int
    t: float = 0.0

    def __post_init__(self):
        psi = as_state(self.psi, normalized=True, name="psi")
        object.__setattr__(self, "psi", psi)
        if int(self.alpha) < 1:
            raise ValidationError(f"classical index must be >= 1, got {self.alpha}")
        object.__setattr__(self, "alpha", int(self.alpha))
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class EventRecord:
    """One classical event alpha -> beta with its timestamp (1-based sectors)."""

    t: float
    from_alpha: int
    to_alpha: int
    traj_id: int = 0

    def __post_init__(self):
        if self.from_alpha == self.to_alpha:
            raise ValidationError("an event must change the classical sector")


def _coerce_grid(grid, *, n: int | None = None, name: str = "grid") -> np.ndarray:
    """Normalize an m x m grid of square matrices into an (m, m, n, n) array.

    Entries may be None (treated as zero) when given as nested sequences;
    ``n`` fixes the dimension when no entry does (all-zero grids).
    """
    if isinstance(grid, np.ndarray) and grid.ndim == 4:
        arr = np.asarray(grid, dtype=np.complex128)
        if arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
            raise ValidationError(f"{name}: expected shape (m, m, n, n), got {arr.shape}")
        if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
            raise ValidationError(f"{name}: entries must be finite")
        return arr

    rows = list(grid)
    m = len(rows)
    if m == 0 or any(len(list(r)) != m for r in rows):
        raise ValidationError(f"{name}: expected an m x m grid of matrices")
    for a, row in enumerate(rows):
        for b, entry in enumerate(row):
            if entry is None:
                continue
            mat = as_matrix(entry, square=True, name=f"{name}[{a + 1}][{b + 1}]")
            if n is None:
                n = mat.shape[0]
            elif mat.shape[0] != n:
                raise ValidationError(
                    f"{name}[{a + 1}][{b + 1}]: dimension {mat.shape[0]} != {n}"
                )
    if n is None:
        raise ValidationError(f"{name}: no entry fixes the dimension and none was given")
    arr = np.zeros((m, m, n, n), dtype=np.complex128)
    for a, row in enumerate(rows):
        for b, entry in enumerate(row):
            if entry is not None:
                arr[a, b] = np.asarray(entry, dtype=np.complex128)
    return arr


def diag_projection(grid) -> list[np.ndarray]:
    """Project a grid of operators onto its diagonal blocks, in order."""
    arr = _coerce_grid(grid)
    return [arr[a, a].copy() for a in range(arr.shape[0])]


def compute_lambdas(couplings) -> np.ndarray:
    """Damping operators Lambda_alpha = sum_beta g[beta][alpha]^dag g[beta][alpha].

    Rejects grids with a nonzero diagonal coupling. The result is Hermitian
    positive semidefinite by construction.
    """
    g = _coerce_grid(couplings, name="couplings")
    m = g.shape[0]
    for a in range(m):
        if np.any(g[a, a] != 0):
            raise ValidationError(f"couplings[{a + 1}][{a + 1}]: diagonal coupling must vanish")
    # Lambda_a = sum_b g[b,a]^dag g[b,a]
    lam = np.einsum("baji,bajk->aik", g.conj(), g)
    return lam


def validate_model(hamiltonians, couplings, labels=None) -> HybridModel:
    """Check all model invariants and attach the derived damping operators.

    ``hamiltonians`` is a sequence of m Hermitian n x n matrices;
    ``couplings`` an m x m grid (None entries allowed) with zero diagonal.
    Diagnostics name the offending field.
    """
    hams = [as_matrix(h, square=True, name=f"hamiltonians[{i + 1}]") for i, h in enumerate(hamiltonians)]
    m = len(hams)
    if m == 0:
        raise ValidationError("at least one sector Hamiltonian required")
    n = hams[0].shape[0]
    for i, h in enumerate(hams):
        if h.shape[0] != n:
            raise ValidationError(f"hamiltonians[{i + 1}]: dimension {h.shape[0]} != {n}")
        require_hermitian(h, name=f"hamiltonians[{i + 1}]")

    g = _coerce_grid(couplings, n=n, name="couplings")
    if g.shape[0] != m:
        raise ValidationError(f"couplings grid is {g.shape[0]} x {g.shape[0]}, expected {m} x {m}")
    if g.shape[2] != n:
        raise ValidationError(f"coupling dimension {g.shape[2]} != quantum dimension {n}")

    lam = compute_lambdas(g)
    for a in range(m):
        vals, _ = hermitian_eigen(lam[a])
        if vals[0] < -PSD_TOL:
            raise ValidationError(
                f"damping operator {a + 1} not positive: min eigenvalue {vals[0]:.2e}"
            )

    if labels is None:
        classical = ClassicalSpace.of_size(m)
    else:
        classical = ClassicalSpace(tuple(labels))
        if classical.m != m:
            raise ValidationError(
                f"{classical.m} classical labels for {m} sector Hamiltonians"
            )

    h_stack = np.stack(hams)
    for arr in (h_stack, g, lam):
        arr.setflags(write=False)
    return HybridModel(n=n, classical=classical, hamiltonians=h_stack, couplings=g, lambdas=lam)


def effective_quantum_state(rho: HybridDensity) -> np.ndarray:
    """Effective quantum density matrix: sum of the sector blocks."""
    return rho.blocks.sum(axis=0)


def classical_probabilities(rho: HybridDensity) -> np.ndarray:
    """Sector probabilities p_alpha = Tr(rho_alpha)."""
    return np.einsum("aii->a", rho.blocks).real.copy()


def expectation(observable, rho: HybridDensity) -> complex:
    """Pairing sum_alpha Tr(A_alpha rho_alpha) of an observable with a state."""
    obs = np.asarray(observable, dtype=np.complex128)
    if obs.shape != rho.blocks.shape:
        raise ValidationError(
            f"observable shape {obs.shape} does not match state shape {rho.blocks.shape}"
        )
    return complex(np.einsum("aij,aji->", obs, rho.blocks))


def embed_pure(state: PureHybridState, m: int | None = None) -> HybridDensity:
    """Density-matrix form of a pure hybrid state: a projector in its sector.

    ``m`` fixes the number of classical sectors; it defaults to the state's
    own sector index (the smallest consistent size).
    """
    m = state.alpha if m is None else int(m)
    if m < state.alpha:
        raise ValidationError(f"m={m} smaller than the state's sector {state.alpha}")
    n = state.psi.shape[0]
    blocks = np.zeros((m, n, n), dtype=np.complex128)
    blocks[state.alpha - 1] = np.outer(state.psi, state.psi.conj())
    return HybridDensity(blocks)
