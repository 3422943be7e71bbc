"""Dense complex linear algebra for small Hilbert spaces.

Operators and state vectors are plain ``numpy`` arrays of ``complex128``.
This module adds the shape/finiteness validation the rest of the package
relies on, plus the two nontrivial kernels: a scaling-and-squaring matrix
exponential and a cyclic-Jacobi Hermitian eigensolver. Target dimensions
are a few dozen at most; everything is dense and unblocked by design.

All functions are pure; arrays are never mutated in place.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

__all__ = [
    "as_matrix",
    "as_state",
    "mat_mul",
    "adjoint",
    "trace",
    "frobenius",
    "is_hermitian",
    "require_hermitian",
    "mat_exp",
    "hermitian_eigen",
    "trace_distance",
]

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-10

# exp kernel: truncated Taylor of fixed order, inputs scaled below this radius
_TAYLOR_ORDER = 16
_TAYLOR_RADIUS = 0.5

_JACOBI_OFF_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


def as_matrix(a, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite complex 2-D array, validating shape."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ValidationError(f"{name}: entries must be finite (no NaN/Inf)")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name}: expected a square matrix, got shape {arr.shape}")
    return arr


def as_state(v, *, normalized: bool = False, name: str = "state") -> np.ndarray:
    """Coerce to a finite complex 1-D array, optionally checking unit norm."""
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name}: expected a nonempty 1-D array")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValidationError(f"{name}: entries must be finite (no NaN/Inf)")
    if normalized:
        nrm = float(np.linalg.norm(arr))
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValidationError(f"{name}: not normalized, |norm - 1| = {abs(nrm - 1.0):.2e}")
    return arr


def mat_mul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    am = as_matrix(a, name="left factor")
    bm = as_matrix(b, name="right factor")
    if am.shape[1] != bm.shape[0]:
        raise ValidationError(
            f"dimension mismatch in matrix product: {am.shape} x {bm.shape}"
        )
    return am @ bm


def adjoint(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T.copy()


def trace(a) -> complex:
    """Sum of diagonal entries; rejects non-square input."""
    am = as_matrix(a, square=True)
    return complex(np.trace(am))


def frobenius(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    am = as_matrix(a, square=True)
    return frobenius(am - am.conj().T) <= tol


def require_hermitian(a, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    am = as_matrix(a, square=True, name=name)
    dev = frobenius(am - am.conj().T)
    if dev > tol:
        raise ValidationError(f"{name} not Hermitian: deviation {dev:.1e}")
    return am


def mat_exp(a) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring over a truncated Taylor kernel.

    The argument is halved until its Frobenius norm is below 0.5, the
    order-16 Taylor polynomial is evaluated by Horner's scheme, and the
    result is squared back up. Relative accuracy is well below 1e-10 for
    norms up to ~10, which covers every propagator built here.
    """
    am = as_matrix(a, square=True)
    dim = am.shape[0]
    eye = np.eye(dim, dtype=np.complex128)
    nrm = frobenius(am)
    squarings = 0
    if nrm > _TAYLOR_RADIUS:
        squarings = int(math.ceil(math.log2(nrm / _TAYLOR_RADIUS)))
    x = am / (2.0**squarings)
    result = eye.copy()
    for k in range(_TAYLOR_ORDER, 0, -1):
        result = eye + (x @ result) / k
    for _ in range(squarings):
        result = result @ result
    return result


def hermitian_eigen(a, *, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(w, u)`` with eigenvalues ``w`` ascending and eigenvectors in
    the columns of the unitary ``u`` so that ``a == u @ diag(w) @ u^dagger``
    up to roundoff. Off-diagonal norm is driven below 1e-12 in at most 100
    sweeps; at the dimensions used here convergence takes a handful.
    """
    am = require_hermitian(a, tol=tol)
    dim = am.shape[0]
    work = am.astype(np.complex128, copy=True)
    vecs = np.eye(dim, dtype=np.complex128)
    if dim == 1:
        return np.array([work[0, 0].real]), vecs

    for _ in range(_JACOBI_MAX_SWEEPS):
        off = frobenius(work - np.diag(np.diag(work)))
        if off <= _JACOBI_OFF_TOL:
            break
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                gpq = work[p, q]
                mag = abs(gpq)
                if mag == 0.0:
                    continue
                phase = gpq / mag
                # rotate in the (p, q) plane: phase removal then a real Jacobi angle
                tau = (work[q, q].real - work[p, p].real) / (2.0 * mag)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # plane rotation V = diag(1, conj(phase)) . [[c, s], [-s, c]]
                vp = c * work[:, p] - (s * np.conj(phase)) * work[:, q]
                vq = s * work[:, p] + (c * np.conj(phase)) * work[:, q]
                work[:, p] = vp
                work[:, q] = vq
                rp = c * work[p, :] - (s * phase) * work[q, :]
                rq = s * work[p, :] + (c * phase) * work[q, :]
                work[p, :] = rp
                work[q, :] = rq
                work[p, q] = 0.0
                work[q, p] = 0.0
                up = c * vecs[:, p] - (s * np.conj(phase)) * vecs[:, q]
                uq = s * vecs[:, p] + (c * np.conj(phase)) * vecs[:, q]
                vecs[:, p] = up
                vecs[:, q] = uq
    else:
        raise ValidationError(
            f"Jacobi eigensolver did not converge in {_JACOBI_MAX_SWEEPS} sweeps"
        )

    vals = np.real(np.diag(work))
    order = np.argsort(vals, kind="stable")
    return vals[order].copy(), vecs[:, order].copy()


def trace_distance(a, b) -> float:
    """Half the sum of absolute eigenvalues of the (Hermitian) difference."""
    am = require_hermitian(a, name="first operand")
    bm = require_hermitian(b, name="second operand")
    if am.shape != bm.shape:
        raise ValidationError(f"dimension mismatch: {am.shape} vs {bm.shape}")
    vals, _ = hermitian_eigen(am - bm)
    return 0.5 * float(np.sum(np.abs(vals)))
