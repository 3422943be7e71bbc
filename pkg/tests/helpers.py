"""Shared test utilities: random model generation and reference oracles."""

from __future__ import annotations

import numpy as np

from hybridjump.model import HybridModel, validate_model

EXCITED_PROJ = np.diag([0.0, 1.0])


def random_hermitian(rng: np.random.Generator, n: int, norm: float = 2.0) -> np.ndarray:
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (b + b.conj().T)
    return h * (norm / np.linalg.norm(h))


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_model(
    rng: np.random.Generator,
    n: int | None = None,
    m: int | None = None,
    h_norm: float = 2.0,
    g_norm: float = 1.0,
) -> HybridModel:
    """Random hybrid model with ||H_a|| <= h_norm and ||g_ab|| <= g_norm."""
    n = int(rng.integers(2, 5)) if n is None else n
    m = int(rng.integers(2, 4)) if m is None else m
    hams = [random_hermitian(rng, n, h_norm * rng.uniform(0.2, 1.0)) for _ in range(m)]
    grid = np.zeros((m, m, n, n), dtype=np.complex128)
    for a in range(m):
        for b in range(m):
            if a == b:
                continue
            mat = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            grid[a, b] = mat * (g_norm * rng.uniform(0.1, 1.0) / np.linalg.norm(mat))
    return validate_model(hams, grid)


def decay_model(kappa: float = 1.0) -> HybridModel:
    """Two sectors, no Hamiltonian, one channel g_21 = sqrt(kappa) |e><e|."""
    z = np.zeros((2, 2))
    g21 = np.sqrt(kappa) * EXCITED_PROJ
    return validate_model([z, z], [[None, None], [g21, None]], labels=["armed", "fired"])


def block_coupling_matrix(model: HybridModel) -> np.ndarray:
    """Full (n m) x (n m) coupling matrix with blocks g_ab at block (a, b)."""
    m, n = model.m, model.n
    full = np.zeros((m * n, m * n), dtype=np.complex128)
    for a in range(m):
        for b in range(m):
            full[a * n : (a + 1) * n, b * n : (b + 1) * n] = model.couplings[a, b]
    return full


def block_diagonal(blocks: np.ndarray) -> np.ndarray:
    """Full block-diagonal matrix from (m, n, n) blocks."""
    m, n = blocks.shape[0], blocks.shape[1]
    full = np.zeros((m * n, m * n), dtype=np.complex128)
    for a in range(m):
        full[a * n : (a + 1) * n, a * n : (a + 1) * n] = blocks[a]
    return full


def extract_diag_blocks(full: np.ndarray, m: int, n: int) -> np.ndarray:
    out = np.empty((m, n, n), dtype=np.complex128)
    for a in range(m):
        out[a] = full[a * n : (a + 1) * n, a * n : (a + 1) * n]
    return out


def ks_statistic(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov statistic of samples against a continuous CDF."""
    xs = np.sort(np.asarray(samples))
    n = xs.size
    theo = cdf(xs)
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(emp_hi - theo), np.max(theo - emp_lo)))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic KS critical value; c(0.01) = 1.62762."""
    coeff = {0.10: 1.22385, 0.05: 1.35810, 0.01: 1.62762}[alpha]
    return coeff / np.sqrt(n)
