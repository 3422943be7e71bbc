import numpy as np
import pytest

from hybridjump.errors import InvariantViolation, ValidationError
from hybridjump.hilbert import mat_exp, trace_distance
from hybridjump.master import (
    IntegratorConfig,
    heisenberg_rhs,
    integrate_heisenberg,
    integrate_master,
    liouville_rhs,
)
from hybridjump.model import (
    HybridDensity,
    PureHybridState,
    classical_probabilities,
    effective_quantum_state,
    embed_pure,
    validate_model,
)

from helpers import (
    block_coupling_matrix,
    block_diagonal,
    decay_model,
    extract_diag_blocks,
    random_hermitian,
    random_model,
    random_state,
)


def random_density(rng, m, n):
    blocks = []
    weights = rng.dirichlet(np.ones(m))
    for a in range(m):
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        v /= np.linalg.norm(v)
        blocks.append(weights[a] * np.outer(v, v.conj()))
    return HybridDensity.from_blocks(np.stack(blocks))


def block_form_rhs(model, blocks):
    """Reference generator assembled from full block matrices.

    Builds -i[H, rho] + E(V rho V^dag) - {E(V^dag V), rho}/2 on the full
    (nm) x (nm) space and reads back the diagonal blocks.
    """
    m, n = model.m, model.n
    h_full = block_diagonal(model.hamiltonians)
    v_full = block_coupling_matrix(model)
    rho_full = block_diagonal(blocks)
    lam_full = block_diagonal(extract_diag_blocks(v_full.conj().T @ v_full, m, n))
    gain_full = block_diagonal(extract_diag_blocks(v_full @ rho_full @ v_full.conj().T, m, n))
    out = (
        -1j * (h_full @ rho_full - rho_full @ h_full)
        + gain_full
        - 0.5 * (lam_full @ rho_full + rho_full @ lam_full)
    )
    return extract_diag_blocks(out, m, n)


class TestLiouvilleRhs:
    def test_zero_coupling_reduces_to_von_neumann(self):
        rng = np.random.default_rng(0)
        h1, h2 = random_hermitian(rng, 2), random_hermitian(rng, 2)
        model = validate_model([h1, h2], np.zeros((2, 2, 2, 2)))
        rho = random_density(rng, 2, 2)
        got = liouville_rhs(model, rho)
        for a, h in enumerate((h1, h2)):
            expected = -1j * (h @ rho.blocks[a] - rho.blocks[a] @ h)
            assert np.abs(got[a] - expected).max() <= 1e-14

    def test_pure_transfer(self):
        kappa = 0.8
        z = np.zeros((2, 2))
        model = validate_model([z, z], [[None, None], [np.sqrt(kappa) * np.eye(2), None]])
        rho1 = np.diag([0.4, 0.6]).astype(complex)
        rho = HybridDensity.from_blocks(np.stack([rho1, z.astype(complex)]))
        got = liouville_rhs(model, rho)
        assert np.abs(got[0] + kappa * rho1).max() <= 1e-14
        assert np.abs(got[1] - kappa * rho1).max() <= 1e-14

    def test_trace_conservation(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            model = random_model(rng)
            rho = random_density(rng, model.m, model.n)
            rhs = liouville_rhs(model, rho)
            assert abs(np.einsum("aii->", rhs)) <= 1e-12

    def test_dimension_mismatch(self):
        model = decay_model()
        with pytest.raises(ValidationError):
            liouville_rhs(model, np.zeros((3, 2, 2)))


class TestHeisenbergRhs:
    def test_identity_is_stationary(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, n=3, m=2)
        ident = np.stack([np.eye(3, dtype=complex)] * 2)
        assert np.abs(heisenberg_rhs(model, ident)).max() <= 1e-12

    def test_zero_coupling_reduces_to_heisenberg(self):
        rng = np.random.default_rng(3)
        h = random_hermitian(rng, 2)
        model = validate_model([h, h], np.zeros((2, 2, 2, 2)))
        obs = np.stack([random_hermitian(rng, 2) for _ in range(2)])
        got = heisenberg_rhs(model, obs)
        for a in range(2):
            assert np.abs(got[a] - 1j * (h @ obs[a] - obs[a] @ h)).max() <= 1e-14

    def test_duality_pairing(self):
        # <dA/dt, rho> must equal <A, drho/dt> for the generators to be adjoint
        rng = np.random.default_rng(4)
        for _ in range(5):
            model = random_model(rng)
            rho = random_density(rng, model.m, model.n)
            obs = np.stack([random_hermitian(rng, model.n) for _ in range(model.m)])
            lhs = np.einsum("aij,aji->", heisenberg_rhs(model, obs), rho.blocks)
            rhs = np.einsum("aij,aji->", obs, liouville_rhs(model, rho))
            assert abs(lhs - rhs) <= 1e-10


class TestGeneratorFormEquivalence:
    def test_componentwise_matches_block_form(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            model = random_model(rng)
            rho = random_density(rng, model.m, model.n)
            got = liouville_rhs(model, rho)
            expected = block_form_rhs(model, rho.blocks)
            assert np.abs(got - expected).max() <= 1e-12


class TestIntegrateMaster:
    def test_unitary_oracle(self):
        rng = np.random.default_rng(6)
        h = random_hermitian(rng, 3)
        model = validate_model([h, h], np.zeros((2, 2, 3, 3)))
        psi = random_state(rng, 3)
        rho0 = embed_pure(PureHybridState(psi, 1), m=2)
        out = integrate_master(model, rho0, IntegratorConfig(dt=1e-3, t_max=1.0, record_every=1000))
        u = mat_exp(-1j * h)
        expected = u @ np.outer(psi, psi.conj()) @ u.conj().T
        assert trace_distance(effective_quantum_state(out[-1][1]), expected) <= 1e-8

    def test_decay_closed_form(self):
        kappa = 1.0
        model = decay_model(kappa)
        rho0 = embed_pure(PureHybridState(np.array([0.0, 1.0]), 1), m=2)
        out = integrate_master(model, rho0, IntegratorConfig(dt=1e-3, t_max=2.0, record_every=500))
        for t, rho in out:
            p2 = classical_probabilities(rho)[1]
            assert abs(p2 - (1.0 - np.exp(-kappa * t))) <= 1e-6

    def test_t_max_zero_returns_initial(self):
        model = decay_model()
        rho0 = embed_pure(PureHybridState(np.array([1.0, 0.0]), 1), m=2)
        out = integrate_master(model, rho0, IntegratorConfig(dt=1e-3, t_max=0.0))
        assert len(out) == 1
        assert out[0][0] == 0.0
        assert np.array_equal(out[0][1].blocks, rho0.blocks)

    def test_invariants_on_random_models(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            model = random_model(rng)
            psi = random_state(rng, model.n)
            rho0 = embed_pure(PureHybridState(psi, 1), m=model.m)
            out = integrate_master(model, rho0, IntegratorConfig(dt=1e-3, t_max=2.0, record_every=400))
            for t, rho in out:
                total = sum(np.trace(b).real for b in rho.blocks)
                assert abs(total - 1.0) <= 1e-8

    def test_unstable_step_aborts_with_time(self):
        rng = np.random.default_rng(8)
        model = random_model(rng, n=2, m=2)
        psi = random_state(rng, 2)
        rho0 = embed_pure(PureHybridState(psi, 1), m=2)
        with pytest.raises(InvariantViolation, match="t="):
            integrate_master(model, rho0, IntegratorConfig(dt=5.0, t_max=200.0, record_every=1))


class TestIntegrateHeisenberg:
    def test_identity_stays_identity(self):
        rng = np.random.default_rng(9)
        model = random_model(rng, n=2, m=2)
        ident = np.stack([np.eye(2, dtype=complex)] * 2)
        out = integrate_heisenberg(model, ident, IntegratorConfig(dt=1e-3, t_max=1.0, record_every=250))
        for t, obs in out:
            assert np.abs(obs - ident).max() <= 1e-10

    def test_unitary_conjugation_oracle(self):
        rng = np.random.default_rng(10)
        h = random_hermitian(rng, 2)
        model = validate_model([h], [[None]])
        a0 = np.stack([random_hermitian(rng, 2)])
        out = integrate_heisenberg(model, a0, IntegratorConfig(dt=1e-3, t_max=1.0, record_every=1000))
        u = mat_exp(-1j * h)
        expected = u.conj().T @ a0[0] @ u
        assert np.abs(out[-1][1][0] - expected).max() <= 1e-8

    def test_two_sided_duality(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            model = random_model(rng)
            psi = random_state(rng, model.n)
            rho0 = embed_pure(PureHybridState(psi, 1), m=model.m)
            obs = np.stack([random_hermitian(rng, model.n) for _ in range(model.m)])
            cfg = IntegratorConfig(dt=1e-3, t_max=1.0, record_every=1000)
            a_t = integrate_heisenberg(model, obs, cfg)[-1][1]
            rho_t = integrate_master(model, rho0, cfg)[-1][1]
            lhs = np.einsum("aij,aji->", a_t, rho0.blocks)
            rhs = np.einsum("aij,aji->", obs, rho_t.blocks)
            assert abs(lhs - rhs) <= 1e-6


class TestRk4Order:
    def test_error_reduction_ratio(self):
        rng = np.random.default_rng(12)
        model = random_model(rng, n=2, m=2)
        psi = random_state(rng, 2)
        rho0 = embed_pure(PureHybridState(psi, 1), m=2)

        def final_state(dt):
            out = integrate_master(model, rho0, IntegratorConfig(dt=dt, t_max=1.0, record_every=10**9))
            return out[-1][1].blocks

        ref = final_state(0.04 / 8)
        err1 = np.abs(final_state(0.04) - ref).max()
        err2 = np.abs(final_state(0.02) - ref).max()
        ratio = err1 / err2
        assert 8.0 <= ratio <= 32.0


class TestIntegratorConfig:
    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValidationError):
            IntegratorConfig(dt=0.0, t_max=1.0)

    def test_rejects_dt_above_t_max(self):
        with pytest.raises(ValidationError):
            IntegratorConfig(dt=2.0, t_max=1.0)

    def test_rejects_non_multiple_span(self):
        cfg = IntegratorConfig(dt=0.3, t_max=1.0)
        with pytest.raises(ValidationError, match="multiple"):
            _ = cfg.n_steps
