import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qadv.errors import ValidationError
from qadv.qmat import (
    RECON_TOL,
    UNITARY_TOL,
    hermitian_eig,
    random_density,
    random_hermitian,
    schatten_distance,
    schatten_norm,
    trace_inner,
    validate_density,
    validate_povm,
)
from qadv.seeding import substream

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestHermitianEig:
    def test_diagonal(self):
        res = hermitian_eig(np.diag([0.3, 0.7]).astype(complex))
        assert np.allclose(res.eigenvalues, [0.3, 0.7])
        assert np.allclose(res.basis, np.eye(2))

    def test_degenerate_identity(self):
        res = hermitian_eig(np.eye(2, dtype=complex))
        assert np.allclose(res.eigenvalues, [1.0, 1.0])

    def test_pauli_x_spectrum(self):
        res = hermitian_eig(SX)
        assert np.allclose(res.eigenvalues, [-1.0, 1.0])

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_reconstruction_and_unitarity_random(self):
        rng = substream(1)
        worst_recon = 0.0
        worst_unit = 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 5))
            m = random_hermitian(rng, d)
            res = hermitian_eig(m)
            recon = (res.basis * res.eigenvalues) @ res.basis.conj().T
            worst_recon = max(worst_recon, float(np.max(np.abs(recon - m))))
            gram = res.basis.conj().T @ res.basis
            worst_unit = max(worst_unit, float(np.max(np.abs(gram - np.eye(d)))))
        assert worst_recon < RECON_TOL
        assert worst_unit < UNITARY_TOL

    def test_phase_convention_deterministic(self):
        rng = substream(2)
        m = random_hermitian(rng, 3)
        a = hermitian_eig(m)
        b = hermitian_eig(m.copy())
        assert np.array_equal(a.basis, b.basis)
        for k in range(3):
            col = a.basis[:, k]
            first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert abs(first.imag) < 1e-12 and first.real > 0


class TestSchatten:
    def test_p1_diagonal(self):
        assert schatten_norm(np.diag([1.0, -1.0]), 1) == pytest.approx(2.0)

    def test_pinf_diagonal(self):
        assert schatten_norm(np.diag([1.0, -1.0]), math.inf) == pytest.approx(1.0)

    def test_p2_diagonal(self):
        assert schatten_norm(np.diag([0.5, -0.5]), 2) == pytest.approx(1 / math.sqrt(2))

    def test_rejects_p_below_one(self):
        with pytest.raises(ValidationError):
            schatten_norm(np.eye(2), 0.5)

    def test_distance_orthogonal_pure(self):
        assert schatten_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 1) == pytest.approx(2.0)

    def test_distance_pure_to_mixed_pinf(self):
        assert schatten_distance(np.diag([1.0, 0.0]), np.eye(2) / 2, math.inf) == pytest.approx(0.5)

    def test_distance_self_zero(self, rng):
        rho = random_density(rng, 3)
        assert schatten_distance(rho, rho, 1) == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            schatten_distance(np.eye(2), np.eye(3), 1)

    @given(st.integers(min_value=0, max_value=10_000), st.sampled_from([2, 3, 4]))
    @settings(max_examples=60, deadline=None)
    def test_norm_ordering_and_dimension_factor(self, seed, d):
        # p <= p': ||m||_p' <= ||m||_p <= d^(1/p - 1/p') ||m||_p'
        m = random_hermitian(substream(3, seed), d)
        for p, q in ((1.0, 2.0), (2.0, math.inf), (1.0, math.inf)):
            np_, nq = schatten_norm(m, p), schatten_norm(m, q)
            inv_p = 0.0 if math.isinf(p) else 1 / p
            inv_q = 0.0 if math.isinf(q) else 1 / q
            assert nq <= np_ + 1e-12
            assert np_ <= d ** (inv_p - inv_q) * nq + 1e-12

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, seed):
        rng = substream(4, seed)
        a, b, c = (random_density(rng, 3) for _ in range(3))
        for p in (1.0, 2.0, math.inf):
            assert schatten_distance(a, c, p) <= (
                schatten_distance(a, b, p) + schatten_distance(b, c, p) + 1e-12
            )


class TestTraceInner:
    def test_identity_times_density(self, rng):
        rho = random_density(rng, 4)
        assert trace_inner(np.eye(4), rho) == pytest.approx(1.0)

    def test_diagonal_product(self):
        assert trace_inner(np.diag([1.0, 0.0]), np.diag([0.7, 0.3])) == pytest.approx(0.7)

    def test_orthogonal_paulis(self):
        assert trace_inner(SX, SZ) == pytest.approx(0.0)

    def test_symmetry(self, rng):
        a = random_hermitian(rng, 3)
        b = random_hermitian(rng, 3)
        assert trace_inner(a, b) == pytest.approx(trace_inner(b, a))


class TestValidation:
    def test_valid_density(self):
        dm = validate_density(np.diag([0.5, 0.5]).astype(complex))
        assert dm.dim == 2

    def test_psd_violation_magnitude(self):
        with pytest.raises(ValidationError) as err:
            validate_density(np.diag([1.2, -0.2]).astype(complex))
        assert err.value.violation == pytest.approx(0.2)

    def test_trace_violation(self):
        with pytest.raises(ValidationError):
            validate_density(np.diag([0.6, 0.6]).astype(complex))

    def test_clamps_boundary_noise(self):
        dm = validate_density(np.diag([1.0 + 4e-10, -4e-10]).astype(complex))
        assert dm.min_eig() >= 0.0

    def test_projective_povm(self):
        povm = validate_povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
        assert povm.num_classes == 2

    def test_povm_completeness_violation(self):
        with pytest.raises(ValidationError):
            validate_povm([np.diag([1.0, 0.0]), np.diag([0.0, 0.9])])

    def test_povm_psd_violation(self):
        with pytest.raises(ValidationError):
            validate_povm([np.diag([1.1, 0.0]), np.diag([-0.1, 1.0])])

    def test_immutable(self):
        dm = validate_density(np.diag([0.5, 0.5]).astype(complex))
        with pytest.raises(ValueError):
            dm.mat[0, 0] = 9.0
