import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.services.operators import (
    PAULI_MATRICES,
    OperatorSubspace,
    Superoperator,
    as_operator,
    check_density,
    choi_matrix,
    choi_min_eigenvalue,
    commutant,
    embed_single_site,
    hs_inner,
    operator_to_sandwich,
    orthogonal_complement,
    orthonormalize,
    pauli_string,
    random_density,
    random_operator,
    random_unitary,
    subspace_equal,
    superoperator_from_map,
    vec,
)
from src.utils import DimensionMismatchError, ValidationError

X, Y, Z, I2 = (PAULI_MATRICES[c] for c in "XYZI")


class TestPauliStrings:
    def test_leftmost_character_is_qubit_zero(self):
        assert_allclose(pauli_string("ZI"), np.kron(Z, I2))
        assert_allclose(pauli_string("IX"), embed_single_site(X, 1, 2))

    def test_ladder_characters(self):
        assert_allclose(pauli_string("+"), [[0, 1], [0, 0]])
        assert_allclose(pauli_string("+") + pauli_string("-"), X)

    def test_unknown_character_rejected(self):
        with pytest.raises(ValidationError):
            pauli_string("XQ")


class TestValidation:
    def test_non_square_rejected(self):
        with pytest.raises(ValidationError):
            as_operator(np.zeros((2, 3)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            as_operator(np.eye(2), dim=4)

    def test_density_checks(self, rng):
        rho = random_density(3, rng)
        assert_allclose(check_density(rho), rho, atol=1e-14)
        with pytest.raises(ValidationError):
            check_density(2.0 * rho)
        with pytest.raises(ValidationError):
            check_density(np.diag([1.5, -0.5]))


class TestHilbertSchmidt:
    def test_inner_product_is_trace_form(self, rng):
        A, B = random_operator(3, rng), random_operator(3, rng)
        assert hs_inner(A, B) == pytest.approx(np.trace(A.conj().T @ B))

    def test_column_stacking_identity(self, rng):
        A, B, M = (random_operator(3, rng) for _ in range(3))
        assert_allclose(vec(A @ M @ B), np.kron(B.T, A) @ vec(M), atol=1e-12)

    def test_orthonormalize_drops_dependent_operators(self):
        S = orthonormalize([I2, Z, I2 + 2.0 * Z])
        assert S.dim == 2
        assert_allclose(S.gram(), np.eye(2), atol=1e-12)
        assert S.contains(I2 - Z)
        assert not S.contains(X)

    def test_orthonormalize_keeps_input_order(self):
        S = orthonormalize([Z, I2])
        assert_allclose(S.basis[0], Z / np.sqrt(2.0), atol=1e-12)

    def test_complement(self):
        S = orthonormalize([I2, Z])
        C = orthogonal_complement(S)
        assert C.dim == 2
        assert C.contains(X) and C.contains(Y)
        assert orthogonal_complement(OperatorSubspace.full(2)) is None


class TestSuperoperators:
    def test_sandwich_choi_is_rank_one(self, rng):
        A, B = random_operator(2, rng), random_operator(2, rng)
        C = choi_matrix(operator_to_sandwich(A, B))
        assert_allclose(C, np.outer(vec(A), vec(B.conj().T).conj()), atol=1e-12)

    def test_choi_of_identity_map(self):
        C = choi_matrix(Superoperator.identity(2))
        omega = vec(np.eye(2))
        assert_allclose(C, np.outer(omega, omega), atol=1e-12)
        assert choi_min_eigenvalue(Superoperator.identity(2)) >= -1e-12

    def test_transpose_is_not_completely_positive(self):
        transpose = superoperator_from_map(lambda M: M.T, 2)
        assert choi_min_eigenvalue(transpose) == pytest.approx(-1.0)

    def test_tabulated_map_matches_action(self, rng):
        A = random_operator(3, rng)
        S = superoperator_from_map(lambda M: A @ M - M @ A, 3)
        M = random_operator(3, rng)
        assert_allclose(S(M), A @ M - M @ A, atol=1e-12)

    def test_composition_order(self, rng):
        A, B = random_operator(2, rng), random_operator(2, rng)
        left, right = operator_to_sandwich(A, np.eye(2)), operator_to_sandwich(B, np.eye(2))
        M = random_operator(2, rng)
        assert_allclose((left @ right)(M), A @ B @ M, atol=1e-12)


class TestCommutant:
    def test_commutant_of_diagonal_algebra(self):
        C = commutant(orthonormalize([I2, Z]))
        assert C.dim == 2
        assert subspace_equal(C, orthonormalize([I2, Z]), 1e-10)

    def test_commutant_of_local_algebra(self):
        local = orthonormalize([np.eye(4), pauli_string("XI"), pauli_string("YI"), pauli_string("ZI")])
        C = commutant(local)
        assert C.dim == 4
        assert C.contains(pauli_string("IY"))
        assert not C.contains(pauli_string("ZZ"))


class TestRandomObjects:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_random_unitary_is_unitary(self, n, rng):
        V = random_unitary(n, rng)
        assert V.shape == (n, n)
        assert_allclose(V @ V.conj().T, np.eye(n), atol=1e-12)

    def test_random_unitary_is_seeded(self):
        a = random_unitary(3, np.random.default_rng(8))
        b = random_unitary(3, np.random.default_rng(8))
        assert_allclose(a, b, atol=0)

    def test_random_density_is_a_state(self, rng):
        rho = random_density(4, rng)
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(rho)[0] >= -1e-12
