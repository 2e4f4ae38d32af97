import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.services.lindblad import (
    CoefficientDomain,
    ControlChannel,
    ControlledLindbladGenerator,
    affine_superoperators,
    apply_generator,
    dissipator_superoperator,
    extract_hamiltonian_and_noise,
    generator_superoperator,
    hamiltonian_superoperator,
    is_lindblad,
    lindblad_superoperator,
    sample_admissible_controls,
    validate_affine_span,
    validate_controls,
)
from src.services.operators import PAULI_MATRICES, Superoperator, random_hermitian, random_operator
from src.utils import CertificateError, DimensionMismatchError, ValidationError

X, Y, Z = (PAULI_MATRICES[c] for c in "XYZ")


def _traceless(A):
    return A - np.trace(A) / A.shape[0] * np.eye(A.shape[0])


class TestGeneratorConstruction:
    def test_non_hermitian_drift_rejected(self):
        with pytest.raises(ValidationError):
            ControlledLindbladGenerator(2, np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_negative_dissipator_domain_rejected(self):
        with pytest.raises(ValidationError):
            ControlChannel.dissipator(Z, "d", CoefficientDomain(-1.0, None))

    def test_channel_dimension_must_match(self):
        with pytest.raises(DimensionMismatchError):
            ControlledLindbladGenerator(2, Z, channels=(ControlChannel.hamiltonian(np.eye(3), "h"),))

    def test_duplicate_labels_rejected(self):
        channels = (ControlChannel.hamiltonian(X, "u"), ControlChannel.hamiltonian(Y, "u"))
        with pytest.raises(ValidationError):
            ControlledLindbladGenerator(2, Z, channels=channels)

    def test_channel_lookup(self, random_controlled_generator):
        gen = random_controlled_generator
        assert gen.channel_labels == ["h", "d"]
        assert gen.channel_index("d") == 1
        with pytest.raises(ValidationError):
            gen.channel_index("missing")


class TestControls:
    def test_out_of_domain_control_rejected(self, random_controlled_generator):
        with pytest.raises(ValidationError):
            validate_controls(random_controlled_generator, [0.5, -0.1])
        with pytest.raises(ValidationError):
            validate_controls(random_controlled_generator, [0.5])

    def test_samples_stay_admissible(self, random_controlled_generator, rng):
        gen = random_controlled_generator
        samples = sample_admissible_controls(gen, rng, n_random=6)
        assert len(samples) == 4 + 1 + 6
        for u in samples:
            validate_controls(gen, u)

    def test_degenerate_domain_fails_affine_span(self):
        channel = ControlChannel.hamiltonian(X, "frozen", CoefficientDomain(1.0, 1.0))
        gen = ControlledLindbladGenerator(2, Z, channels=(channel,))
        with pytest.raises(ValidationError):
            validate_affine_span(gen)


class TestGeneratorAction:
    def test_superoperator_matches_operator_action(self, random_controlled_generator, rng):
        gen = random_controlled_generator
        u = [0.7, 1.3]
        O = random_hermitian(3, rng)
        assert_allclose(generator_superoperator(gen, u)(O), apply_generator(gen, u, O), atol=1e-12)

    def test_affine_decomposition(self, random_controlled_generator):
        gen = random_controlled_generator
        drift, parts = affine_superoperators(gen)
        assert len(parts) == 2
        u = [-0.8, 1.5]
        combined = drift.matrix + u[0] * parts[0].matrix + u[1] * parts[1].matrix
        assert_allclose(combined, generator_superoperator(gen, u).matrix, atol=1e-12)

    def test_generator_annihilates_identity(self, random_controlled_generator):
        assert_allclose(apply_generator(random_controlled_generator, [0.4, 0.9], np.eye(3)), 0.0, atol=1e-12)

    def test_self_adjointness_preserved_on_sampled_controls(self, random_controlled_generator, rng):
        gen = random_controlled_generator
        samples = sample_admissible_controls(gen, rng, n_random=100)
        assert len(samples) >= 100
        for u in samples:
            O = random_hermitian(3, rng)
            image = apply_generator(gen, u, O)
            assert_allclose(image, image.conj().T, atol=1e-12)

    def test_heisenberg_dephasing(self):
        D = dissipator_superoperator(np.sqrt(0.5) * Z)
        assert_allclose(D(X), -X, atol=1e-14)
        assert_allclose(D(Z), 0.0, atol=1e-14)

    def test_hamiltonian_part(self):
        assert_allclose(hamiltonian_superoperator(X)(Z), 2.0 * Y, atol=1e-14)


class TestLindbladCertificate:
    def test_random_generator_passes(self, rng):
        n = 3
        S = lindblad_superoperator(random_hermitian(n, rng), [random_operator(n, rng), random_operator(n, rng)])
        certificate = is_lindblad(S)
        assert certificate.is_lindblad
        assert certificate.passed
        assert certificate.reconstruction_residual <= 1e-10
        rebuilt = lindblad_superoperator(certificate.hamiltonian, certificate.noise_ops)
        assert_allclose(rebuilt.matrix, S.matrix, atol=1e-9)

    def test_hamiltonian_is_recovered(self, rng):
        H = _traceless(random_hermitian(3, rng))
        certificate = is_lindblad(hamiltonian_superoperator(H))
        assert certificate.passed
        assert certificate.noise_ops == ()
        assert_allclose(certificate.hamiltonian, H, atol=1e-9)

    def test_noise_operators_are_traceless_and_sorted(self, rng):
        S = lindblad_superoperator(np.zeros((2, 2)), [2.0 * Z, 0.5 * X])
        H, noise = extract_hamiltonian_and_noise(S)
        assert len(noise) == 2
        assert np.linalg.norm(noise[0]) >= np.linalg.norm(noise[1])
        for L in noise:
            assert abs(np.trace(L)) <= 1e-10
        assert_allclose(H, 0.0, atol=1e-10)

    def test_negative_rate_rejected(self):
        S = dissipator_superoperator(Z).scaled(-1.0)
        certificate = is_lindblad(S)
        assert not certificate.is_lindblad
        assert certificate.kossakowski_min_eigenvalue < 0
        with pytest.raises(CertificateError):
            extract_hamiltonian_and_noise(S)

    def test_non_unital_map_rejected(self):
        certificate = is_lindblad(Superoperator.identity(2))
        assert not certificate.is_unital
        assert not certificate.passed
