from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.services.central_spin import bath_state_index, central_spin_betas
from src.services.krylov import observable_space
from src.services.lindblad import ControlChannel, ControlledLindbladGenerator, apply_generator, is_lindblad
from src.services.model_io import model_from_file, serialize_model
from src.services.operators import PAULI_MATRICES, orthonormalize, pauli_string, random_density, random_hermitian
from src.services.reduction import (
    build_reduction_maps,
    map_J,
    map_J_adjoint,
    map_R,
    map_state,
    reduce_generator,
    verify_projector,
)
from src.services.reduction_service import ReductionService
from src.services.star_algebra import algebra_closure, wedderburn
from src.utils import CertificateError, ValidationError

X, Z = PAULI_MATRICES["X"], PAULI_MATRICES["Z"]


@pytest.fixture
def local_diagonal_maps():
    A = algebra_closure(orthonormalize([pauli_string("XI"), pauli_string("ZI"), pauli_string("IZ")]))
    return A, build_reduction_maps(wedderburn(A, seed=4))


@pytest.fixture
def multiplicity_maps():
    A = algebra_closure(orthonormalize([pauli_string("XI"), pauli_string("ZI")]))
    return A, build_reduction_maps(wedderburn(A, seed=4))


class TestReductionMaps:
    def test_projector_certificate(self, local_diagonal_maps):
        A, maps = local_diagonal_maps
        report = verify_projector(maps, A, seed=1)
        assert report.passed
        assert report.image_dim == A.dim == 8
        assert report.idempotence_residual <= 1e-10
        assert min(report.choi_min_projector, report.choi_min_reduce, report.choi_min_inject) >= -1e-9

    def test_projector_with_multiplicity(self, multiplicity_maps):
        A, maps = multiplicity_maps
        assert maps.dim_reduced == 2
        report = verify_projector(maps, A, seed=1)
        assert report.passed
        assert report.image_dim == 4

    def test_algebra_elements_survive_the_round_trip(self, multiplicity_maps, rng):
        A, maps = multiplicity_maps
        B = np.tensordot(rng.normal(size=A.dim), A.basis, axes=1)
        assert_allclose(map_J(maps, map_R(maps, B)), B, atol=1e-10)

    def test_reduced_identity_and_state(self, multiplicity_maps, rng):
        _, maps = multiplicity_maps
        assert_allclose(map_R(maps, np.eye(4)), np.eye(2), atol=1e-12)
        rho = random_density(4, rng)
        reduced = map_state(maps, rho)
        assert np.trace(reduced).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(reduced)[0] >= -1e-12

    def test_duality_of_state_and_observable_maps(self, local_diagonal_maps, rng):
        A, maps = local_diagonal_maps
        rho = random_density(4, rng)
        B = np.tensordot(rng.normal(size=A.dim), A.basis, axes=1)
        full = np.trace(B @ rho)
        reduced = np.trace(map_R(maps, B) @ map_J_adjoint(maps, rho))
        assert reduced == pytest.approx(full)

    def test_off_block_input_rejected(self, local_diagonal_maps):
        _, maps = local_diagonal_maps
        with pytest.raises(ValidationError):
            map_J(maps, np.ones((maps.dim_reduced, maps.dim_reduced)))


class TestReducedGenerator:
    def test_central_spin_reduction_is_certified(self, central_spin_n1):
        parsed = central_spin_n1
        outcome = ReductionService().reduce(parsed, "observable", seed=3)
        assert outcome.passed
        assert outcome.report.n_reduced == 4
        assert outcome.report.blocks == [(2, 1), (2, 1)]
        assert not outcome.report.no_reduction
        labels = [c.label for c in outcome.report.certificates]
        assert labels[:3] == ["drift", "channel:u0", "channel:u1"]
        assert all(label.startswith("sample:") for label in labels[3:])

    def test_certificates_report_exactness_separately(self, central_spin_n1):
        outcome = ReductionService().reduce(central_spin_n1, "observable", seed=3)
        for summary in outcome.report.certificates:
            assert summary.exact is True
            assert summary.construction_consistent is True
            assert summary.restriction_residual <= outcome.report.tolerances["struct"]

    def test_restriction_residual_alone_decides_exactness(self, central_spin_n1):
        outcome = ReductionService().reduce(central_spin_n1, "observable", seed=3)
        record = outcome.reduced.certificates[0]
        broken = replace(record, restriction_residual=10 * record.struct_tol)
        assert broken.construction_consistent
        assert not broken.exact
        assert not broken.passed
        summary = broken.to_summary()
        assert summary["exact"] is False
        assert summary["construction_consistent"] is True

    @pytest.mark.parametrize("N", [1, 2])
    def test_block_hamiltonians(self, central_spin_factory, N):
        parsed = central_spin_factory(N, seed=21)
        reduced = ReductionService().reduce(parsed, "observable", seed=3).reduced
        betas = central_spin_betas(parsed.metadata["J"], N)
        gen = reduced.generator
        assert reduced.block_dims == [2] * 2 ** N
        assert gen.noise_drift == ()
        for k in range(2 ** N):
            s = slice(2 * k, 2 * k + 2)
            q = bath_state_index(k, N)
            assert_allclose(gen.H0[s, s], betas[q] * Z, atol=1e-9)
            assert_allclose(gen.channels[0].operator[s, s], X, atol=1e-9)
            assert_allclose(gen.channels[1].operator[s, s], Z, atol=1e-9)

    def test_identity_only_reduces_to_a_point(self, random_controlled_generator):
        parsed = model_from_file(serialize_model(random_controlled_generator))
        outcome = ReductionService().reduce(parsed, "observable", seed=1)
        assert outcome.report.n_reduced == 1
        assert outcome.report.blocks == [(1, 3)]
        assert outcome.passed

    def test_full_observable_set_gives_no_reduction(self, rng):
        gen = ControlledLindbladGenerator(2, random_hermitian(2, rng), (0.4 * Z,),
                                          (ControlChannel.hamiltonian(X, "x"),))
        observables = [("X", X), ("Z", Z)]
        parsed = model_from_file(serialize_model(gen, observables))
        outcome = ReductionService().reduce(parsed, "observable", seed=1)
        assert outcome.report.no_reduction
        assert outcome.report.n_reduced == 2
        assert outcome.passed
        assert any("No reduction" in w for w in outcome.report.warnings)

    def test_reduced_parts_are_lindblad(self, central_spin_n1):
        outcome = ReductionService().reduce(central_spin_n1, "observable", seed=3)
        for part in (outcome.reduced.reduced_drift, *outcome.reduced.reduced_channels):
            certificate = is_lindblad(part)
            assert certificate.hermiticity_residual <= 1e-10
            assert certificate.is_unital

    def test_projector_flags_observables_outside_the_algebra(self, central_spin_n1):
        parsed = central_spin_n1
        A = algebra_closure(orthonormalize([pauli_string("XI"), pauli_string("ZI")]))
        maps = build_reduction_maps(wedderburn(A, seed=1))
        space = observable_space(parsed.generator, parsed.omega).space
        report = verify_projector(maps, A, space, seed=1)
        assert report.observable_residual > 1e-3
        assert not report.passed

    def test_failed_drift_check_raises_on_drift_path(self, central_spin_n1):
        with pytest.raises(CertificateError):
            ReductionService().reduce(central_spin_n1, "drift", seed=1)

    def test_auto_path_falls_back_to_observable_algebra(self, central_spin_n1):
        outcome = ReductionService().reduce(central_spin_n1, "auto", seed=1)
        assert outcome.report.path.value == "observable"
        assert outcome.report.drift_check is not None and not outcome.report.drift_check.holds
        assert outcome.report.dim_frame == 8
        assert any("falling back" in w for w in outcome.report.warnings)
        assert outcome.passed

    def test_observable_outside_algebra_warns(self, central_spin_n1):
        A = algebra_closure(orthonormalize([pauli_string("XI"), pauli_string("ZI"), pauli_string("IZ")]))
        maps = build_reduction_maps(wedderburn(A, seed=1))
        reduced = reduce_generator(central_spin_n1.generator, maps, [("XX", pauli_string("XX"))], seed=1)
        assert any("XX" in w for w in reduced.warnings)

    def test_reduced_generator_matches_sandwich(self, central_spin_n1):
        reduced = ReductionService().reduce(central_spin_n1, "observable", seed=3).reduced
        maps, u = reduced.maps, [0.3, -0.5]
        Y = map_R(maps, pauli_string("ZI") + 0.4 * pauli_string("XZ"))
        expected = map_R(maps, apply_generator(central_spin_n1.generator, u, map_J(maps, Y)))
        assert_allclose(reduced.reduced_generator(u)(Y), expected, atol=1e-10)
