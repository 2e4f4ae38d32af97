import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.models.schemas import ReductionPath
from src.services.central_spin import (
    CentralSpinParameters,
    analytic_central_spin,
    bath_state_index,
    central_spin_betas,
    generate_central_spin,
    parameters_from_metadata,
)
from src.services.krylov import check_drift_reduction
from src.services.model_io import load_reduced_model
from src.services.propagation import ControlSchedule, PropagationModel, expectation_trajectory
from src.services.reduction_service import ReductionService
from src.services.simulation_service import SimulationService
from src.utils import ValidationError

J_N1 = np.array([[0.0, 0.7], [0.0, 0.3]])
GAMMAS_N1 = np.array([0.2])


def _three_way(parsed, **sizes):
    outcome = ReductionService().reduce(parsed, "observable", seed=3)
    assert outcome.passed
    loaded = load_reduced_model(outcome.document)
    report, _ = SimulationService().compare(parsed, loaded, analytic=True, **sizes)
    return report


class TestGeneratedModel:
    def test_layout(self):
        model = generate_central_spin(2, seed=5)
        assert model.dim == 8
        assert [c.label for c in model.control_channels] == ["u0", "u1"]
        assert len(model.noise_drift) == 2
        assert [o.label for o in model.observables] == ["I0", "X0", "Y0", "Z0"]

    def test_variants(self):
        model = generate_central_spin(2, seed=5, single_axis=True, bath_dissipation="collective")
        assert [c.label for c in model.control_channels] == ["u0", "u2"]
        assert model.control_channels[1].coefficient_domain == [0.0, None]

    def test_same_seed_same_couplings(self):
        assert generate_central_spin(3, seed=8) == generate_central_spin(3, seed=8)

    def test_bad_parameters_rejected(self):
        with pytest.raises(ValidationError):
            CentralSpinParameters(2, np.zeros((2, 2)), [0.1, 0.1])
        with pytest.raises(ValidationError):
            CentralSpinParameters(1, J_N1, [-0.1])
        with pytest.raises(ValidationError):
            CentralSpinParameters(1, J_N1, GAMMAS_N1, bath_dissipation="global")

    def test_parameters_from_metadata(self, central_spin_factory):
        parsed = central_spin_factory(2, seed=5, single_axis=True)
        params = parameters_from_metadata(parsed.metadata)
        assert params.N == 2
        assert params.single_axis
        assert params.bath_dissipation is None
        assert_allclose(params.J, CentralSpinParameters.random(2, seed=5).J)

    def test_metadata_from_other_generator_rejected(self):
        with pytest.raises(ValidationError):
            parameters_from_metadata({"generator": "something_else"})


class TestBlockOracle:
    @pytest.mark.parametrize("q, N, expected", [(1, 2, 2), (3, 2, 3), (1, 3, 4), (0, 1, 0)])
    def test_bath_state_index(self, q, N, expected):
        assert bath_state_index(q, N) == expected

    def test_betas(self):
        assert_allclose(central_spin_betas(J_N1, 1), [0.7, -0.7])

    def test_single_bath_qubit_coherence(self, plus_state):
        params = CentralSpinParameters(1, J_N1, GAMMAS_N1)
        schedule = ControlSchedule.constant([0.0, 0.0], 3.0)
        times = np.linspace(0.0, 3.0, 16)
        analytic = analytic_central_spin(params, schedule, plus_state(2), "x", times)
        assert_allclose(analytic.values, np.cos(1.4 * times), atol=1e-10)

    def test_full_model_matches_closed_form(self, central_spin_n1, plus_state):
        parsed = central_spin_n1
        model = PropagationModel.full(parsed.generator, parsed.observables)
        times = np.linspace(0.0, 3.0, 16)
        trajectory = expectation_trajectory(model, ControlSchedule.constant([0.0, 0.0], 3.0), plus_state(2),
                                            "X0", times)
        assert_allclose(trajectory.values, np.cos(1.4 * times), atol=1e-10)

    def test_identity_axis_is_constant(self):
        params = CentralSpinParameters.random(2, seed=3)
        schedule = ControlSchedule(((0.4, [0.3, -0.2]), (0.6, [-1.0, 0.5])))
        rho = np.eye(8) / 8
        values = analytic_central_spin(params, schedule, rho, "I0", [0.0, 0.5, 1.0]).values
        assert_allclose(values, 1.0, atol=1e-12)

    def test_dissipative_variant_rejected(self, plus_state):
        params = CentralSpinParameters(1, J_N1, GAMMAS_N1, bath_dissipation="local")
        with pytest.raises(ValidationError):
            analytic_central_spin(params, ControlSchedule.constant([0.0, 0.0, 0.0], 1.0), plus_state(2), "x", [1.0])

    def test_unknown_axis_rejected(self, plus_state):
        params = CentralSpinParameters(1, J_N1, GAMMAS_N1)
        with pytest.raises(ValidationError):
            analytic_central_spin(params, ControlSchedule.constant([0.0, 0.0], 1.0), plus_state(2), "w", [1.0])


class TestBathDissipation:
    def test_local_dissipation_keeps_the_drift_space(self, central_spin_factory):
        parsed = central_spin_factory(2, bath_dissipation="local")
        check = check_drift_reduction(parsed.generator, ["u2"], parsed.omega)
        assert check.holds

    def test_collective_dissipation_breaks_it(self, central_spin_factory):
        parsed = central_spin_factory(2, bath_dissipation="collective")
        check = check_drift_reduction(parsed.generator, ["u2"], parsed.omega)
        assert not check.holds
        assert check.perturbation_labels == ["u2"]

    def test_drift_path_with_local_dissipation(self, central_spin_factory):
        parsed = central_spin_factory(1, bath_dissipation="local")
        outcome = ReductionService().reduce(parsed, ReductionPath.AUTO, seed=2, perturbations=["u2"])
        assert outcome.report.path is ReductionPath.DRIFT
        assert outcome.report.blocks == [(2, 1), (2, 1)]
        assert outcome.passed


class TestThreeWayAgreement:
    def test_two_bath_qubits(self, central_spin_factory):
        report = _three_way(central_spin_factory(2, seed=21), num_states=2, num_schedules=2, num_segments=10,
                            num_samples=20, seed=7, tolerance=1e-8)
        assert report.passed
        assert report.fingerprint_match
        assert any(entry.observable.endswith("(analytic)") for entry in report.entries)
        assert report.max_deviation <= 1e-8

    @pytest.mark.slow
    def test_three_bath_qubits(self, central_spin_factory):
        report = _three_way(central_spin_factory(3, seed=42), num_states=5, num_schedules=5, num_segments=100,
                            num_samples=200, seed=0, tolerance=1e-8)
        assert report.passed
        assert report.n == 16
        assert report.n_reduced == 16
