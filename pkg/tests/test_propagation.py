import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.services.lindblad import CoefficientDomain, ControlChannel, ControlledLindbladGenerator
from src.services.operators import PAULI_MATRICES, random_hermitian
from src.services.propagation import (
    ControlSchedule,
    PropagationModel,
    compare_full_reduced,
    expectation_trajectory,
    propagate_heisenberg,
    random_schedule,
    random_states,
)
from src.services.reduction_service import ReductionService
from src.utils import ScheduleError

X, Y, Z = (PAULI_MATRICES[c] for c in "XYZ")
UP = np.diag([1.0, 0.0]).astype(complex)


def _dephasing_model(gamma):
    return PropagationModel.full(ControlledLindbladGenerator(2, np.zeros((2, 2)), (np.sqrt(gamma) * Z,)))


class TestAnalyticTrajectories:
    def test_rabi_oscillation(self, rabi_generator):
        model = PropagationModel.full(rabi_generator)
        schedule = ControlSchedule.constant([], 2.0)
        times = np.linspace(0.0, 2.0, 21)
        trajectory = expectation_trajectory(model, schedule, UP, Z, times)
        assert_allclose(trajectory.values, np.cos(2.0 * times), atol=1e-10)
        assert trajectory.imag_residual <= 1e-12

    def test_dephasing_decay(self, plus_state):
        gamma = 0.3
        times = np.linspace(0.0, 3.0, 31)
        trajectory = expectation_trajectory(_dephasing_model(gamma), ControlSchedule.constant([], 3.0),
                                            plus_state(1), X, times)
        assert_allclose(trajectory.values, np.exp(-2.0 * gamma * times), atol=1e-10)

    def test_identity_is_preserved(self, random_controlled_generator, rng):
        model = PropagationModel.full(random_controlled_generator)
        schedule = random_schedule(random_controlled_generator, rng, 4)
        trajectory = propagate_heisenberg(model, schedule, np.eye(3), [0.0, schedule.total_duration])
        for O in trajectory.values:
            assert_allclose(O, np.eye(3), atol=1e-10)

    def test_hermitian_observables_stay_hermitian(self, random_controlled_generator, rng):
        model = PropagationModel.full(random_controlled_generator)
        schedule = random_schedule(random_controlled_generator, rng, 6, segment_duration=0.3)
        B = random_hermitian(3, rng)
        times = np.linspace(0.0, schedule.total_duration, 9)
        for O in propagate_heisenberg(model, schedule, B, times).values:
            assert_allclose(O, O.conj().T, atol=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_operator_norm_never_grows(self, random_controlled_generator, seed):
        rng = np.random.default_rng(seed)
        model = PropagationModel.full(random_controlled_generator)
        schedule = random_schedule(random_controlled_generator, rng, 5, segment_duration=0.4, scale=2.0)
        B = random_hermitian(3, rng)
        bound = np.linalg.norm(B, 2)
        times = np.linspace(0.0, schedule.total_duration, 11)
        for O in propagate_heisenberg(model, schedule, B, times).values:
            assert np.linalg.norm(O, 2) <= bound * (1.0 + 1e-9)


class TestScheduleSemantics:
    def test_splitting_a_segment_changes_nothing(self, random_controlled_generator, rng):
        gen = random_controlled_generator
        model = PropagationModel.full(gen)
        schedule = random_schedule(gen, rng, 3)
        O = np.diag([1.0, -1.0, 0.5]).astype(complex)
        end = [schedule.total_duration]
        whole = propagate_heisenberg(model, schedule, O, end).values[-1]
        split = propagate_heisenberg(model, schedule.split(1, 0.3), O, end).values[-1]
        assert_allclose(split, whole, atol=1e-10)

    def test_concatenation_applies_later_segments_on_the_left(self, random_controlled_generator, rng):
        gen = random_controlled_generator
        model = PropagationModel.full(gen)
        first, second = random_schedule(gen, rng, 2), random_schedule(gen, rng, 2)
        O = np.diag([1.0, -1.0, 0.5]).astype(complex)
        after_first = propagate_heisenberg(model, first, O, [first.total_duration]).values[-1]
        chained = propagate_heisenberg(model, second, after_first, [second.total_duration]).values[-1]
        joined = first.concatenate(second)
        direct = propagate_heisenberg(model, joined, O, [joined.total_duration]).values[-1]
        assert_allclose(direct, chained, atol=1e-10)

    def test_sample_times_inside_segments(self, rabi_generator):
        model = PropagationModel.full(rabi_generator)
        schedule = ControlSchedule(((0.5, []), (0.7, []), (0.3, [])))
        times = [0.0, 0.25, 0.5, 0.9, 1.2, 1.5]
        trajectory = expectation_trajectory(model, schedule, UP, Z, times)
        assert_allclose(trajectory.values, np.cos(2.0 * np.asarray(times)), atol=1e-10)

    def test_non_positive_duration_rejected(self):
        with pytest.raises(ScheduleError):
            ControlSchedule(((0.0, [1.0]),))
        with pytest.raises(ScheduleError):
            ControlSchedule(((-0.5, [1.0]),))

    def test_empty_schedule_rejected(self):
        with pytest.raises(ScheduleError):
            ControlSchedule(())

    def test_times_outside_or_unsorted_rejected(self, rabi_generator):
        model = PropagationModel.full(rabi_generator)
        schedule = ControlSchedule.constant([], 1.0)
        with pytest.raises(ScheduleError):
            expectation_trajectory(model, schedule, UP, Z, [0.0, 1.5])
        with pytest.raises(ScheduleError):
            expectation_trajectory(model, schedule, UP, Z, [0.5, 0.2])

    def test_negative_dissipator_control_rejected(self):
        channel = ControlChannel.dissipator(Z, "g", CoefficientDomain(0.0, None))
        model = PropagationModel.full(ControlledLindbladGenerator(2, X, channels=(channel,)))
        with pytest.raises(ScheduleError):
            expectation_trajectory(model, ControlSchedule.constant([-0.1], 1.0), UP, Z, [1.0])


class TestFullVersusReduced:
    def test_central_spin_comparison_passes(self, central_spin_n1, rng):
        parsed = central_spin_n1
        outcome = ReductionService().reduce(parsed, "observable", seed=3)
        reduced = outcome.reduced
        full_model = PropagationModel.full(parsed.generator)
        reduced_model = PropagationModel.reduced(reduced.generator, reduced.block_dims, reduced.maps)
        schedules = [random_schedule(parsed.generator, rng, 10) for _ in range(2)]
        comparison = compare_full_reduced(full_model, reduced_model, parsed.observables,
                                          random_states(4, rng, 2), schedules, num_samples=25)
        assert comparison.passed
        assert comparison.max_deviation <= 1e-8
        assert len(comparison.entries) == 2 * 2 * len(parsed.observables)

    def test_reduced_model_uses_fewer_coordinates(self, central_spin_n1):
        reduced = ReductionService().reduce(central_spin_n1, "observable", seed=3).reduced
        reduced_model = PropagationModel.reduced(reduced.generator, reduced.block_dims, reduced.maps)
        assert reduced_model.is_reduced
        assert reduced_model.num_coordinates == 8
