from dataclasses import replace

import pytest
from numpy.testing import assert_allclose

from src.services.lindblad import ControlledLindbladGenerator
from src.services.model_io import load_reduced_model, model_from_file, parse_model, serialize_model, write_json
from src.services.operators import random_density
from src.services.propagation import random_schedule
from src.services.reduction_service import ReductionService, get_reduction_service
from src.services.report_renderer import ReportRenderer
from src.services.simulation_service import SimulationService, get_simulation_service
from src.utils import DimensionMismatchError, ValidationError


@pytest.fixture
def reduced_path(tmp_path, central_spin_path):
    outcome = ReductionService().reduce(parse_model(central_spin_path), "observable", seed=3)
    path = tmp_path / "central_spin.reduced.json"
    write_json(path, outcome.document)
    return path


class TestSimulationService:
    def test_full_and_reduced_targets_agree(self, central_spin_path, reduced_path, rng):
        service = SimulationService()
        full = service.load_target(central_spin_path)
        reduced = service.load_target(reduced_path)
        assert not full.is_reduced and reduced.is_reduced
        assert reduced.input_dim == 8

        schedule = random_schedule(full.parsed.generator, rng, 6)
        rho = random_density(8, rng)
        a = service.simulate(full, schedule, rho, num_samples=11)
        b = service.simulate(reduced, schedule, rho, num_samples=11)
        assert list(a.series) == ["I0", "X0", "Y0", "Z0"]
        for label in a.series:
            assert_allclose(b.series[label], a.series[label], atol=1e-9)
        assert_allclose(a.series["I0"], 1.0, atol=1e-10)

    def test_selected_observables_and_times(self, central_spin_path, rng):
        service = SimulationService()
        target = service.load_target(central_spin_path)
        schedule = random_schedule(target.parsed.generator, rng, 3)
        result = service.simulate(target, schedule, random_density(8, rng), observables=["Z0"],
                                  sample_times=[0.0, schedule.total_duration])
        assert list(result.series) == ["Z0"]
        assert len(result.times) == 2

    def test_state_of_wrong_size_rejected(self, central_spin_path, rng):
        service = SimulationService()
        target = service.load_target(central_spin_path)
        schedule = random_schedule(target.parsed.generator, rng, 2)
        with pytest.raises(DimensionMismatchError):
            service.simulate(target, schedule, random_density(3, rng))

    def test_comparison_passes(self, central_spin_path, reduced_path):
        service = SimulationService()
        report, outcome = service.compare(parse_model(central_spin_path), load_reduced_model(reduced_path),
                                          num_states=2, num_schedules=2, num_segments=5, num_samples=20, seed=4)
        assert report.passed
        assert report.fingerprint_match
        assert report.seed == 4
        assert len(report.entries) == 2 * 2 * 4
        assert report.max_deviation == pytest.approx(outcome.max_deviation)

    def test_corrupted_reduced_drift_fails(self, central_spin_path, reduced_path):
        loaded = load_reduced_model(reduced_path)
        gen = loaded.generator
        corrupted = ControlledLindbladGenerator(gen.dim_H, 1.5 * gen.H0, gen.noise_drift, gen.channels)
        loaded = replace(loaded, model=replace(loaded.model, generator=corrupted))
        report, outcome = SimulationService().compare(parse_model(central_spin_path), loaded, num_states=2,
                                                      num_schedules=2, num_segments=5, num_samples=20, seed=4)
        assert report.fingerprint_match
        assert report.max_deviation > 1e-4 > report.tolerance
        assert not report.passed
        assert not outcome.passed

    def test_fingerprint_mismatch_fails(self, central_spin_factory, reduced_path):
        other = central_spin_factory(2, seed=6)
        report, _ = SimulationService().compare(other, load_reduced_model(reduced_path), num_states=1,
                                                num_schedules=1, num_segments=3, num_samples=10, seed=1)
        assert not report.fingerprint_match
        assert not report.passed
        assert any("fingerprint" in w for w in report.warnings)

    def test_zero_schedules_rejected(self, central_spin_path, reduced_path):
        with pytest.raises(ValidationError):
            SimulationService().compare(parse_model(central_spin_path), load_reduced_model(reduced_path),
                                        num_schedules=0)

    def test_dimension_mismatch_rejected(self, central_spin_n1, reduced_path):
        with pytest.raises(DimensionMismatchError):
            SimulationService().compare(central_spin_n1, load_reduced_model(reduced_path), num_schedules=1)


class TestReductionService:
    def test_check_on_central_spin(self, central_spin_n1):
        report = ReductionService().check(central_spin_n1, seed=1).report
        assert report.dim_frame == 8
        assert not report.frame_is_full
        assert report.verdict == "reducible"
        assert report.reducible_to == 4
        assert report.drift_check is not None and not report.drift_check.holds

    def test_check_is_inconclusive_for_a_generic_model(self, random_controlled_generator):
        parsed = model_from_file(serialize_model(random_controlled_generator))
        report = ReductionService().check(parsed, drift=False, seed=1).report
        assert report.frame_is_full
        assert report.verdict == "inconclusive"
        assert report.reducible_to == 3
        assert report.drift_check is None

    def test_reduction_report_fields(self, central_spin_n1):
        report = ReductionService().reduce(central_spin_n1, "observable", seed=3).report
        assert report.n == 4 and report.n_reduced == 4
        assert report.dim_algebra == 8
        assert report.seed == 3
        assert report.projector.passed
        assert set(report.timing) >= {"krylov", "closure", "wedderburn", "projector", "reduce"}

    def test_stats_count_runs(self, central_spin_n1):
        service = ReductionService()
        service.reduce(central_spin_n1, "observable", seed=3)
        stats = service.get_service_stats()
        assert stats["service"] == "reduction"
        assert stats["stats"]["reductions"] == 1

    def test_singletons(self):
        assert get_reduction_service() is get_reduction_service()
        assert get_simulation_service() is get_simulation_service()


class TestReportRenderer:
    def test_reduction_report_text(self, central_spin_n1):
        report = ReductionService().reduce(central_spin_n1, "observable", seed=3).report
        text = ReportRenderer().render_reduction(report)
        assert "Result: CERTIFIED" in text
        assert "2 x (2,1)" in text

    def test_comparison_report_text(self, central_spin_path, reduced_path):
        report, _ = SimulationService().compare(parse_model(central_spin_path), load_reduced_model(reduced_path),
                                                num_states=1, num_schedules=1, num_segments=3, num_samples=10)
        assert "Result: PASS" in ReportRenderer().render_comparison(report)

    def test_check_report_text(self, central_spin_n1):
        report = ReductionService().check(central_spin_n1, seed=1).report
        text = ReportRenderer().render_check(report)
        assert "reducible at least to 4" in text
        assert "fails" in text
