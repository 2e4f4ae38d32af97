"""
Simulation Service
Expectation trajectories of full or reduced models under piecewise-constant
controls, and seeded full-versus-reduced comparisons.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import __version__
from ..config import get_config
from ..models.schemas import ComparisonReport, ModelFile, TrajectoryFile
from ..utils import (
    DimensionMismatchError,
    ErrorContext,
    Timer,
    generate_run_id,
    make_rng,
    service_error_handler,
    validate_and_raise,
)
from .central_spin import analytic_central_spin, parameters_from_metadata
from .model_io import (
    LoadedReducedModel,
    ParsedModel,
    load_reduced_model,
    model_fingerprint,
    model_from_file,
    read_model_document,
    trajectory_file,
)
from .operators import Operator
from .propagation import (
    ComparisonOutcome,
    ControlSchedule,
    PropagationModel,
    compare_full_reduced,
    expectation_values,
    random_schedule,
    random_states,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimulationTarget:
    """A model file or a reduced-model file ready for propagation."""
    parsed: ParsedModel
    reduced: Optional[LoadedReducedModel] = None

    @property
    def is_reduced(self) -> bool:
        return self.reduced is not None

    @property
    def input_dim(self) -> int:
        """Dimension of the states and observables the target accepts."""
        return self.reduced.maps.dim_H if self.reduced is not None else self.parsed.generator.dim_H

    def propagation_model(self, state_dim: Optional[int] = None) -> PropagationModel:
        """Propagation model; a reduced target fed reduced-space states skips the maps."""
        gen = self.parsed.generator
        if self.reduced is None:
            return PropagationModel.full(gen, self.parsed.observables)
        maps = self.reduced.maps
        if state_dim is not None and state_dim == gen.dim_H and state_dim != maps.dim_H:
            return PropagationModel.reduced(gen, maps.block_dims, None, self.parsed.observables)
        return PropagationModel.reduced(gen, maps.block_dims, maps, self.parsed.observables)


class SimulationService:
    """Simulate and compare workflows."""

    def __init__(self):
        self.config = get_config()
        self._simulations = 0
        self._comparisons = 0
        self._failed_comparisons = 0
        logger.info("Simulation service initialized")

    def load_target(self, path) -> SimulationTarget:
        document = read_model_document(path)
        if isinstance(document, ModelFile):
            return SimulationTarget(model_from_file(document))
        loaded = load_reduced_model(document, self.config.tolerances.struct)
        return SimulationTarget(loaded.model, loaded)

    @service_error_handler
    def simulate(self, target: SimulationTarget, schedule: ControlSchedule, rho: Operator,
                 observables: Optional[Sequence[str]] = None, sample_times=None,
                 num_samples: Optional[int] = None) -> TrajectoryFile:
        """Expectation trajectories of the selected observables (all by default)."""
        rho = np.asarray(rho, dtype=complex)
        accepted = sorted({target.input_dim, target.parsed.generator.dim_H})
        if rho.ndim != 2 or rho.shape[0] not in accepted:
            raise DimensionMismatchError(f"State has shape {rho.shape}, target accepts dimensions {accepted}",
                                         details={"accepted": accepted})
        model = target.propagation_model(rho.shape[0])
        labels = list(observables) if observables else [label for label, _ in target.parsed.observables]
        validate_and_raise(len(labels) > 0, "Nothing to simulate: the model has no observables")
        times = sample_times if sample_times is not None else schedule.default_times(
            num_samples or self.config.simulation.compare_samples)

        with ErrorContext("simulate", {"n": model.dim_H, "segments": len(schedule.segments)}):
            state = model.prepare_state(rho)
            ops = [model.prepare_observable(label) for label in labels]
            values, imag_residual = expectation_values(model, schedule, [state], ops, times)
        if imag_residual > self.config.tolerances.num:
            logger.warning(f"Expectation values carry imaginary residue {imag_residual:.2e}")
        self._simulations += 1
        return trajectory_file(np.asarray(times, dtype=float).reshape(-1),
                               {label: values[:, 0, k].real for k, label in enumerate(labels)})

    def _analytic_entries(self, parsed: ParsedModel, full: PropagationModel, states: Sequence[Operator],
                          schedules: Sequence[ControlSchedule], labels: Sequence[str], num_samples: int,
                          tol: float) -> List[Dict[str, Any]]:
        """Deviation of the analytic block oracle from the full model, per trajectory."""
        params = parameters_from_metadata(parsed.metadata)
        ops = [full.prepare_observable(label) for label in labels]
        prepared = [full.prepare_state(rho) for rho in states]
        entries = []
        for j, schedule in enumerate(schedules):
            times = schedule.default_times(num_samples)
            values, _ = expectation_values(full, schedule, prepared, ops, times)
            for s, rho in enumerate(states):
                for k, label in enumerate(labels):
                    analytic = analytic_central_spin(params, schedule, rho, label, times).values
                    reference = values[:, s, k].real
                    deviation = float(np.max(np.abs(analytic - reference)))
                    scale = float(np.max(np.abs(reference)))
                    entries.append({
                        "state_index": s,
                        "schedule_index": j,
                        "observable": f"{label} (analytic)",
                        "max_deviation": deviation,
                        "scale": scale,
                        "passed": deviation <= tol * (1.0 + scale),
                    })
        return entries

    @service_error_handler
    def compare(self, parsed: ParsedModel, reduced: LoadedReducedModel, num_states: Optional[int] = None,
                num_schedules: Optional[int] = None, num_segments: Optional[int] = None,
                num_samples: Optional[int] = None, seed: Optional[int] = None,
                tolerance: Optional[float] = None, observables: Optional[Sequence[str]] = None,
                segment_duration: Optional[float] = None, analytic: bool = False,
                max_workers: Optional[int] = None) -> Tuple[ComparisonReport, ComparisonOutcome]:
        """Seeded random states and schedules through both models; the report carries pass or fail."""
        sim = self.config.simulation
        seed = self.config.seed if seed is None else seed
        num_states = sim.compare_states if num_states is None else num_states
        num_schedules = sim.compare_schedules if num_schedules is None else num_schedules
        num_segments = sim.compare_segments if num_segments is None else num_segments
        num_samples = sim.compare_samples if num_samples is None else num_samples
        tolerance = self.config.tolerances.compare if tolerance is None else tolerance
        segment_duration = sim.segment_duration if segment_duration is None else segment_duration
        validate_and_raise(num_states > 0, "Comparison needs at least one state")
        validate_and_raise(num_schedules > 0, "Comparison needs at least one schedule")
        validate_and_raise(num_segments > 0, "Schedules need at least one segment")
        validate_and_raise(num_samples > 1, "Comparison needs at least two sample times")

        gen = parsed.generator
        if reduced.maps.dim_H != gen.dim_H:
            raise DimensionMismatchError(
                f"Reduced model was built from a {reduced.maps.dim_H}-dimensional model, this one has {gen.dim_H}")
        warnings: List[str] = []
        fingerprint_match = model_fingerprint(parsed.source) == reduced.source_fingerprint
        if not fingerprint_match:
            message = "Reduced model was not built from this model (fingerprint mismatch)"
            logger.error(message)
            warnings.append(message)

        labels = list(observables) if observables else [label for label, _ in parsed.observables]
        validate_and_raise(len(labels) > 0, "Nothing to compare: the model has no observables")
        known = dict(parsed.observables)
        missing = [label for label in labels if label not in known]
        validate_and_raise(not missing, f"Unknown observables {missing}")

        rng = make_rng(seed)
        states = random_states(gen.dim_H, rng, num_states)
        schedules = [random_schedule(gen, rng, num_segments, segment_duration,
                                     self.config.certificates.unbounded_control_scale)
                     for _ in range(num_schedules)]

        full = PropagationModel.full(gen, parsed.observables)
        reduced_model = PropagationModel.reduced(reduced.generator, reduced.maps.block_dims, reduced.maps)
        with Timer(f"Comparison ({num_schedules} schedules x {num_states} states)"):
            outcome = compare_full_reduced(full, reduced_model, [(label, known[label]) for label in labels],
                                           states, schedules, num_samples=num_samples, tol=tolerance,
                                           max_workers=max_workers or sim.max_workers)

        if analytic:
            if parsed.metadata.get("generator") == "central_spin" and not parsed.metadata.get("bath_dissipation"):
                outcome.entries.extend(self._analytic_entries(parsed, full, states, schedules, labels,
                                                              num_samples, tolerance))
            else:
                warnings.append("Analytic oracle skipped: model is not a Hamiltonian-controlled central spin")

        passed = outcome.passed and fingerprint_match
        report = ComparisonReport(
            run_id=generate_run_id(),
            version=__version__,
            seed=seed,
            tolerance=tolerance,
            n=gen.dim_H,
            n_reduced=reduced.generator.dim_H,
            num_samples=num_samples,
            max_deviation=outcome.max_deviation,
            passed=passed,
            fingerprint_match=fingerprint_match,
            full_seconds=outcome.full_seconds,
            reduced_seconds=outcome.reduced_seconds,
            speedup=outcome.speedup,
            entries=outcome.entries,
            warnings=warnings,
        )
        self._comparisons += 1
        if not passed:
            self._failed_comparisons += 1
        return report, outcome

    def get_service_stats(self) -> Dict[str, Any]:
        """Get service statistics."""
        return {
            "service": "simulation",
            "stats": {
                "simulations": self._simulations,
                "comparisons": self._comparisons,
                "failed_comparisons": self._failed_comparisons,
                "max_workers": self.config.simulation.max_workers,
            }
        }


# Service instance
_simulation_service = None


def get_simulation_service() -> SimulationService:
    """Get or create the simulation service instance."""
    global _simulation_service
    if _simulation_service is None:
        _simulation_service = SimulationService()
    return _simulation_service
