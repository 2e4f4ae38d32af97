"""
Heisenberg propagation under piecewise-constant controls.

Observables follow dO/dt = L_{u(t)}(O). Within a segment the generator is
constant, so each segment contributes one matrix exponential and later
segments act on the left:

    O(t) = exp(L_{u_m} tau) exp(L_{u_{m-1}} D_{m-1}) ... exp(L_{u_1} D_1)(O)

Dynamics run on a coordinate subset of the vectorized operators: all of them
for a full model, the block-diagonal positions for a reduced one. Decoupled
coordinate components are exponentiated separately.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..utils.exceptions import DimensionMismatchError, ScheduleError, ValidationError, validate_and_raise
from .lindblad import ControlledLindbladGenerator, affine_superoperators, validate_controls
from .operators import (
    Operator,
    as_operator,
    check_density,
    hermiticity_residual,
    random_density,
    unvec,
    vec,
)
from .reduction import ReductionMaps, map_R, map_state

logger = logging.getLogger(__name__)

Segment = Tuple[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Ordered constant-control segments (duration, u)."""
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        segments = []
        for i, (duration, u) in enumerate(self.segments):
            duration = float(duration)
            if not np.isfinite(duration) or duration <= 0.0:
                raise ScheduleError(f"Segment {i} has non-positive duration {duration}",
                                    details={"segment": i, "duration": duration})
            u = np.atleast_1d(np.asarray(u, dtype=float))
            if not np.all(np.isfinite(u)):
                raise ScheduleError(f"Segment {i} has non-finite controls", details={"segment": i})
            segments.append((duration, u))
        if not segments:
            raise ScheduleError("A schedule needs at least one segment")
        widths = {u.size for _, u in segments}
        if len(widths) != 1:
            raise ScheduleError(f"Segments carry control vectors of different lengths {sorted(widths)}")
        object.__setattr__(self, "segments", tuple(segments))

    @classmethod
    def constant(cls, u: Sequence[float], duration: float) -> "ControlSchedule":
        return cls(((duration, np.asarray(u, dtype=float)),))

    @property
    def num_controls(self) -> int:
        return self.segments[0][1].size

    @property
    def total_duration(self) -> float:
        return float(sum(duration for duration, _ in self.segments))

    def validate_for(self, gen: ControlledLindbladGenerator):
        """Check control widths and coefficient domains against a model."""
        for i, (_, u) in enumerate(self.segments):
            try:
                validate_controls(gen, u)
            except ValidationError as e:
                raise ScheduleError(f"Segment {i}: {e.message}", details={"segment": i, **e.details})

    def concatenate(self, other: "ControlSchedule") -> "ControlSchedule":
        return ControlSchedule(self.segments + other.segments)

    def split(self, index: int, fraction: float) -> "ControlSchedule":
        """Same controls with segment ``index`` cut in two at the given fraction."""
        validate_and_raise(0.0 < fraction < 1.0, f"Split fraction {fraction} must lie in (0, 1)")
        duration, u = self.segments[index]
        pieces = ((duration * fraction, u), (duration * (1.0 - fraction), u))
        return ControlSchedule(self.segments[:index] + pieces + self.segments[index + 1:])

    def default_times(self, num_samples: int) -> np.ndarray:
        return np.linspace(0.0, self.total_duration, num_samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled values of one evolved quantity: reals for expectations, operators for observables."""
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    imag_residual: float = 0.0

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class PropagationModel:
    """Affine Heisenberg dynamics restricted to a set of vectorized coordinates.

    A reduced model lives on the block-diagonal coordinates of its reduced space
    and, when reduction maps are attached, accepts full-space states and
    observables and maps them through J^dag and R.
    """
    generator: ControlledLindbladGenerator
    coordinates: np.ndarray
    drift: np.ndarray
    parts: Tuple[np.ndarray, ...]
    components: Tuple[np.ndarray, ...]
    maps: Optional[ReductionMaps] = None
    block_mask: Optional[np.ndarray] = None
    observables: Tuple[Tuple[str, Operator], ...] = ()

    @classmethod
    def full(cls, gen: ControlledLindbladGenerator,
             observables: Sequence[Tuple[str, Operator]] = ()) -> "PropagationModel":
        coordinates = np.arange(gen.dim_H ** 2)
        return cls._build(gen, coordinates, None, None, observables)

    @classmethod
    def reduced(cls, gen: ControlledLindbladGenerator, block_dims: Sequence[int],
                maps: Optional[ReductionMaps] = None,
                observables: Sequence[Tuple[str, Operator]] = ()) -> "PropagationModel":
        validate_and_raise(sum(block_dims) == gen.dim_H,
                           f"Block dimensions {list(block_dims)} do not add up to {gen.dim_H}")
        mask = np.zeros((gen.dim_H, gen.dim_H), dtype=bool)
        start = 0
        for dF in block_dims:
            mask[start:start + dF, start:start + dF] = True
            start += dF
        coordinates = np.flatnonzero(vec(mask))
        return cls._build(gen, coordinates, maps, mask, observables)

    @classmethod
    def _build(cls, gen, coordinates, maps, mask, observables) -> "PropagationModel":
        drift, parts = affine_superoperators(gen)
        select = np.ix_(coordinates, coordinates)
        drift_c = drift.matrix[select]
        parts_c = tuple(part.matrix[select] for part in parts)
        pattern = np.abs(drift_c) + sum((np.abs(p) for p in parts_c), np.zeros(drift_c.shape))
        threshold = 1e-14 * max(float(pattern.max()) if pattern.size else 0.0, 1.0)
        count, labels = connected_components(csr_matrix(pattern > threshold), directed=True, connection="weak")
        components = tuple(np.flatnonzero(labels == c) for c in range(count))
        logger.debug(f"Propagation model on {len(coordinates)} coordinates, {count} decoupled components")
        return cls(gen, coordinates, drift_c, parts_c, components, maps, mask, tuple(observables))

    @property
    def dim_H(self) -> int:
        return self.generator.dim_H

    @property
    def is_reduced(self) -> bool:
        return self.block_mask is not None

    @property
    def num_coordinates(self) -> int:
        return len(self.coordinates)

    def generator_matrix(self, u) -> np.ndarray:
        u = validate_controls(self.generator, u)
        matrix = self.drift.copy()
        for value, part in zip(u, self.parts):
            if value != 0.0:
                matrix += value * part
        return matrix

    def propagator(self, u, dt: float) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Per-component exponentials of L_u dt."""
        S = self.generator_matrix(u)
        return [(idx, sla.expm(S[np.ix_(idx, idx)] * dt)) for idx in self.components]

    def prepare_observable(self, O: Union[str, Operator]) -> Operator:
        """Operator on this model's space; with reduction maps attached, operators are read as full-space ones."""
        if isinstance(O, str):
            for label, op in self.observables:
                if label == O:
                    return op
            raise ValidationError(f"Unknown observable '{O}'",
                                  details={"known": [label for label, _ in self.observables]})
        if self.maps is not None:
            return map_R(self.maps, O)
        O = as_operator(O, dim=self.dim_H, name="observable")
        if self.is_reduced:
            off = float(np.linalg.norm(np.where(self.block_mask, 0.0, O)))
            validate_and_raise(off <= 1e-10 * max(1.0, float(np.linalg.norm(O))),
                               f"Reduced observable is not block diagonal (off-block norm {off:.3e})")
        return O

    def prepare_state(self, rho) -> Operator:
        """Density operator on this model's space; with reduction maps attached, rho is mapped by J^dag."""
        if self.maps is not None:
            return map_state(self.maps, rho)
        return check_density(rho, dim=self.dim_H)

    def observable_coords(self, O: Operator) -> np.ndarray:
        return vec(O)[self.coordinates]

    def state_row(self, rho: Operator) -> np.ndarray:
        """Row vector r with r . coords(O) = tr(O rho)."""
        return vec(rho.T)[self.coordinates]

    def operator_from_coords(self, v: np.ndarray) -> Operator:
        full = np.zeros(self.dim_H ** 2, dtype=complex)
        full[self.coordinates] = v
        return unvec(full, self.dim_H)


class _PropagatorCache:
    """Exponentials keyed by (u, dt); one cache per propagation task."""

    def __init__(self, model: PropagationModel):
        self.model = model
        self._cache: Dict[Tuple, List[Tuple[np.ndarray, np.ndarray]]] = {}
        self.hits = 0

    def get(self, u: np.ndarray, dt: float):
        key = (tuple(np.round(u, 15)), round(float(dt), 15))
        if key in self._cache:
            self.hits += 1
        else:
            self._cache[key] = self.model.propagator(u, dt)
        return self._cache[key]


def _apply(propagator, V: np.ndarray) -> np.ndarray:
    out = np.empty_like(V)
    for idx, E in propagator:
        out[idx] = E @ V[idx]
    return out


def _check_times(schedule: ControlSchedule, sample_times) -> np.ndarray:
    times = np.asarray(sample_times, dtype=float).reshape(-1)
    validate_and_raise(times.size > 0, "At least one sample time is needed")
    if np.any(np.diff(times) < 0):
        raise ScheduleError("Sample times must be sorted")
    total = schedule.total_duration
    eps = 1e-12 * max(1.0, total)
    if times[0] < -eps or times[-1] > total + eps:
        raise ScheduleError(f"Sample times [{times[0]}, {times[-1]}] outside the schedule [0, {total}]",
                            details={"total_duration": total})
    return np.clip(times, 0.0, total)


def propagate_coordinates(model: PropagationModel, schedule: ControlSchedule, V: np.ndarray,
                          sample_times, cache: Optional[_PropagatorCache] = None) -> np.ndarray:
    """Evolve coordinate columns V (d x k); returns an array of shape (len(times), d, k)."""
    schedule.validate_for(model.generator)
    times = _check_times(schedule, sample_times)
    cache = cache or _PropagatorCache(model)
    eps = 1e-12 * max(1.0, schedule.total_duration)

    out = np.empty((len(times), V.shape[0], V.shape[1]), dtype=complex)
    v = np.asarray(V, dtype=complex)
    ti = 0
    t0 = 0.0
    for duration, u in schedule.segments:
        t1 = t0 + duration
        while ti < len(times) and times[ti] <= t1 + eps:
            tau = min(times[ti] - t0, duration)
            out[ti] = v if tau <= eps else _apply(cache.get(u, tau), v)
            ti += 1
        v = _apply(cache.get(u, duration), v)
        t0 = t1
    while ti < len(times):
        out[ti] = v
        ti += 1
    return out


def propagate_heisenberg(model: PropagationModel, schedule: ControlSchedule, O: Union[str, Operator],
                         sample_times) -> Trajectory:
    """Evolved observable O(t) at every sample time."""
    O = model.prepare_observable(O)
    columns = propagate_coordinates(model, schedule, model.observable_coords(O)[:, None], sample_times)
    operators = np.stack([model.operator_from_coords(columns[t, :, 0]) for t in range(columns.shape[0])])
    return Trajectory(_check_times(schedule, sample_times), operators)


def expectation_values(model: PropagationModel, schedule: ControlSchedule, states: Sequence[Operator],
                       observables: Sequence[Operator], sample_times,
                       cache: Optional[_PropagatorCache] = None) -> Tuple[np.ndarray, float]:
    """Expectations of every observable in every (prepared) state: shape (times, states, observables).

    Also returns the largest imaginary part relative to the observable scale.
    """
    V = np.stack([model.observable_coords(O) for O in observables], axis=1)
    rows = np.stack([model.state_row(rho) for rho in states])
    evolved = propagate_coordinates(model, schedule, V, sample_times, cache)
    values = np.einsum("sd,tdk->tsk", rows, evolved)
    hermitian = np.array([hermiticity_residual(O) <= 1e-10 for O in observables])
    imag = np.abs(values.imag)[..., hermitian]
    scale = max(1.0, float(np.max(np.abs(values.real)))) if values.size else 1.0
    imag_residual = float(imag.max()) / scale if imag.size else 0.0
    return values, imag_residual


def expectation_trajectory(model: PropagationModel, schedule: ControlSchedule, rho,
                           O: Union[str, Operator], sample_times, label: str = "") -> Trajectory:
    """tr[O(t) rho]; a reduced model maps full-space inputs through J^dag and R."""
    state = model.prepare_state(rho)
    observable = model.prepare_observable(O)
    values, imag_residual = expectation_values(model, schedule, [state], [observable], sample_times)
    if imag_residual > 1e-10:
        logger.warning(f"Expectation of '{label or O}' has imaginary residue {imag_residual:.2e}")
    return Trajectory(_check_times(schedule, sample_times), values[:, 0, 0].real,
                      label or (O if isinstance(O, str) else ""), imag_residual)


# Full versus reduced comparison

@dataclass
class ComparisonOutcome:
    """Deviations between full and reduced expectation trajectories."""
    tolerance: float
    entries: List[Dict] = field(default_factory=list)
    full_seconds: float = 0.0
    reduced_seconds: float = 0.0
    num_samples: int = 0

    @property
    def max_deviation(self) -> float:
        return max((entry["max_deviation"] for entry in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(entry["passed"] for entry in self.entries)

    @property
    def speedup(self) -> float:
        return self.full_seconds / self.reduced_seconds if self.reduced_seconds > 0 else float("inf")


def _compare_schedule(full: PropagationModel, reduced: PropagationModel, schedule_index: int,
                      schedule: ControlSchedule, states: Sequence[Operator], reduced_states: Sequence[Operator],
                      labels: Sequence[str], full_obs: Sequence[Operator], reduced_obs: Sequence[Operator],
                      sample_times, tol: float) -> Tuple[List[Dict], float, float]:
    start = time.perf_counter()
    full_values, _ = expectation_values(full, schedule, states, full_obs, sample_times)
    full_seconds = time.perf_counter() - start

    start = time.perf_counter()
    reduced_values, _ = expectation_values(reduced, schedule, reduced_states, reduced_obs, sample_times)
    reduced_seconds = time.perf_counter() - start

    entries = []
    for s in range(len(states)):
        for k, label in enumerate(labels):
            reference = full_values[:, s, k].real
            deviation = float(np.max(np.abs(reference - reduced_values[:, s, k].real)))
            scale = float(np.max(np.abs(reference)))
            entries.append({
                "state_index": s,
                "schedule_index": schedule_index,
                "observable": label,
                "max_deviation": deviation,
                "scale": scale,
                "passed": deviation <= tol * (1.0 + scale),
            })
    return entries, full_seconds, reduced_seconds


def compare_full_reduced(full: PropagationModel, reduced: PropagationModel,
                         observables: Sequence[Tuple[str, Operator]], states: Sequence[Operator],
                         schedules: Sequence[ControlSchedule], sample_times=None, num_samples: int = 200,
                         tol: float = 1e-8, max_workers: int = 1) -> ComparisonOutcome:
    """Propagate the same states, schedules and observables through both models.

    Observables and states are given on the full space; the reduced side maps
    them itself. Each schedule is one task, so the exponential caches stay
    confined to a worker.
    """
    validate_and_raise(len(schedules) > 0, "Comparison needs at least one schedule")
    validate_and_raise(len(states) > 0, "Comparison needs at least one state")
    if full.generator.num_controls != reduced.generator.num_controls:
        raise DimensionMismatchError(
            f"Full model has {full.generator.num_controls} channels, reduced model has "
            f"{reduced.generator.num_controls}")

    labels = [label for label, _ in observables]
    full_obs = [full.prepare_observable(O) for _, O in observables]
    reduced_obs = [reduced.prepare_observable(O) for _, O in observables]
    full_states = [full.prepare_state(rho) for rho in states]
    reduced_states = [reduced.prepare_state(rho) for rho in states]

    def task(item):
        index, schedule = item
        times = schedule.default_times(num_samples) if sample_times is None else sample_times
        return _compare_schedule(full, reduced, index, schedule, full_states, reduced_states,
                                 labels, full_obs, reduced_obs, times, tol)

    outcome = ComparisonOutcome(tolerance=tol,
                                num_samples=num_samples if sample_times is None else len(sample_times))
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        for entries, full_seconds, reduced_seconds in executor.map(task, enumerate(schedules)):
            outcome.entries.extend(entries)
            outcome.full_seconds += full_seconds
            outcome.reduced_seconds += reduced_seconds

    logger.info(f"Comparison over {len(schedules)} schedules x {len(states)} states x {len(labels)} observables: "
                f"max deviation {outcome.max_deviation:.2e} ({'pass' if outcome.passed else 'FAIL'}), "
                f"speedup {outcome.speedup:.1f}x")
    return outcome


# Random inputs

def random_schedule(gen: ControlledLindbladGenerator, rng: np.random.Generator, num_segments: int,
                    segment_duration: float = 0.1, scale: float = 1.0) -> ControlSchedule:
    """Uniform controls inside each channel's (truncated) domain, durations jittered around the mean."""
    validate_and_raise(num_segments > 0, "A schedule needs at least one segment")
    bounds = np.array([c.coefficient_domain.finite_bounds(scale) for c in gen.channels]).reshape(-1, 2)
    segments = []
    for _ in range(num_segments):
        u = bounds[:, 0] + rng.random(gen.num_controls) * (bounds[:, 1] - bounds[:, 0])
        duration = segment_duration * (0.5 + rng.random())
        segments.append((duration, u))
    return ControlSchedule(tuple(segments))


def random_states(n: int, rng: np.random.Generator, count: int) -> List[Operator]:
    """Seeded mixed states; every other one has rank 2, the rest full rank."""
    return [random_density(n, rng, rank=min(2, n) if i % 2 else None) for i in range(count)]
