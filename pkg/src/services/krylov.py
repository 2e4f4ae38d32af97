"""
Krylov observable spaces.

The observable space of a controlled generator is the smallest subspace that
contains the target observables and is invariant under every admissible L_u.
With an admissible set that affinely spans R^m this is the same as invariance
under the affine generating set {L_0, K_1, ..., K_m}.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.exceptions import CertificateError, validate_and_raise
from .lindblad import (
    ControlledLindbladGenerator,
    affine_superoperators,
    apply_generator,
    validate_affine_span,
)
from .operators import (
    Operator,
    OperatorSubspace,
    _VectorBasisBuilder,
    check_density,
    identity,
    max_residual,
    orthogonal_complement,
    orthonormalize,
    unvec,
    vec,
)
from .star_algebra import algebra_closure

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
STRUCT_TOL = 1e-8

OperatorMap = Callable[[Operator], Operator]


@dataclass(frozen=True, eq=False)
class ObservableSpaceReport:
    """Krylov fixpoint together with its growth history and invariance certificate."""
    space: OperatorSubspace
    iterations: int
    growth_log: List[Tuple[int, int]]
    invariance_residual: float
    converged: bool = True
    warnings: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.space.dim


@dataclass(frozen=True, eq=False)
class ParametricSpaceReport:
    """Union of per-sample Krylov spaces and whether it reaches the whole observable space."""
    space: OperatorSubspace
    equals_observable_space: bool
    dim_observable_space: int
    num_samples: int
    warnings: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.space.dim


@dataclass(frozen=True, eq=False)
class DriftReductionCheck:
    """Invariance of the base observable space under the designated perturbation channels."""
    holds: bool
    space: OperatorSubspace
    max_residual: float
    perturbation_labels: List[str]


def _with_identity(omega: OperatorSubspace, tol: float, warnings: List[str]) -> OperatorSubspace:
    if omega.contains_identity(max(tol, 1e-12)):
        return omega
    message = "Identity was not in the observable set; adjoined automatically"
    logger.warning(message)
    warnings.append(message)
    return orthonormalize([identity(omega.dim_H)] + omega.operators(), tol, dim=omega.dim_H)


def invariance_residual(space: OperatorSubspace, maps: Sequence[OperatorMap]) -> float:
    """Largest relative residual of f(B) against the space, over maps f and basis elements B."""
    worst = 0.0
    basis = space.operators()
    for f in maps:
        images = np.stack([vec(f(B)) for B in basis], axis=1)
        worst = max(worst, max_residual(space, images, floor=1.0))
    return worst


def krylov_space(n: int, maps: Sequence[OperatorMap], seeds: OperatorSubspace,
                 tol: float = DEFAULT_TOL, max_dim: Optional[int] = None) -> ObservableSpaceReport:
    """Breadth-first Krylov iteration: apply every map to every new basis element until nothing new appears.

    Layers are processed generator by generator, and within a generator in basis order.
    """
    cap = n * n if max_dim is None else min(max_dim, n * n)
    builder = _VectorBasisBuilder(n * n, tol, capacity=cap)
    for column in seeds.matrix.T:
        builder.add(column)

    growth = [(0, builder.size)]
    frontier = list(range(builder.size))
    iterations = 0
    truncated = False
    while frontier and not (builder.full and cap == n * n):
        iterations += 1
        new: List[int] = []
        for f in maps:
            for idx in frontier:
                image = vec(f(unvec(builder.Q[:, idx], n)))
                if builder.full:
                    leftover = np.linalg.norm(builder.residual_vector(image))
                    if leftover > tol * max(1.0, np.linalg.norm(image)):
                        truncated = True
                    continue
                if builder.add(image):
                    new.append(builder.size - 1)
        growth.append((iterations, builder.size))
        logger.debug(f"Krylov layer {iterations}: dim {builder.size} (+{len(new)})")
        frontier = new
        if truncated:
            break

    space = OperatorSubspace.from_columns(n, builder.Q.copy())
    warnings: List[str] = []
    if truncated:
        message = f"Krylov iteration stopped at max_dim={cap} before reaching a fixpoint"
        logger.warning(message)
        warnings.append(message)
    residual = invariance_residual(space, maps) if maps else 0.0
    return ObservableSpaceReport(space, iterations, growth, residual, not truncated, warnings)


def observable_space(gen: ControlledLindbladGenerator, omega: OperatorSubspace,
                     tol: float = DEFAULT_TOL, max_dim: Optional[int] = None) -> ObservableSpaceReport:
    """Smallest subspace containing omega and invariant under the drift and every channel."""
    validate_and_raise(omega.dim_H == gen.dim_H,
                       f"Observables act on dimension {omega.dim_H}, model has {gen.dim_H}")
    validate_affine_span(gen)
    warnings: List[str] = []
    seeds = _with_identity(omega, tol, warnings)
    report = krylov_space(gen.dim_H, gen.part_functions(), seeds, tol, max_dim)
    logger.info(f"Observable space: dim {report.dim} of {gen.dim_H ** 2} after {report.iterations} layers "
                f"(invariance residual {report.invariance_residual:.2e})")
    return ObservableSpaceReport(report.space, report.iterations, report.growth_log,
                                 report.invariance_residual, report.converged, warnings + report.warnings)


def observable_space_superalg_oracle(gen: ControlledLindbladGenerator, omega: OperatorSubspace,
                                     tol: float = DEFAULT_TOL, max_dim: Optional[int] = None,
                                     max_n: int = 8) -> OperatorSubspace:
    """Observable space through the associative algebra generated by the superoperators.

    Costs O(n^6) memory-bound work, hence the guard on n.
    """
    n = gen.dim_H
    validate_and_raise(n <= max_n, f"Superoperator-algebra oracle is limited to n <= {max_n}, got n = {n}")
    validate_and_raise(omega.dim_H == n, f"Observables act on dimension {omega.dim_H}, model has {n}")
    drift, parts = affine_superoperators(gen)
    generators = [drift.matrix] + [part.matrix for part in parts]
    N = n * n

    cap = N * N if max_dim is None else min(max_dim, N * N)
    algebra = _VectorBasisBuilder(N * N, tol, capacity=cap)
    for g in generators:
        algebra.add(g.reshape(-1))
    frontier = list(range(algebra.size))
    while frontier and not algebra.full:
        new: List[int] = []
        for idx in frontier:
            M = algebra.Q[:, idx].reshape(N, N)
            for g in generators:
                if algebra.add((g @ M).reshape(-1)):
                    new.append(algebra.size - 1)
        frontier = new
    logger.debug(f"Superoperator algebra dimension {algebra.size}")

    warnings: List[str] = []
    seeds = _with_identity(omega, tol, warnings)
    images = _VectorBasisBuilder(N, tol)
    for column in seeds.matrix.T:
        images.add(column)
    for idx in range(algebra.size):
        M = algebra.Q[:, idx].reshape(N, N)
        for column in seeds.matrix.T:
            images.add(M @ column)
            if images.full:
                break
    return OperatorSubspace.from_columns(n, images.Q.copy())


def observable_space_parametric(gen: ControlledLindbladGenerator, omega: OperatorSubspace,
                                sample_controls: Sequence[Sequence[float]], tol: float = DEFAULT_TOL,
                                max_dim: Optional[int] = None,
                                full_space: Optional[OperatorSubspace] = None,
                                containment_tol: float = STRUCT_TOL) -> ParametricSpaceReport:
    """Union of the time-independent Krylov spaces of L_u over the sampled controls.

    The result is always contained in the observable space; equality is only
    reported in ``equals_observable_space``, since it depends on the samples.
    """
    validate_and_raise(len(sample_controls) > 0, "Parametric observable space needs at least one control sample")
    n = gen.dim_H
    warnings: List[str] = []
    seeds = _with_identity(omega, tol, warnings)

    union = _VectorBasisBuilder(n * n, tol)
    for u in sample_controls:
        u = np.asarray(u, dtype=float)
        report = krylov_space(n, [lambda X, u=u: apply_generator(gen, u, X)], seeds, tol, max_dim)
        for column in report.space.matrix.T:
            union.add(column)
    space = OperatorSubspace.from_columns(n, union.Q.copy())

    if full_space is None:
        full_space = observable_space(gen, omega, tol, max_dim).space
    residual = max_residual(full_space, space.matrix)
    if residual > containment_tol:
        raise CertificateError(
            f"Parametric observable space is not contained in the observable space (residual {residual:.3e})",
            details={"residual": residual, "dim_parametric": space.dim, "dim_full": full_space.dim}
        )
    equal = space.dim == full_space.dim
    logger.info(f"Parametric observable space: dim {space.dim} vs {full_space.dim} "
                f"({'equal' if equal else 'strictly smaller'}) over {len(sample_controls)} samples")
    return ParametricSpaceReport(space, equal, full_space.dim, len(sample_controls), warnings)


def frame_algebra(gen: ControlledLindbladGenerator, omega: OperatorSubspace, tol: float = DEFAULT_TOL,
                  max_dim: Optional[int] = None, struct_tol: float = STRUCT_TOL) -> OperatorSubspace:
    """Unital *-algebra generated by every Hamiltonian, noise operator and observable of the model."""
    n = gen.dim_H
    ops: List[Operator] = [identity(n), gen.H0]
    for channel in gen.channels:
        ops.extend(channel.operators)
    ops.extend(gen.noise_drift)
    ops.extend(omega.operators())
    frame = algebra_closure(orthonormalize(ops, tol, dim=n), tol, max_dim, struct_tol)
    if frame.dim < n * n:
        residual = invariance_residual(frame, gen.part_functions())
        if residual > struct_tol:
            raise CertificateError(
                f"Frame algebra is not invariant under the generator (residual {residual:.3e})",
                details={"residual": residual, "dim": frame.dim}
            )
    logger.info(f"Frame algebra: dim {frame.dim} of {n * n}")
    return frame


def check_drift_reduction(gen: ControlledLindbladGenerator,
                          perturbation_channels: Sequence[Union[str, int]],
                          omega: OperatorSubspace, tol: float = DEFAULT_TOL,
                          max_dim: Optional[int] = None, struct_tol: float = STRUCT_TOL) -> DriftReductionCheck:
    """Split the channels into base and perturbation parts and test invariance of the base space.

    The base space is the observable space of the drift plus every channel not
    designated; with no channel designated the check holds trivially.
    """
    designated = sorted({gen.channel_index(c) for c in perturbation_channels})
    labels = [gen.channels[i].label for i in designated]
    base = gen.with_channels([c for i, c in enumerate(gen.channels) if i not in designated])
    report = observable_space(base, omega, tol, max_dim)
    perturbations = [gen.channels[i].apply for i in designated]
    residual = invariance_residual(report.space, perturbations) if perturbations else 0.0
    holds = report.converged and residual <= struct_tol
    logger.info(f"Drift reduction check over {labels or 'no channels'}: "
                f"{'holds' if holds else 'fails'} (dim {report.dim}, residual {residual:.2e})")
    return DriftReductionCheck(holds, report.space, residual, labels)


def indistinguishable(rho1, rho2, space: OperatorSubspace, tol: float = DEFAULT_TOL,
                      tol_trace: float = 1e-8, tol_psd: float = 1e-9) -> bool:
    """True iff tr[X (rho1 - rho2)] vanishes for every X in the space."""
    rho1 = check_density(rho1, tol_trace, tol_psd, dim=space.dim_H, name="first state")
    rho2 = check_density(rho2, tol_trace, tol_psd, dim=space.dim_H, name="second state")
    expectations = np.einsum("kij,ji->k", space.basis, rho1 - rho2)
    return bool(np.max(np.abs(expectations)) <= tol) if expectations.size else True


def non_observable_complement(space: OperatorSubspace, tol: float = DEFAULT_TOL) -> Optional[OperatorSubspace]:
    """Orthonormal basis of the operators orthogonal to the space; None when nothing is left."""
    return orthogonal_complement(space, tol)


def observable_subspace(observables: Sequence[Operator], n: int, tol: float = DEFAULT_TOL) -> OperatorSubspace:
    """Span of the target observables with the identity adjoined first."""
    return orthonormalize([identity(n)] + list(observables), tol, dim=n)
