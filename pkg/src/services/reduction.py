"""
Reduction onto a unital *-algebra.

Given the Wedderburn structure A = U^dag [(+)_k B(F_k) (x) 1_{G_k}] U with block
rows W_k of U, the conditional expectation P = J R factors through

    R(X)   = (+)_k tr_G(W_k X W_k^dag) / dG_k        (observables, n -> n_red)
    J(Y)   = sum_k W_k^dag (Y_k (x) 1_{G_k}) W_k       (observables, n_red -> n)
    J^dag(rho) = (+)_k tr_G(W_k rho W_k^dag)          (states, n -> n_red)

and the reduced generator is R L_u J on the block algebra of the reduced space.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.schemas import ChannelKind
from ..utils.exceptions import CertificateError, ValidationError, validate_and_raise
from ..utils.helpers import make_rng
from .lindblad import (
    ControlChannel,
    ControlledLindbladGenerator,
    LindbladCertificate,
    affine_superoperators,
    generator_superoperator,
    is_lindblad,
    sample_admissible_controls,
)
from .operators import (
    Operator,
    OperatorSubspace,
    Superoperator,
    as_operator,
    check_density,
    choi_min_eigenvalue,
    dagger,
    hs_norm,
    identity,
    max_residual,
    superoperator_from_map,
    vec,
)
from .star_algebra import WedderburnStructure

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_TOL_PSD = 1e-9
STRUCT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ReductionMaps:
    """Block coisometries W_k of a Wedderburn structure and the maps built from them."""
    wedderburn: WedderburnStructure
    isometries: Tuple[np.ndarray, ...]
    dim_reduced: int

    @property
    def dim_H(self) -> int:
        return self.wedderburn.dim_H

    @property
    def blocks(self) -> Tuple[Tuple[int, int], ...]:
        return self.wedderburn.blocks

    @property
    def block_dims(self) -> List[int]:
        return [dF for dF, _ in self.blocks]

    @property
    def reduced_offsets(self) -> List[int]:
        return self.wedderburn.reduced_offsets

    def block_slice(self, k: int) -> slice:
        start = self.reduced_offsets[k]
        return slice(start, start + self.blocks[k][0])

    @cached_property
    def block_mask(self) -> np.ndarray:
        """Boolean n_red x n_red mask of the diagonal blocks."""
        mask = np.zeros((self.dim_reduced, self.dim_reduced), dtype=bool)
        for k in range(len(self.blocks)):
            s = self.block_slice(k)
            mask[s, s] = True
        return mask

    @cached_property
    def reduce_superoperator(self) -> Superoperator:
        return superoperator_from_map(lambda X: map_R(self, X), self.dim_H, self.dim_reduced)

    @cached_property
    def inject_superoperator(self) -> Superoperator:
        """J composed with the pinching onto the diagonal blocks, defined on all of B(C^n_red)."""
        return superoperator_from_map(lambda X: _inject(self, X), self.dim_reduced, self.dim_H)

    @cached_property
    def projector_superoperator(self) -> Superoperator:
        return self.inject_superoperator @ self.reduce_superoperator

    @cached_property
    def pinching_superoperator(self) -> Superoperator:
        diagonal = vec(self.block_mask).astype(complex)
        return Superoperator(np.diag(diagonal), self.dim_reduced, self.dim_reduced)


def build_reduction_maps(W: WedderburnStructure, tol: float = STRUCT_TOL) -> ReductionMaps:
    """Split U into its block rows and check that every block is a coisometry."""
    isometries = tuple(W.block_rows(k).copy() for k in range(len(W.blocks)))
    worst = max(float(np.linalg.norm(Wk @ dagger(Wk) - np.eye(Wk.shape[0]))) for Wk in isometries)
    if worst > tol:
        raise CertificateError(
            f"Wedderburn rows are not coisometries (residual {worst:.3e})",
            details={"coisometry_residual": worst}
        )
    maps = ReductionMaps(W, isometries, W.n_reduced)
    logger.info(f"Reduction maps: n={W.dim_H} -> n_red={maps.dim_reduced}, blocks {list(W.blocks)}")
    return maps


def _partial_trace_blocks(maps: ReductionMaps, X: Operator, normalize: bool) -> Operator:
    out = np.zeros((maps.dim_reduced, maps.dim_reduced), dtype=complex)
    for k, ((dF, dG), Wk) in enumerate(zip(maps.blocks, maps.isometries)):
        Y = (Wk @ X @ dagger(Wk)).reshape(dF, dG, dF, dG)
        M = np.einsum("agbg->ab", Y)
        s = maps.block_slice(k)
        out[s, s] = M / dG if normalize else M
    return out


def _inject(maps: ReductionMaps, X: Operator) -> Operator:
    out = np.zeros((maps.dim_H, maps.dim_H), dtype=complex)
    for k, ((dF, dG), Wk) in enumerate(zip(maps.blocks, maps.isometries)):
        s = maps.block_slice(k)
        out += dagger(Wk) @ np.kron(X[s, s], np.eye(dG)) @ Wk
    return out


def off_block_residual(maps: ReductionMaps, X: Operator) -> float:
    return float(np.linalg.norm(np.where(maps.block_mask, 0.0, X)))


def map_R(maps: ReductionMaps, X: Operator) -> Operator:
    """Reduced observable: normalized partial trace over every multiplicity factor."""
    X = as_operator(X, dim=maps.dim_H)
    return _partial_trace_blocks(maps, X, normalize=True)


def map_J(maps: ReductionMaps, X: Operator, tol: float = DEFAULT_TOL) -> Operator:
    """Embed a block-diagonal reduced operator back into the full space."""
    X = as_operator(X, dim=maps.dim_reduced, name="reduced operator")
    off = off_block_residual(maps, X)
    validate_and_raise(off <= tol * max(1.0, hs_norm(X)),
                       f"Reduced operator is not block diagonal (off-block norm {off:.3e})",
                       details={"off_block_residual": off, "block_dims": maps.block_dims})
    return _inject(maps, X)


def map_J_adjoint(maps: ReductionMaps, X: Operator) -> Operator:
    """Hilbert-Schmidt adjoint of J: unnormalized partial traces."""
    X = as_operator(X, dim=maps.dim_H)
    return _partial_trace_blocks(maps, X, normalize=False)


def map_state(maps: ReductionMaps, rho, tol_trace: float = 1e-8, tol_psd: float = 1e-9) -> Operator:
    """Reduced density operator J^dag(rho)."""
    rho = check_density(rho, tol_trace, tol_psd, dim=maps.dim_H)
    reduced = map_J_adjoint(maps, rho)
    return 0.5 * (reduced + dagger(reduced))


# Projector certificate

@dataclass(frozen=True)
class ProjectorReport:
    """Residuals of the conditional-expectation checks on P = J R."""
    coisometry_residual: float
    idempotence_residual: float
    unitality_residual: float
    self_adjointness_residual: float
    choi_min_projector: float
    choi_min_reduce: float
    choi_min_inject: float
    trace_preservation_residual: float
    image_residual: float
    image_dim: int
    observable_residual: Optional[float]
    tol: float
    tol_psd: float
    expected_image_dim: Optional[int] = None

    @property
    def passed(self) -> bool:
        residuals = [self.coisometry_residual, self.idempotence_residual, self.unitality_residual,
                     self.self_adjointness_residual, self.trace_preservation_residual, self.image_residual]
        if self.observable_residual is not None:
            residuals.append(self.observable_residual)
        choi = min(self.choi_min_projector, self.choi_min_reduce, self.choi_min_inject)
        image_ok = self.expected_image_dim is None or self.image_dim == self.expected_image_dim
        return max(residuals) <= self.tol and choi >= -self.tol_psd and image_ok

    def to_summary(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "coisometry_residual": self.coisometry_residual,
            "idempotence_residual": self.idempotence_residual,
            "unitality_residual": self.unitality_residual,
            "self_adjointness_residual": self.self_adjointness_residual,
            "choi_min_projector": self.choi_min_projector,
            "choi_min_reduce": self.choi_min_reduce,
            "choi_min_inject": self.choi_min_inject,
            "trace_preservation_residual": self.trace_preservation_residual,
            "image_residual": self.image_residual,
            "image_dim": self.image_dim,
            "observable_residual": self.observable_residual,
        }


def verify_projector(maps: ReductionMaps, algebra: Optional[OperatorSubspace] = None,
                     observable_space: Optional[OperatorSubspace] = None, tol: float = 1e-9,
                     tol_psd: float = DEFAULT_TOL_PSD, n_random: int = 50,
                     seed: Optional[int] = None) -> ProjectorReport:
    """Idempotence, unitality, HS self-adjointness, complete positivity and image of P.

    Failures are carried by the report, never raised.
    """
    n, m = maps.dim_H, maps.dim_reduced
    P = maps.projector_superoperator
    R = maps.reduce_superoperator
    J = maps.inject_superoperator

    coisometry = max(float(np.linalg.norm(Wk @ dagger(Wk) - np.eye(Wk.shape[0]))) for Wk in maps.isometries)
    idempotence = float(np.linalg.norm(P.matrix @ P.matrix - P.matrix))
    one_n, one_m = vec(identity(n)), vec(identity(m))
    unitality = max(float(np.linalg.norm(P.matrix @ one_n - one_n)),
                    float(np.linalg.norm(R.matrix @ one_n - one_m)),
                    float(np.linalg.norm(J.matrix @ one_m - one_n)))
    self_adjoint = float(np.linalg.norm(P.matrix - P.matrix.conj().T))
    trace_preservation = float(np.linalg.norm(one_m.conj() @ J.adjoint().matrix - one_n.conj()))

    image_dim = int(round(float(np.trace(P.matrix).real)))
    image_residual = 0.0
    if algebra is not None:
        rng = make_rng(seed)
        samples = rng.normal(size=(n * n, n_random)) + 1j * rng.normal(size=(n * n, n_random))
        image_residual = max_residual(algebra, P.matrix @ samples, floor=1.0)
        image_residual = max(image_residual, float(np.max(np.linalg.norm(
            P.matrix @ algebra.matrix - algebra.matrix, axis=0))))

    observable_residual = None
    if observable_space is not None:
        observable_residual = float(np.max(np.linalg.norm(
            P.matrix @ observable_space.matrix - observable_space.matrix, axis=0)))

    report = ProjectorReport(
        coisometry_residual=coisometry,
        idempotence_residual=idempotence,
        unitality_residual=unitality,
        self_adjointness_residual=self_adjoint,
        choi_min_projector=choi_min_eigenvalue(P),
        choi_min_reduce=choi_min_eigenvalue(R),
        choi_min_inject=choi_min_eigenvalue(J),
        trace_preservation_residual=trace_preservation,
        image_residual=image_residual,
        image_dim=image_dim,
        observable_residual=observable_residual,
        tol=tol,
        tol_psd=tol_psd,
        expected_image_dim=algebra.dim if algebra is not None else None,
    )
    logger.info(f"Projector certificate: {'passed' if report.passed else 'FAILED'} "
                f"(idempotence {idempotence:.1e}, image dim {image_dim})")
    return report


# Reduced generator

def reduce_hamiltonian(maps: ReductionMaps, H: Operator) -> Operator:
    """R(H) with every block made traceless; block constants commute with the block algebra."""
    reduced = map_R(maps, H)
    for k, dF in enumerate(maps.block_dims):
        s = maps.block_slice(k)
        reduced[s, s] -= np.trace(reduced[s, s]) / dF * np.eye(dF)
    return 0.5 * (reduced + dagger(reduced))


def reduce_noise(maps: ReductionMaps, operators: Sequence[Operator], tol: float = DEFAULT_TOL) -> List[Operator]:
    """Jump operators on the reduced space reproducing R D_L J on the block algebra.

    Each block pair (k', k) of W_k' L W_k^dag is split over the multiplicity
    indices into dF_k' x dF_k pieces, scaled by 1/sqrt(dG_k). Pieces that vanish,
    and diagonal pieces proportional to the identity, are dropped.
    """
    out: List[Operator] = []
    m = maps.dim_reduced
    for L in operators:
        scale = max(1.0, hs_norm(L))
        for kp, ((dFp, dGp), Wp) in enumerate(zip(maps.blocks, maps.isometries)):
            for k, ((dF, dG), Wk) in enumerate(zip(maps.blocks, maps.isometries)):
                L4 = (Wp @ L @ dagger(Wk)).reshape(dFp, dGp, dF, dG)
                for a in range(dGp):
                    for b in range(dG):
                        A = L4[:, a, :, b] / np.sqrt(dG)
                        norm = hs_norm(A)
                        if norm <= tol * scale:
                            continue
                        if kp == k and hs_norm(A - np.trace(A) / dF * np.eye(dF)) <= tol * max(1.0, norm):
                            continue
                        op = np.zeros((m, m), dtype=complex)
                        op[maps.block_slice(kp), maps.block_slice(k)] = A
                        out.append(op)
    return out


@dataclass(frozen=True, eq=False)
class CertificateRecord:
    """Checks of the reduced generator at one control value.

    ``exact`` compares the explicit reduced generator with R L_u J on the block
    algebra; this is the check that decides whether the reduction is exact.
    The explicit generator is assembled from Hamiltonians and jump operators, so
    ``construction_consistent`` (its Lindblad certificate) only confirms that
    assembly and can fail solely through numerical breakdown.
    """
    label: str
    u: Tuple[float, ...]
    certificate: LindbladCertificate
    restriction_residual: float
    struct_tol: float

    @property
    def exact(self) -> bool:
        return self.restriction_residual <= self.struct_tol

    @property
    def construction_consistent(self) -> bool:
        return self.certificate.passed

    @property
    def passed(self) -> bool:
        return self.exact and self.construction_consistent

    def to_summary(self) -> Dict[str, Any]:
        cert = self.certificate
        return {
            "label": self.label,
            "u": list(self.u),
            "passed": self.passed,
            "exact": self.exact,
            "construction_consistent": self.construction_consistent,
            "unital_residual": cert.unital_residual,
            "hermiticity_residual": cert.hermiticity_residual,
            "kossakowski_min_eigenvalue": cert.kossakowski_min_eigenvalue,
            "reconstruction_residual": cert.reconstruction_residual,
            "restriction_residual": self.restriction_residual,
            "num_noise_ops": len(cert.noise_ops),
        }


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Reduced controlled Lindblad model together with the maps that produced it."""
    maps: ReductionMaps
    generator: ControlledLindbladGenerator
    reduced_drift: Superoperator
    reduced_channels: Tuple[Superoperator, ...]
    reduced_observables: Tuple[Tuple[str, Operator], ...]
    certificates: Tuple[CertificateRecord, ...]
    no_reduction: bool
    warnings: Tuple[str, ...] = ()

    @property
    def dim_reduced(self) -> int:
        return self.maps.dim_reduced

    @property
    def block_dims(self) -> List[int]:
        return self.maps.block_dims

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.certificates)

    def observable(self, label: str) -> Operator:
        for name, op in self.reduced_observables:
            if name == label:
                return op
        raise ValidationError(f"Unknown reduced observable '{label}'",
                              details={"known": [name for name, _ in self.reduced_observables]})

    def reduced_generator(self, u) -> Superoperator:
        """R L_u J as a superoperator on the reduced space."""
        u = np.asarray(u, dtype=float)
        matrix = self.reduced_drift.matrix.copy()
        for value, part in zip(u, self.reduced_channels):
            matrix += value * part.matrix
        return Superoperator(matrix, self.dim_reduced, self.dim_reduced)


def reduced_model_generator(gen: ControlledLindbladGenerator, maps: ReductionMaps,
                            tol: float = DEFAULT_TOL) -> ControlledLindbladGenerator:
    """Explicit reduced Hamiltonians and jump operators with the original channel layout."""
    channels = []
    for channel in gen.channels:
        if channel.kind is ChannelKind.HAMILTONIAN:
            reduced = ControlChannel.hamiltonian(reduce_hamiltonian(maps, channel.operator), channel.label,
                                                 channel.coefficient_domain)
        else:
            reduced = ControlChannel.dissipator(reduce_noise(maps, channel.operators, tol), channel.label,
                                                channel.coefficient_domain)
        channels.append(reduced)
    return ControlledLindbladGenerator(
        maps.dim_reduced,
        reduce_hamiltonian(maps, gen.H0),
        tuple(reduce_noise(maps, gen.noise_drift, tol)),
        tuple(channels),
        gen.unital_tol,
    )


def _certify(label: str, u: Sequence[float], explicit: Superoperator, restricted: Superoperator,
             pinching: Superoperator, tol: float, tol_psd: float, struct_tol: float) -> CertificateRecord:
    certificate = is_lindblad(explicit, tol, tol_psd)
    difference = explicit.matrix @ pinching.matrix - restricted.matrix
    restriction = float(np.linalg.norm(difference)) / max(1.0, float(np.linalg.norm(restricted.matrix)))
    return CertificateRecord(label, tuple(float(x) for x in u), certificate, restriction, struct_tol)


def reduce_generator(gen: ControlledLindbladGenerator, maps: ReductionMaps,
                     observables: Sequence[Tuple[str, Operator]] = (),
                     sample_controls: Optional[Sequence[Sequence[float]]] = None,
                     tol: float = DEFAULT_TOL, tol_psd: float = DEFAULT_TOL_PSD,
                     struct_tol: float = STRUCT_TOL, seed: Optional[int] = None,
                     n_random: int = 8, unbounded_scale: float = 1.0, max_vertex_channels: int = 4,
                     strict: bool = True) -> ReducedModel:
    """Reduce every affine part of the generator and certify the result.

    Certificates cover the drift alone, every channel part alone and the sampled
    admissible controls. With ``strict`` a failing certificate raises.
    """
    validate_and_raise(gen.dim_H == maps.dim_H,
                       f"Model acts on dimension {gen.dim_H}, reduction maps on {maps.dim_H}")
    R, J = maps.reduce_superoperator, maps.inject_superoperator
    pinching = maps.pinching_superoperator
    drift, parts = affine_superoperators(gen)
    reduced_drift = R @ drift @ J
    reduced_channels = tuple(R @ part @ J for part in parts)

    explicit = reduced_model_generator(gen, maps, tol)
    explicit_drift, explicit_parts = affine_superoperators(explicit)

    records: List[CertificateRecord] = [
        _certify("drift", [0.0] * gen.num_controls, explicit_drift, reduced_drift, pinching,
                 tol, tol_psd, struct_tol)
    ]
    for channel, explicit_part, reduced_part in zip(gen.channels, explicit_parts, reduced_channels):
        records.append(_certify(f"channel:{channel.label}", [], explicit_part, reduced_part, pinching,
                                tol, tol_psd, struct_tol))

    if sample_controls is None:
        sample_controls = sample_admissible_controls(gen, make_rng(seed), n_random, unbounded_scale,
                                                     max_vertex_channels) if gen.num_controls else []
    for i, u in enumerate(sample_controls):
        u = np.asarray(u, dtype=float)
        restricted = reduced_drift.matrix + sum((value * part.matrix for value, part in zip(u, reduced_channels)),
                                                np.zeros_like(reduced_drift.matrix))
        records.append(_certify(f"sample:{i}", u, generator_superoperator(explicit, u),
                                Superoperator(restricted, maps.dim_reduced, maps.dim_reduced),
                                pinching, tol, tol_psd, struct_tol))

    warnings: List[str] = []
    reduced_observables = []
    for label, O in observables:
        O = as_operator(O, dim=gen.dim_H, name=f"observable '{label}'")
        reduced = map_R(maps, O)
        mismatch = hs_norm(_inject(maps, reduced) - O) / max(1.0, hs_norm(O))
        if mismatch > struct_tol:
            message = f"Observable '{label}' is not in the reduction algebra (residual {mismatch:.2e})"
            logger.warning(message)
            warnings.append(message)
        reduced_observables.append((label, reduced))

    no_reduction = maps.wedderburn.algebra_dim == gen.dim_H ** 2
    if no_reduction:
        message = "No reduction achieved: the algebra is all operators on the full space"
        logger.warning(message)
        warnings.append(message)

    model = ReducedModel(maps, explicit, reduced_drift, reduced_channels, tuple(reduced_observables),
                         tuple(records), no_reduction, tuple(warnings))
    failed = [record.to_summary() for record in records if not record.passed]
    logger.info(f"Reduced generator: n_red={maps.dim_reduced}, {len(records)} certificates, {len(failed)} failed")
    if failed and strict:
        raise CertificateError(
            f"{len(failed)} reduced-generator certificates failed",
            details={"failed": failed}
        )
    return model
