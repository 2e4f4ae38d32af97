"""
Reduction Service
Runs the reduce and check workflows: Krylov observable space, algebra closure,
Wedderburn decomposition, reduction maps and certificates, and assembles the
machine-readable reports.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

from .. import __version__
from ..config import get_config
from ..models.schemas import (
    CheckReport,
    DriftCheckSummary,
    ReducedModelFile,
    ReductionPath,
    ReductionReport,
)
from ..utils import (
    CertificateError,
    ConvergenceError,
    ErrorContext,
    Timer,
    generate_run_id,
    service_error_handler,
)
from .krylov import (
    DriftReductionCheck,
    ObservableSpaceReport,
    check_drift_reduction,
    frame_algebra,
    observable_space,
)
from .model_io import ParsedModel, reduced_model_file
from .operators import OperatorSubspace
from .reduction import ProjectorReport, ReducedModel, build_reduction_maps, reduce_generator, verify_projector
from .star_algebra import WedderburnStructure, algebra_closure, wedderburn

logger = logging.getLogger(__name__)


@dataclass
class ReductionOutcome:
    """Everything one reduction run produced."""
    reduced: ReducedModel
    report: ReductionReport
    document: ReducedModelFile
    observable_report: ObservableSpaceReport
    algebra: OperatorSubspace
    structure: WedderburnStructure
    projector: ProjectorReport
    drift_check: Optional[DriftReductionCheck] = None

    @property
    def passed(self) -> bool:
        return self.report.passed


@dataclass
class CheckOutcome:
    """Sufficient-condition checks on a model."""
    report: CheckReport
    frame: Optional[OperatorSubspace] = None
    drift_check: Optional[DriftReductionCheck] = None
    warnings: List[str] = field(default_factory=list)


def _drift_summary(check: DriftReductionCheck) -> DriftCheckSummary:
    return DriftCheckSummary(
        perturbation_channels=check.perturbation_labels,
        holds=check.holds,
        dim_base_space=check.space.dim,
        max_residual=check.max_residual,
    )


class ReductionService:
    """Reduce and check workflows over parsed models."""

    def __init__(self):
        self.config = get_config()
        self._reductions = 0
        self._checks = 0
        self._failed_certificates = 0
        logger.info("Reduction service initialized")

    def _tolerances(self, overrides: Optional[Dict[str, float]] = None) -> Dict[str, float]:
        tol = self.config.tolerances
        values = {
            "orth": tol.orth, "herm": tol.herm, "trace": tol.trace, "psd": tol.psd,
            "krylov": tol.krylov, "struct": tol.struct, "num": tol.num,
        }
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return values

    def _observable_space(self, parsed: ParsedModel, tol: Dict[str, float]) -> ObservableSpaceReport:
        report = observable_space(parsed.generator, parsed.omega, tol["krylov"], self.config.krylov.max_dim)
        if not report.converged:
            raise ConvergenceError(
                f"Krylov iteration did not reach a fixpoint within max_dim={self.config.krylov.max_dim}",
                details={"dim": report.dim, "growth": report.growth_log}
            )
        return report

    def _closure(self, space: OperatorSubspace, tol: Dict[str, float]) -> OperatorSubspace:
        return algebra_closure(space, tol["orth"], self.config.krylov.max_dim, tol["struct"])

    def _select_algebra(self, parsed: ParsedModel, path: ReductionPath, space: OperatorSubspace,
                        perturbations: Optional[Sequence[Union[str, int]]], tol: Dict[str, float],
                        timing: Dict[str, float], warnings: List[str]):
        """Algebra of the requested path; 'auto' takes the drift algebra when its check holds."""
        gen = parsed.generator
        drift_check = None
        if path in (ReductionPath.DRIFT, ReductionPath.AUTO):
            designated = list(perturbations) if perturbations is not None else gen.channel_labels
            with Timer("Drift reduction check", logging.DEBUG, timing, "drift_check"):
                drift_check = check_drift_reduction(gen, designated, parsed.omega, tol["krylov"],
                                                    self.config.krylov.max_dim, tol["struct"])
            if drift_check.holds:
                with Timer("Drift algebra closure", logging.DEBUG, timing, "closure"):
                    algebra = self._closure(drift_check.space, tol)
                return ReductionPath.DRIFT, algebra, drift_check
            if path is ReductionPath.DRIFT:
                raise CertificateError(
                    f"Drift reduction check fails for channels {drift_check.perturbation_labels} "
                    f"(residual {drift_check.max_residual:.3e})",
                    details={"max_residual": drift_check.max_residual,
                             "perturbation_channels": drift_check.perturbation_labels}
                )
            message = (f"Drift reduction check fails for {drift_check.perturbation_labels}; "
                       f"falling back to the observable algebra")
            logger.warning(message)
            warnings.append(message)

        if path is ReductionPath.FRAME:
            with Timer("Frame algebra", logging.DEBUG, timing, "closure"):
                algebra = frame_algebra(gen, parsed.omega, tol["orth"], self.config.krylov.max_dim, tol["struct"])
            return ReductionPath.FRAME, algebra, drift_check

        with Timer("Observable algebra closure", logging.DEBUG, timing, "closure"):
            algebra = self._closure(space, tol)
        return ReductionPath.OBSERVABLE, algebra, drift_check

    @service_error_handler
    def reduce(self, parsed: ParsedModel, path: Union[str, ReductionPath] = ReductionPath.AUTO,
               seed: Optional[int] = None, perturbations: Optional[Sequence[Union[str, int]]] = None,
               tolerances: Optional[Dict[str, float]] = None) -> ReductionOutcome:
        """Full reduction pipeline; certificate failures are reported, not raised."""
        path = ReductionPath(path)
        seed = self.config.seed if seed is None else seed
        tol = self._tolerances(tolerances)
        gen = parsed.generator
        timing: Dict[str, float] = {}
        warnings: List[str] = []

        with ErrorContext("reduce", {"n": gen.dim_H, "path": path.value}):
            with Timer("Krylov observable space", logging.DEBUG, timing, "krylov"):
                krylov = self._observable_space(parsed, tol)
            warnings.extend(krylov.warnings)

            used_path, algebra, drift_check = self._select_algebra(parsed, path, krylov.space, perturbations,
                                                                   tol, timing, warnings)

            dim_frame = None
            if path is ReductionPath.AUTO or used_path is ReductionPath.FRAME:
                if used_path is ReductionPath.FRAME:
                    dim_frame = algebra.dim
                else:
                    try:
                        dim_frame = frame_algebra(gen, parsed.omega, tol["orth"], self.config.krylov.max_dim,
                                                  tol["struct"]).dim
                    except (CertificateError, ConvergenceError) as e:
                        warnings.append(f"Frame algebra not available: {e.message}")

            wcfg = self.config.wedderburn
            with Timer("Wedderburn decomposition", logging.DEBUG, timing, "wedderburn"):
                structure = wedderburn(algebra, tol["struct"], seed, wcfg.max_resamples, wcfg.cluster_gap,
                                       wcfg.min_partial_isometry, tol["orth"])
                maps = build_reduction_maps(structure, tol["struct"])

            with Timer("Projector certificate", logging.DEBUG, timing, "projector"):
                projector = verify_projector(maps, algebra, krylov.space, max(tol["num"], 1e-9), tol["psd"],
                                             seed=seed)

            ccfg = self.config.certificates
            with Timer("Reduced generator", logging.DEBUG, timing, "reduce"):
                reduced = reduce_generator(gen, maps, parsed.observables, tol=tol["num"], tol_psd=tol["psd"],
                                           struct_tol=tol["struct"], seed=seed, n_random=ccfg.random_samples,
                                           unbounded_scale=ccfg.unbounded_control_scale,
                                           max_vertex_channels=ccfg.max_vertex_channels, strict=False)
            warnings.extend(reduced.warnings)

        passed = projector.passed and reduced.passed
        if not passed:
            self._failed_certificates += 1
            logger.error(f"Reduction certificates failed (projector {'ok' if projector.passed else 'FAILED'}, "
                         f"generator {'ok' if reduced.passed else 'FAILED'})")

        report = ReductionReport(
            run_id=generate_run_id(),
            version=__version__,
            seed=seed,
            tolerances=tol,
            path=used_path,
            n=gen.dim_H,
            n_reduced=maps.dim_reduced,
            dim_observable=krylov.dim,
            dim_algebra=algebra.dim,
            dim_frame=dim_frame,
            blocks=list(structure.blocks),
            no_reduction=reduced.no_reduction,
            krylov_iterations=krylov.iterations,
            krylov_growth=krylov.growth_log,
            krylov_residual=krylov.invariance_residual,
            drift_check=_drift_summary(drift_check) if drift_check is not None else None,
            projector=projector.to_summary(),
            certificates=[record.to_summary() for record in reduced.certificates],
            timing=timing,
            warnings=warnings,
            passed=passed,
        )
        document = reduced_model_file(reduced, report, parsed.source)
        self._reductions += 1
        logger.info(f"Reduction via {used_path.value}: n={gen.dim_H} -> n_red={maps.dim_reduced}, "
                    f"blocks {list(structure.blocks)}, {'certified' if passed else 'NOT certified'}")
        return ReductionOutcome(reduced, report, document, krylov, algebra, structure, projector, drift_check)

    @service_error_handler
    def check(self, parsed: ParsedModel, perturbations: Optional[Sequence[Union[str, int]]] = None,
              frame: bool = True, drift: bool = True, seed: Optional[int] = None,
              tolerances: Optional[Dict[str, float]] = None) -> CheckOutcome:
        """Frame-algebra reducibility verdict and drift-reduction invariance check."""
        seed = self.config.seed if seed is None else seed
        tol = self._tolerances(tolerances)
        gen = parsed.generator
        n = gen.dim_H
        outcome = CheckOutcome(report=CheckReport(run_id=generate_run_id(), version=__version__, seed=seed, n=n))
        report = outcome.report

        if frame:
            with Timer("Frame algebra check"):
                algebra = frame_algebra(gen, parsed.omega, tol["orth"], self.config.krylov.max_dim, tol["struct"])
            outcome.frame = algebra
            report.dim_frame = algebra.dim
            report.frame_is_full = algebra.dim == n * n
            if report.frame_is_full:
                report.verdict = "inconclusive"
                report.reducible_to = n
            else:
                wcfg = self.config.wedderburn
                structure = wedderburn(algebra, tol["struct"], seed, wcfg.max_resamples, wcfg.cluster_gap,
                                       wcfg.min_partial_isometry, tol["orth"])
                report.verdict = "reducible"
                report.reducible_to = structure.n_reduced
                report.frame_blocks = list(structure.blocks)

        if drift:
            designated = list(perturbations) if perturbations is not None else gen.channel_labels
            outcome.drift_check = check_drift_reduction(gen, designated, parsed.omega, tol["krylov"],
                                                        self.config.krylov.max_dim, tol["struct"])
            report.drift_check = _drift_summary(outcome.drift_check)

        self._checks += 1
        logger.info(f"Check: frame dim {report.dim_frame} of {n * n} ({report.verdict}), "
                    f"drift check {report.drift_check.holds if report.drift_check else 'skipped'}")
        return outcome

    def get_service_stats(self) -> Dict[str, Any]:
        """Get service statistics."""
        return {
            "service": "reduction",
            "stats": {
                "reductions": self._reductions,
                "checks": self._checks,
                "failed_certificates": self._failed_certificates,
                "seed": self.config.seed,
                "krylov_max_dim": self.config.krylov.max_dim,
            }
        }


# Service instance
_reduction_service = None


def get_reduction_service() -> ReductionService:
    """Get or create the reduction service instance."""
    global _reduction_service
    if _reduction_service is None:
        _reduction_service = ReductionService()
    return _reduction_service
