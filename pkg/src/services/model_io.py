"""
Model File IO
Reads and writes the versioned JSON formats (models, schedules, states,
reduced models, trajectories) through the pydantic schemas, and converts
between matrix encodings and numpy operators.
"""

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel
from pydantic import ValidationError as SchemaError

from ..models.schemas import (
    ChannelKind,
    ControlChannelSpec,
    DenseMatrix,
    ModelFile,
    OutputFormat,
    PauliMatrix,
    ReducedModelFile,
    ReductionReport,
    ScheduleFile,
    StateFile,
    TrajectoryFile,
    WedderburnSpec,
)
from ..utils.exceptions import DimensionMismatchError, ValidationError, validate_and_raise
from ..utils.helpers import ensure_parent_directory
from .krylov import observable_subspace
from .lindblad import CoefficientDomain, ControlChannel, ControlledLindbladGenerator
from .operators import Operator, OperatorSubspace, check_density, pauli_sum
from .propagation import ControlSchedule
from .reduction import ReducedModel, ReductionMaps, build_reduction_maps
from .star_algebra import WedderburnStructure

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]
SchemaT = TypeVar("SchemaT", bound=BaseModel)


# Matrix encodings

def decode_matrix(spec: Union[DenseMatrix, PauliMatrix], dim: Optional[int] = None, name: str = "matrix") -> Operator:
    """Dense or Pauli-string encoding to a complex numpy array."""
    if isinstance(spec, PauliMatrix):
        X = pauli_sum([(term.string, complex(*term.coeff)) for term in spec.pauli])
    else:
        X = np.asarray(spec.re, dtype=float).astype(complex)
        if spec.im is not None:
            X = X + 1j * np.asarray(spec.im, dtype=float)
    if dim is not None and X.shape != (dim, dim):
        raise DimensionMismatchError(f"{name} has shape {X.shape}, expected ({dim}, {dim})",
                                     details={"field": name, "shape": list(X.shape), "dim": dim})
    return X


def encode_matrix(X: Operator) -> DenseMatrix:
    """Dense row-major encoding; the imaginary part is omitted when it vanishes exactly."""
    X = np.asarray(X, dtype=complex)
    im = X.imag.tolist() if np.any(X.imag) else None
    return DenseMatrix(re=X.real.tolist(), im=im)


# Generic file helpers

def _format_schema_error(error: SchemaError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ())) or "<root>"
        problems.append(f"{location}: {item.get('msg')}")
    return "; ".join(problems)


def validate_payload(payload: Any, schema: Type[SchemaT], source: str = "<data>") -> SchemaT:
    """Validate a decoded JSON payload, reporting the offending field paths."""
    try:
        return schema.model_validate(payload)
    except SchemaError as e:
        fields = [".".join(str(part) for part in item.get("loc", ())) for item in e.errors()]
        raise ValidationError(
            f"{source}: {_format_schema_error(e)}",
            error_code="SCHEMA_ERROR",
            details={"source": source, "fields": fields}
        )


def _load_payload(path: Path) -> Any:
    if not path.exists():
        raise ValidationError(f"File not found: {path}", error_code="FILE_NOT_FOUND", details={"path": str(path)})
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(
            f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}",
            error_code="JSON_ERROR",
            details={"path": str(path), "line": e.lineno, "column": e.colno}
        )


def read_json(path: PathLike, schema: Type[SchemaT]) -> SchemaT:
    """Load a JSON file into a schema; malformed JSON is reported with its line and column."""
    path = Path(path)
    return validate_payload(_load_payload(path), schema, str(path))


def read_model_document(path: PathLike) -> Union[ModelFile, ReducedModelFile]:
    """Model or reduced-model file, told apart by its 'kind' field."""
    path = Path(path)
    payload = _load_payload(path)
    kind = payload.get("kind") if isinstance(payload, dict) else None
    schema = ReducedModelFile if kind == "reduced_model" else ModelFile
    return validate_payload(payload, schema, str(path))


def write_json(path: PathLike, document: Union[BaseModel, Dict[str, Any]]) -> str:
    """Atomic write through a temporary file next to the target."""
    path = str(path)
    ensure_parent_directory(path)
    payload = document.model_dump(mode="json") if isinstance(document, BaseModel) else document
    temp_file = path + ".tmp"
    try:
        with open(temp_file, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
        os.replace(temp_file, path)
    finally:
        if os.path.exists(temp_file):
            os.remove(temp_file)
    logger.debug(f"Wrote {path}")
    return path


# Models

@dataclass(frozen=True, eq=False)
class ParsedModel:
    """Generator, labelled observables and the observable set Omega (identity included)."""
    generator: ControlledLindbladGenerator
    observables: Tuple[Tuple[str, Operator], ...]
    omega: OperatorSubspace
    metadata: Dict[str, Any]
    source: ModelFile

    def select_observables(self, labels: Optional[Sequence[str]]) -> "ParsedModel":
        """Restrict Omega to the named observables; None keeps all of them."""
        if not labels:
            return self
        known = {label: O for label, O in self.observables}
        unknown = [label for label in labels if label not in known]
        validate_and_raise(not unknown, f"Unknown observables {unknown}; known: {list(known)}")
        chosen = tuple((label, known[label]) for label in labels)
        omega = observable_subspace([O for _, O in chosen], self.generator.dim_H)
        return ParsedModel(self.generator, chosen, omega, self.metadata, self.source)


def _channel_from_spec(spec: ControlChannelSpec, dim: int) -> ControlChannel:
    low, high = spec.domain_bounds()
    domain = CoefficientDomain(low, high)
    name = f"control_channels[{spec.label}]"
    if spec.kind == ChannelKind.HAMILTONIAN:
        return ControlChannel.hamiltonian(decode_matrix(spec.operator, dim, name), spec.label, domain)
    specs = [spec.operator] if spec.operator is not None else spec.operators
    return ControlChannel.dissipator([decode_matrix(op, dim, name) for op in specs], spec.label, domain)


def model_from_file(model: ModelFile) -> ParsedModel:
    n = model.dim
    H0 = decode_matrix(model.hamiltonian_drift, n, "hamiltonian_drift")
    noise = tuple(decode_matrix(L, n, f"noise_drift[{i}]") for i, L in enumerate(model.noise_drift))
    channels = tuple(_channel_from_spec(spec, n) for spec in model.control_channels)
    gen = ControlledLindbladGenerator(n, H0, noise, channels)
    observables = tuple((obs.label, decode_matrix(obs.operator, n, f"observables[{obs.label}]"))
                        for obs in model.observables)
    omega = observable_subspace([O for _, O in observables], n)
    logger.info(f"Parsed model: n={n}, {len(noise)} noise operators, channels {gen.channel_labels}, "
                f"{len(observables)} observables")
    return ParsedModel(gen, observables, omega, dict(model.metadata), model)


def parse_model(source: Union[PathLike, ModelFile, Dict[str, Any]]) -> ParsedModel:
    """Model file, schema object or decoded payload to a generator plus observables."""
    if isinstance(source, ModelFile):
        return model_from_file(source)
    if isinstance(source, dict):
        return model_from_file(validate_payload(source, ModelFile))
    return model_from_file(read_json(source, ModelFile))


def serialize_model(gen: ControlledLindbladGenerator, observables: Sequence[Tuple[str, Operator]] = (),
                    metadata: Optional[Dict[str, Any]] = None) -> ModelFile:
    channels = []
    for channel in gen.channels:
        entry: Dict[str, Any] = {"kind": channel.kind.value, "label": channel.label}
        if channel.kind is ChannelKind.HAMILTONIAN or len(channel.operators) == 1:
            entry["operator"] = encode_matrix(channel.operators[0])
        else:
            entry["operators"] = [encode_matrix(L) for L in channel.operators]
        domain = channel.coefficient_domain
        entry["coefficient_domain"] = "unconstrained" if domain.is_unconstrained else domain.to_list()
        channels.append(entry)
    return ModelFile(
        dim=gen.dim_H,
        hamiltonian_drift=encode_matrix(gen.H0),
        noise_drift=[encode_matrix(L) for L in gen.noise_drift],
        control_channels=channels,
        observables=[{"label": label, "operator": encode_matrix(O)} for label, O in observables],
        metadata=metadata or {},
    )


def model_fingerprint(model: ModelFile) -> str:
    """SHA-256 of the canonical JSON of everything but the metadata."""
    payload = model.model_dump(mode="json", exclude={"metadata"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Schedules and states

def schedule_from_file(schedule: ScheduleFile) -> ControlSchedule:
    return ControlSchedule(tuple((segment.duration, np.asarray(segment.u, dtype=float))
                                 for segment in schedule.segments))


def parse_schedule(source: Union[PathLike, ScheduleFile]) -> ControlSchedule:
    if isinstance(source, ScheduleFile):
        return schedule_from_file(source)
    return schedule_from_file(read_json(source, ScheduleFile))


def serialize_schedule(schedule: ControlSchedule) -> ScheduleFile:
    return ScheduleFile(segments=[{"duration": duration, "u": u.tolist()} for duration, u in schedule.segments])


def state_from_file(state: StateFile, dim: Optional[int] = None, tol_trace: float = 1e-8,
                    tol_psd: float = 1e-9) -> Operator:
    """Density matrix of a state file; amplitude vectors become |psi><psi| after normalization."""
    if state.vector is not None:
        psi = np.array([complex(re, im) for re, im in state.vector])
        norm = np.linalg.norm(psi)
        validate_and_raise(norm > 0.0, "State vector is zero")
        if abs(norm - 1.0) > tol_trace:
            logger.warning(f"State vector has norm {norm:.6g}; normalizing")
        psi = psi / norm
        rho = np.outer(psi, psi.conj())
    else:
        rho = decode_matrix(state.state, name="state")
    return check_density(rho, tol_trace, tol_psd, dim=dim, name="state")


def parse_state(source: Union[PathLike, StateFile], dim: Optional[int] = None,
                tol_trace: float = 1e-8, tol_psd: float = 1e-9) -> Operator:
    if isinstance(source, StateFile):
        return state_from_file(source, dim, tol_trace, tol_psd)
    return state_from_file(read_json(source, StateFile), dim, tol_trace, tol_psd)


def serialize_state(rho: Operator) -> StateFile:
    return StateFile(state=encode_matrix(rho))


# Reduced models

@dataclass(frozen=True, eq=False)
class LoadedReducedModel:
    """Reduced model file brought back to generator, observables and reduction maps."""
    model: ParsedModel
    maps: ReductionMaps
    source_fingerprint: str
    report: ReductionReport
    source: ReducedModelFile

    @property
    def generator(self) -> ControlledLindbladGenerator:
        return self.model.generator


def reduced_model_file(reduced: ReducedModel, report: ReductionReport, source_model: ModelFile) -> ReducedModelFile:
    W = reduced.maps.wedderburn
    metadata = {"reduced_from": dict(source_model.metadata), "path": report.path.value}
    return ReducedModelFile(
        source_dim=reduced.maps.dim_H,
        reduced_dim=reduced.dim_reduced,
        source_fingerprint=model_fingerprint(source_model),
        wedderburn=WedderburnSpec(unitary=encode_matrix(W.U), blocks=[list(b) for b in W.blocks]),
        reduced_model=serialize_model(reduced.generator, reduced.reduced_observables, metadata),
        report=report,
    )


def load_reduced_model(source: Union[PathLike, ReducedModelFile], tol: float = 1e-8) -> LoadedReducedModel:
    document = source if isinstance(source, ReducedModelFile) else read_json(source, ReducedModelFile)
    U = decode_matrix(document.wedderburn.unitary, document.source_dim, "wedderburn.unitary")
    W = WedderburnStructure(document.source_dim, U, tuple(tuple(b) for b in document.wedderburn.blocks))
    maps = build_reduction_maps(W, tol)
    model = model_from_file(document.reduced_model)
    return LoadedReducedModel(model, maps, document.source_fingerprint, document.report, document)


# Trajectories

def trajectory_file(times: Sequence[float], series: Dict[str, Sequence[float]]) -> TrajectoryFile:
    return TrajectoryFile(times=[float(t) for t in times],
                          series={label: [float(v) for v in values] for label, values in series.items()})


def write_trajectories(path: PathLike, trajectories: TrajectoryFile,
                       output_format: Union[str, OutputFormat] = OutputFormat.CSV) -> str:
    """CSV with a 'time' column plus one column per series, or the JSON document."""
    output_format = OutputFormat(output_format)
    if output_format is OutputFormat.JSON:
        return write_json(path, trajectories)
    path = ensure_parent_directory(str(path))
    labels = list(trajectories.series)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time"] + labels)
        for i, t in enumerate(trajectories.times):
            writer.writerow([repr(t)] + [repr(trajectories.series[label][i]) for label in labels])
    logger.debug(f"Wrote {len(trajectories.times)} rows to {path}")
    return path


def read_trajectories(path: PathLike) -> TrajectoryFile:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_json(path, TrajectoryFile)
    validate_and_raise(path.exists(), f"File not found: {path}", error_code="FILE_NOT_FOUND")
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    validate_and_raise(len(rows) > 0 and rows[0] and rows[0][0] == "time",
                       f"{path}: expected a header starting with 'time'")
    header = rows[0]
    columns: List[List[float]] = [[] for _ in header]
    for line, row in enumerate(rows[1:], start=2):
        validate_and_raise(len(row) == len(header), f"{path}: line {line} has {len(row)} fields, expected {len(header)}",
                           details={"line": line})
        try:
            for column, value in zip(columns, row):
                column.append(float(value))
        except ValueError:
            raise ValidationError(f"{path}: line {line} has a non-numeric value", details={"line": line})
    return trajectory_file(columns[0], dict(zip(header[1:], columns[1:])))
