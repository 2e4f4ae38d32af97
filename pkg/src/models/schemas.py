"""
Data Models for qmr
Pydantic models for the JSON file formats (models, schedules, states, reduced
models, trajectories) and for the machine-readable reports.
"""

from datetime import datetime
from typing import Optional, Dict, Any, List, Literal, Tuple, Union
from pydantic import BaseModel, Field, field_validator, model_validator
from enum import Enum

FORMAT_VERSION = 1


class ChannelKind(str, Enum):
    """Kinds of affine control channels."""
    HAMILTONIAN = "hamiltonian"
    DISSIPATOR = "dissipator"


class ReductionPath(str, Enum):
    """Which algebra the reduction projects onto."""
    AUTO = "auto"
    OBSERVABLE = "observable"
    FRAME = "frame"
    DRIFT = "drift"


class OutputFormat(str, Enum):
    """Trajectory export formats."""
    CSV = "csv"
    JSON = "json"


# Matrix encodings
class DenseMatrix(BaseModel):
    """Row-major real and imaginary parts."""
    re: List[List[float]]
    im: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def validate_shape(self):
        rows = len(self.re)
        if rows == 0 or any(len(row) != rows for row in self.re):
            raise ValueError("'re' must be a non-empty square matrix")
        if self.im is not None and (len(self.im) != rows or any(len(row) != rows for row in self.im)):
            raise ValueError("'im' must have the same square shape as 're'")
        return self


class PauliTerm(BaseModel):
    """One Pauli string with a complex coefficient; leftmost character acts on qubit 0."""
    string: str = Field(..., min_length=1, pattern=r"^[IXYZ+\-]+$")
    coeff: Tuple[float, float] = (1.0, 0.0)

    @field_validator("coeff", mode="before")
    @classmethod
    def coerce_coeff(cls, v):
        """Accept a bare real number as coefficient."""
        if isinstance(v, (int, float)):
            return (float(v), 0.0)
        return v


class PauliMatrix(BaseModel):
    """Sum of Pauli strings, expanded by Kronecker products in string order."""
    pauli: List[PauliTerm] = Field(..., min_length=1)

    @field_validator("pauli")
    @classmethod
    def validate_lengths(cls, v):
        """All strings must address the same number of qubits."""
        widths = {len(term.string) for term in v}
        if len(widths) != 1:
            raise ValueError(f"Pauli strings of different lengths: {sorted(widths)}")
        return v


MatrixSpec = Union[DenseMatrix, PauliMatrix]


# Model file
class ControlChannelSpec(BaseModel):
    """Serialized control channel."""
    kind: ChannelKind
    label: str = Field(..., min_length=1)
    operator: Optional[MatrixSpec] = None
    operators: Optional[List[MatrixSpec]] = None
    coefficient_domain: Union[Literal["unconstrained"], List[Optional[float]]] = "unconstrained"

    @field_validator("coefficient_domain")
    @classmethod
    def validate_domain(cls, v):
        """Domains are 'unconstrained' or [low, high] with null for an open end."""
        if v == "unconstrained":
            return v
        if len(v) != 2:
            raise ValueError("coefficient_domain must be [low, high]")
        low, high = v
        if low is not None and high is not None and low > high:
            raise ValueError(f"coefficient_domain [{low}, {high}] is empty")
        return v

    @model_validator(mode="after")
    def validate_operators(self):
        if (self.operator is None) == (self.operators is None):
            raise ValueError(f"channel '{self.label}' needs exactly one of 'operator' or 'operators'")
        if self.kind == ChannelKind.HAMILTONIAN and self.operator is None:
            raise ValueError(f"hamiltonian channel '{self.label}' takes a single 'operator'")
        if self.kind == ChannelKind.DISSIPATOR:
            domain = self.coefficient_domain
            if domain == "unconstrained" or domain[0] is None or domain[0] < 0:
                raise ValueError(f"dissipator channel '{self.label}' needs a coefficient_domain within [0, inf)")
        return self

    def domain_bounds(self) -> Tuple[Optional[float], Optional[float]]:
        if self.coefficient_domain == "unconstrained":
            return None, None
        return self.coefficient_domain[0], self.coefficient_domain[1]


class ObservableSpec(BaseModel):
    """Labelled target observable."""
    label: str = Field(..., min_length=1)
    operator: MatrixSpec


class ModelFile(BaseModel):
    """Controlled Lindblad model with its target observables."""
    format_version: int = FORMAT_VERSION
    kind: Literal["model"] = "model"
    dim: int = Field(..., ge=1)
    hamiltonian_drift: MatrixSpec
    noise_drift: List[MatrixSpec] = Field(default_factory=list)
    control_channels: List[ControlChannelSpec] = Field(default_factory=list)
    observables: List[ObservableSpec] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("format_version")
    @classmethod
    def validate_version(cls, v):
        if v != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {v}, expected {FORMAT_VERSION}")
        return v

    @model_validator(mode="after")
    def validate_labels(self):
        labels = [obs.label for obs in self.observables]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate observable labels: {labels}")
        return self


# Schedule and state files
class SegmentSpec(BaseModel):
    """Constant-control segment."""
    duration: float = Field(..., gt=0)
    u: List[float] = Field(default_factory=list)


class ScheduleFile(BaseModel):
    """Piecewise-constant control schedule."""
    format_version: int = FORMAT_VERSION
    kind: Literal["schedule"] = "schedule"
    segments: List[SegmentSpec] = Field(..., min_length=1)


class StateFile(BaseModel):
    """Initial state as a density matrix or as a pure-state amplitude vector."""
    format_version: int = FORMAT_VERSION
    kind: Literal["state"] = "state"
    state: Optional[MatrixSpec] = None
    vector: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def validate_one_of(self):
        if (self.state is None) == (self.vector is None):
            raise ValueError("state file needs exactly one of 'state' or 'vector'")
        if self.vector is not None and len(self.vector) == 0:
            raise ValueError("'vector' must not be empty")
        return self


# Reports
class CertificateSummary(BaseModel):
    """Reduced-generator checks at one control value: exactness against R L_u J, and
    the Lindblad certificate of the explicitly assembled generator."""
    label: str
    u: List[float] = Field(default_factory=list)
    passed: bool
    exact: Optional[bool] = None
    construction_consistent: Optional[bool] = None
    unital_residual: float
    hermiticity_residual: float
    kossakowski_min_eigenvalue: float
    reconstruction_residual: float
    restriction_residual: float
    num_noise_ops: int = 0


class ProjectorSummary(BaseModel):
    """Residuals of the conditional-expectation checks."""
    passed: bool
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
    observable_residual: Optional[float] = None


class DriftCheckSummary(BaseModel):
    """Invariance of the drift observable space under designated channels."""
    perturbation_channels: List[str]
    holds: bool
    dim_base_space: int
    max_residual: float


class ReductionReport(BaseModel):
    """Machine-readable record of one reduction run."""
    run_id: str
    created_at: datetime = Field(default_factory=datetime.now)
    version: str
    seed: int
    tolerances: Dict[str, float]
    path: ReductionPath
    n: int
    n_reduced: int
    dim_observable: int
    dim_algebra: int
    dim_frame: Optional[int] = None
    blocks: List[Tuple[int, int]]
    no_reduction: bool
    krylov_iterations: int
    krylov_growth: List[Tuple[int, int]] = Field(default_factory=list)
    krylov_residual: float
    drift_check: Optional[DriftCheckSummary] = None
    projector: ProjectorSummary
    certificates: List[CertificateSummary] = Field(default_factory=list)
    timing: Dict[str, float] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    passed: bool

    @model_validator(mode="after")
    def validate_consistency(self):
        if self.n_reduced != sum(dF for dF, _ in self.blocks):
            raise ValueError("n_reduced must equal the sum of the block dimensions dF")
        if self.dim_algebra != sum(dF * dF for dF, _ in self.blocks):
            raise ValueError("dim_algebra must equal the sum of dF^2")
        if self.n != sum(dF * dG for dF, dG in self.blocks):
            raise ValueError("n must equal the sum of dF * dG")
        return self


class WedderburnSpec(BaseModel):
    """Serialized Wedderburn structure."""
    unitary: DenseMatrix
    blocks: List[Tuple[int, int]] = Field(..., min_length=1)


class ReducedModelFile(BaseModel):
    """Reduced model plus everything needed to map states and observables onto it."""
    format_version: int = FORMAT_VERSION
    kind: Literal["reduced_model"] = "reduced_model"
    source_dim: int = Field(..., ge=1)
    reduced_dim: int = Field(..., ge=1)
    source_fingerprint: str
    wedderburn: WedderburnSpec
    reduced_model: ModelFile
    report: ReductionReport

    @model_validator(mode="after")
    def validate_dims(self):
        if self.reduced_model.dim != self.reduced_dim:
            raise ValueError("reduced_model.dim must equal reduced_dim")
        if sum(dF for dF, _ in self.wedderburn.blocks) != self.reduced_dim:
            raise ValueError("block dimensions do not add up to reduced_dim")
        return self


class ComparisonEntry(BaseModel):
    """Deviation of one (state, schedule, observable) trajectory pair."""
    state_index: int
    schedule_index: int
    observable: str
    max_deviation: float
    scale: float
    passed: bool


class ComparisonReport(BaseModel):
    """Full-versus-reduced trajectory comparison."""
    run_id: str
    created_at: datetime = Field(default_factory=datetime.now)
    version: str
    seed: int
    tolerance: float
    n: int
    n_reduced: int
    num_samples: int
    max_deviation: float
    passed: bool
    fingerprint_match: Optional[bool] = None
    full_seconds: float
    reduced_seconds: float
    speedup: float
    entries: List[ComparisonEntry] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)


class CheckReport(BaseModel):
    """Sufficient-condition checks on a model."""
    run_id: str
    created_at: datetime = Field(default_factory=datetime.now)
    version: str
    seed: int
    n: int
    dim_frame: Optional[int] = None
    frame_is_full: Optional[bool] = None
    verdict: Optional[str] = None
    reducible_to: Optional[int] = None
    frame_blocks: List[Tuple[int, int]] = Field(default_factory=list)
    drift_check: Optional[DriftCheckSummary] = None


class TrajectoryFile(BaseModel):
    """Expectation-value trajectories on a common time grid."""
    format_version: int = FORMAT_VERSION
    kind: Literal["trajectories"] = "trajectories"
    times: List[float]
    series: Dict[str, List[float]]

    @model_validator(mode="after")
    def validate_lengths(self):
        for label, values in self.series.items():
            if len(values) != len(self.times):
                raise ValueError(f"series '{label}' has {len(values)} values for {len(self.times)} times")
        return self
