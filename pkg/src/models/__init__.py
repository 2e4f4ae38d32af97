"""Models package initialization."""

from .schemas import (
    FORMAT_VERSION,

    # Enums
    ChannelKind,
    ReductionPath,
    OutputFormat,

    # Matrix encodings
    DenseMatrix,
    PauliTerm,
    PauliMatrix,
    MatrixSpec,

    # File formats
    ControlChannelSpec,
    ObservableSpec,
    ModelFile,
    SegmentSpec,
    ScheduleFile,
    StateFile,
    WedderburnSpec,
    ReducedModelFile,
    TrajectoryFile,

    # Reports
    CertificateSummary,
    ProjectorSummary,
    DriftCheckSummary,
    ReductionReport,
    ComparisonEntry,
    ComparisonReport,
    CheckReport
)

__all__ = [
    "FORMAT_VERSION",

    # Enums
    "ChannelKind",
    "ReductionPath",
    "OutputFormat",

    # Matrix encodings
    "DenseMatrix",
    "PauliTerm",
    "PauliMatrix",
    "MatrixSpec",

    # File formats
    "ControlChannelSpec",
    "ObservableSpec",
    "ModelFile",
    "SegmentSpec",
    "ScheduleFile",
    "StateFile",
    "WedderburnSpec",
    "ReducedModelFile",
    "TrajectoryFile",

    # Reports
    "CertificateSummary",
    "ProjectorSummary",
    "DriftCheckSummary",
    "ReductionReport",
    "ComparisonEntry",
    "ComparisonReport",
    "CheckReport"
]
