"""
Central-spin benchmark: one qubit (qubit 0) coupled through z-z interactions
to N dephasing bath qubits, with x and z controls on the central spin.

Full-space index convention: |s> (x) |j> has index s * 2^N + j, and bath qubit
k (1..N) is bit N - k of j. The analytic oracle labels blocks by q, where bit
k - 1 of q is the state of bath qubit k, so q and j are bit reversals of each other.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg as sla

from ..models.schemas import ModelFile
from ..utils.exceptions import ValidationError, validate_and_raise
from ..utils.helpers import make_rng
from .operators import PAULI_MATRICES, Operator, check_density
from .propagation import ControlSchedule, Trajectory, _check_times

logger = logging.getLogger(__name__)

DISSIPATION_AXES = {"x": "X", "y": "Y", "+": "+", "-": "-"}
DISSIPATION_MODES = ("local", "collective")


@dataclass(frozen=True, eq=False)
class CentralSpinParameters:
    """Couplings of the central-spin model.

    ``J[0, k]`` couples the central spin to bath qubit k, ``J[k, k]`` is the
    single-body field on bath qubit k and ``J[j, k]`` (1 <= j < k) the bath z-z
    coupling. ``gammas[k - 1]`` is the dephasing amplitude of bath qubit k.
    """
    N: int
    J: np.ndarray
    gammas: np.ndarray
    omega: float = 0.0
    single_axis: bool = False
    bath_dissipation: Optional[str] = None
    dissipation_axis: str = "x"
    dissipation_site: int = 1
    seed: Optional[int] = None

    def __post_init__(self):
        validate_and_raise(isinstance(self.N, (int, np.integer)) and self.N >= 1, f"N must be >= 1, got {self.N}")
        J = np.asarray(self.J, dtype=float)
        validate_and_raise(J.shape == (self.N + 1, self.N + 1),
                           f"Couplings must have shape {(self.N + 1, self.N + 1)}, got {J.shape}")
        gammas = np.asarray(self.gammas, dtype=float).reshape(-1)
        validate_and_raise(gammas.shape == (self.N,), f"Expected {self.N} dephasing rates, got {gammas.size}")
        validate_and_raise(bool(np.all(gammas >= 0.0)), "Dephasing amplitudes must be nonnegative")
        if self.bath_dissipation is not None:
            validate_and_raise(self.bath_dissipation in DISSIPATION_MODES,
                               f"Bath dissipation must be one of {DISSIPATION_MODES}")
            validate_and_raise(self.dissipation_axis in DISSIPATION_AXES,
                               f"Dissipation axis must be one of {sorted(DISSIPATION_AXES)}")
            validate_and_raise(1 <= self.dissipation_site <= self.N,
                               f"Dissipation site must lie in 1..{self.N}, got {self.dissipation_site}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "gammas", gammas)

    @classmethod
    def random(cls, N: int, seed: Optional[int] = None, **variants) -> "CentralSpinParameters":
        """Seeded couplings: all J entries uniform in [-1, 1], rates uniform in [0.1, 0.5]."""
        rng = make_rng(seed)
        J = np.triu(rng.uniform(-1.0, 1.0, size=(N + 1, N + 1)))
        J[0, 0] = 0.0
        gammas = rng.uniform(0.1, 0.5, size=N)
        return cls(N, J, gammas, seed=seed, **variants)

    @property
    def dim(self) -> int:
        return 2 ** (self.N + 1)

    @property
    def num_controls(self) -> int:
        return (1 if self.single_axis else 2) + (1 if self.bath_dissipation else 0)


def _single_site(char: str, site: int, width: int) -> str:
    return "".join(char if k == site else "I" for k in range(width))


def _pair(site_a: int, site_b: int, width: int) -> str:
    return "".join("Z" if k in (site_a, site_b) else "I" for k in range(width))


def _pauli(terms: List[Dict[str, Any]], width: int) -> Dict[str, Any]:
    terms = [t for t in terms if t["coeff"][0] != 0.0 or t["coeff"][1] != 0.0]
    if not terms:
        terms = [{"string": "I" * width, "coeff": [0.0, 0.0]}]
    return {"pauli": terms}


def generate_central_spin(N: int, J: Optional[np.ndarray] = None, gammas: Optional[Sequence[float]] = None,
                          seed: Optional[int] = None, **variants) -> ModelFile:
    """Model file of the central-spin benchmark; missing couplings are drawn from ``seed``."""
    if J is None or gammas is None:
        params = CentralSpinParameters.random(N, seed, **variants)
        if J is not None:
            params = CentralSpinParameters(N, J, params.gammas, seed=seed, **variants)
        elif gammas is not None:
            params = CentralSpinParameters(N, params.J, gammas, seed=seed, **variants)
    else:
        params = CentralSpinParameters(N, J, gammas, seed=seed, **variants)
    return central_spin_model_file(params)


def central_spin_model_file(params: CentralSpinParameters) -> ModelFile:
    N, J = params.N, params.J
    width = N + 1
    drift = [{"string": _single_site("Z", 0, width), "coeff": [params.omega, 0.0]}]
    for k in range(1, N + 1):
        drift.append({"string": _pair(0, k, width), "coeff": [float(J[0, k]), 0.0]})
    for k in range(1, N + 1):
        drift.append({"string": _single_site("Z", k, width), "coeff": [float(J[k, k]), 0.0]})
        for j in range(1, k):
            drift.append({"string": _pair(j, k, width), "coeff": [float(J[j, k]), 0.0]})

    noise = [_pauli([{"string": _single_site("Z", k, width), "coeff": [float(params.gammas[k - 1]), 0.0]}], width)
             for k in range(1, N + 1) if params.gammas[k - 1] > 0.0]

    channels = [{"kind": "hamiltonian", "label": "u0",
                 "operator": _pauli([{"string": _single_site("X", 0, width), "coeff": [1.0, 0.0]}], width)}]
    if not params.single_axis:
        channels.append({"kind": "hamiltonian", "label": "u1",
                         "operator": _pauli([{"string": _single_site("Z", 0, width), "coeff": [1.0, 0.0]}], width)})
    if params.bath_dissipation is not None:
        char = DISSIPATION_AXES[params.dissipation_axis]
        sites = [params.dissipation_site] if params.bath_dissipation == "local" else range(1, N + 1)
        L = _pauli([{"string": _single_site(char, k, width), "coeff": [1.0, 0.0]} for k in sites], width)
        channels.append({"kind": "dissipator", "label": "u2", "operator": L, "coefficient_domain": [0.0, None]})

    observables = [{"label": f"{axis}0", "operator": _pauli([{"string": _single_site(axis, 0, width),
                                                              "coeff": [1.0, 0.0]}], width)}
                   for axis in ("I", "X", "Y", "Z")]

    metadata = {
        "generator": "central_spin",
        "N": N,
        "J": J.tolist(),
        "gammas": params.gammas.tolist(),
        "omega": params.omega,
        "single_axis": params.single_axis,
        "bath_dissipation": params.bath_dissipation,
        "dissipation_axis": params.dissipation_axis if params.bath_dissipation else None,
        "dissipation_site": params.dissipation_site if params.bath_dissipation == "local" else None,
        "seed": params.seed,
    }
    logger.info(f"Central-spin model: N={N}, dim={params.dim}, channels={[c['label'] for c in channels]}")
    return ModelFile(dim=params.dim, hamiltonian_drift=_pauli(drift, width), noise_drift=noise,
                     control_channels=channels, observables=observables, metadata=metadata)


def parameters_from_metadata(metadata: Dict[str, Any]) -> CentralSpinParameters:
    """Rebuild the parameters recorded by the generator in a model file."""
    validate_and_raise(metadata.get("generator") == "central_spin", "Model was not produced by the central-spin generator")
    return CentralSpinParameters(
        N=int(metadata["N"]),
        J=np.asarray(metadata["J"]),
        gammas=np.asarray(metadata["gammas"]),
        omega=float(metadata.get("omega", 0.0)),
        single_axis=bool(metadata.get("single_axis", False)),
        bath_dissipation=metadata.get("bath_dissipation"),
        dissipation_axis=metadata.get("dissipation_axis") or "x",
        dissipation_site=metadata.get("dissipation_site") or 1,
        seed=metadata.get("seed"),
    )


# Analytic block oracle

def bath_state_index(q: int, N: int) -> int:
    """Bath basis index j of block q (bit reversal over N bits)."""
    return int(format(q, f"0{N}b")[::-1], 2) if N > 0 else 0


def central_spin_betas(J: np.ndarray, N: int) -> np.ndarray:
    """beta_q = sum_k (-1)^{bit k-1 of q} J[0, k] for q = 0 .. 2^N - 1."""
    J = np.asarray(J, dtype=float)
    q = np.arange(2 ** N)
    signs = np.stack([1 - 2 * ((q >> (k - 1)) & 1) for k in range(1, N + 1)], axis=1)
    return signs @ J[0, 1:N + 1]


def analytic_block_hamiltonian(beta: float, u: Sequence[float], omega: float = 0.0,
                               single_axis: bool = False) -> Operator:
    """(beta + omega + u1) sigma_z + u0 sigma_x on the central spin of one block."""
    u0 = float(u[0])
    u1 = 0.0 if single_axis else float(u[1])
    return (beta + omega + u1) * PAULI_MATRICES["Z"] + u0 * PAULI_MATRICES["X"]


_AXES = {"i": "I", "0": "I", "x": "X", "y": "Y", "z": "Z"}


def analytic_central_spin(params: CentralSpinParameters, schedule: ControlSchedule, rho,
                          ell: str, sample_times) -> Trajectory:
    """<sigma_ell^(0)(t)> as the sum of 2^N independent two-level Heisenberg evolutions.

    Block q sees the state W_q rho W_q^dag, where W_q selects |0, j> and |1, j>
    with j the bath index of q; the dephasing noise is proportional to the
    identity on every block and drops out.
    """
    key = str(ell).lower()
    if len(key) == 2 and key.endswith("0"):
        key = key[0]
    axis = _AXES.get(key)
    if axis is None:
        raise ValidationError(f"Unknown central-spin axis '{ell}'; use one of i, x, y, z")
    validate_and_raise(params.bath_dissipation is None,
                       "The analytic oracle covers the Hamiltonian-controlled model only")
    N = params.N
    width = 1 if params.single_axis else 2
    for i, (_, u) in enumerate(schedule.segments):
        validate_and_raise(u.size >= width and not np.any(u[width:]),
                           f"Segment {i} does not match the central-spin controls")
    rho = check_density(rho, dim=params.dim)
    times = _check_times(schedule, sample_times)
    sigma = PAULI_MATRICES[axis]
    betas = central_spin_betas(params.J, N)
    half = 2 ** N

    values = np.zeros(len(times))
    for q in range(half):
        j = bath_state_index(q, N)
        rows = [j, half + j]
        block_state = rho[np.ix_(rows, rows)]
        if abs(np.trace(block_state)) == 0.0:
            continue
        hamiltonians = [analytic_block_hamiltonian(betas[q], u, params.omega, params.single_axis)
                        for _, u in schedule.segments]
        values += _block_expectations(hamiltonians, schedule, sigma, block_state, times)
    return Trajectory(times, values, label=f"{axis}0")


def _block_expectations(hamiltonians: List[Operator], schedule: ControlSchedule, sigma: Operator,
                        state: Operator, times: np.ndarray) -> np.ndarray:
    """tr[V(t)^dag sigma V(t) state] with V accumulating later segments on the right."""
    out = np.empty(len(times))
    V = np.eye(2, dtype=complex)
    eps = 1e-12 * max(1.0, schedule.total_duration)
    ti, t0 = 0, 0.0
    for H, (duration, _) in zip(hamiltonians, schedule.segments):
        t1 = t0 + duration
        while ti < len(times) and times[ti] <= t1 + eps:
            tau = min(times[ti] - t0, duration)
            Vt = V @ sla.expm(-1j * H * tau) if tau > eps else V
            out[ti] = np.trace(Vt.conj().T @ sigma @ Vt @ state).real
            ti += 1
        V = V @ sla.expm(-1j * H * duration)
        t0 = t1
    while ti < len(times):
        out[ti] = np.trace(V.conj().T @ sigma @ V @ state).real
        ti += 1
    return out
