"""
Controlled Lindblad generators in the Heisenberg picture.

    L_u(O) = i[H_u, O] + sum_k D_{L_k}(O),   D_L(O) = L^dag O L - 1/2 {L^dag L, O}

with H_u = H0 + sum_{hamiltonian channels} u_l H_l and every dissipator channel
contributing u_l * D_{L_l} (rate parametrization, u_l >= 0), so the generator is
affine in u.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from ..models.schemas import ChannelKind
from ..utils.exceptions import (
    CertificateError,
    DimensionMismatchError,
    ValidationError,
    validate_and_raise,
)
from .operators import (
    Operator,
    Superoperator,
    as_operator,
    check_hermitian,
    choi_matrix,
    dagger,
    hs_norm,
    identity,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_TOL_PSD = 1e-9


@dataclass(frozen=True)
class CoefficientDomain:
    """Admissible interval of one control coefficient; None marks an open end."""
    low: Optional[float] = None
    high: Optional[float] = None

    def __post_init__(self):
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValidationError(f"Empty coefficient domain [{self.low}, {self.high}]")

    @classmethod
    def unconstrained(cls) -> "CoefficientDomain":
        return cls(None, None)

    @classmethod
    def nonnegative(cls) -> "CoefficientDomain":
        return cls(0.0, None)

    @property
    def is_unconstrained(self) -> bool:
        return self.low is None and self.high is None

    @property
    def is_degenerate(self) -> bool:
        return self.low is not None and self.high is not None and self.high - self.low <= 0.0

    def contains(self, value: float, tol: float = 1e-12) -> bool:
        if self.low is not None and value < self.low - tol:
            return False
        if self.high is not None and value > self.high + tol:
            return False
        return True

    def finite_bounds(self, scale: float = 1.0) -> Tuple[float, float]:
        """Closed interval used for sampling; open ends are cut at distance ``scale``."""
        low, high = self.low, self.high
        if low is None and high is None:
            return -scale, scale
        if low is None:
            return high - 2.0 * scale, high
        if high is None:
            return low, low + scale
        return low, high

    def to_list(self) -> List[Optional[float]]:
        return [self.low, self.high]


@dataclass(frozen=True, eq=False)
class ControlChannel:
    """One affine control direction.

    Hamiltonian channels carry exactly one self-adjoint operator. Dissipator
    channels carry jump operators sharing a single nonnegative rate.
    """
    kind: ChannelKind
    operators: Tuple[Operator, ...]
    label: str
    coefficient_domain: CoefficientDomain = field(default_factory=CoefficientDomain.unconstrained)

    def __post_init__(self):
        kind = ChannelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        ops = tuple(as_operator(op, name=f"channel '{self.label}' operator") for op in self.operators)
        if kind is ChannelKind.HAMILTONIAN:
            validate_and_raise(len(ops) == 1, f"Hamiltonian channel '{self.label}' needs exactly one operator")
            ops = (check_hermitian(ops[0], name=f"channel '{self.label}' Hamiltonian"),)
        else:
            low = self.coefficient_domain.low
            validate_and_raise(low is not None and low >= 0.0,
                               f"Dissipator channel '{self.label}' must have a coefficient domain within [0, inf)",
                               details={"domain": self.coefficient_domain.to_list()})
        dims = {op.shape[0] for op in ops}
        validate_and_raise(len(dims) <= 1, f"Channel '{self.label}' mixes operator dimensions {sorted(dims)}")
        object.__setattr__(self, "operators", ops)

    @classmethod
    def hamiltonian(cls, H: Operator, label: str,
                    domain: Optional[CoefficientDomain] = None) -> "ControlChannel":
        return cls(ChannelKind.HAMILTONIAN, (H,), label, domain or CoefficientDomain.unconstrained())

    @classmethod
    def dissipator(cls, L, label: str, domain: Optional[CoefficientDomain] = None) -> "ControlChannel":
        ops = tuple(L) if isinstance(L, (list, tuple)) else (L,)
        return cls(ChannelKind.DISSIPATOR, ops, label, domain or CoefficientDomain.nonnegative())

    @property
    def operator(self) -> Operator:
        validate_and_raise(len(self.operators) > 0, f"Channel '{self.label}' has no operator")
        return self.operators[0]

    @property
    def dim(self) -> Optional[int]:
        return self.operators[0].shape[0] if self.operators else None

    def apply(self, X: Operator) -> Operator:
        """Action of this channel at unit coefficient."""
        if self.kind is ChannelKind.HAMILTONIAN:
            return apply_hamiltonian(self.operators[0], X)
        out = np.zeros_like(X, dtype=complex)
        for L in self.operators:
            out += apply_dissipator(L, X)
        return out

    def superoperator(self, n: int) -> Superoperator:
        if self.kind is ChannelKind.HAMILTONIAN:
            return hamiltonian_superoperator(self.operators[0])
        return lindblad_superoperator(np.zeros((n, n), dtype=complex), self.operators)


@dataclass(frozen=True, eq=False)
class ControlledLindbladGenerator:
    """Drift Hamiltonian, drift noise and an ordered list of control channels."""
    dim_H: int
    H0: Operator
    noise_drift: Tuple[Operator, ...] = ()
    channels: Tuple[ControlChannel, ...] = ()
    unital_tol: float = DEFAULT_TOL

    def __post_init__(self):
        n = self.dim_H
        validate_and_raise(isinstance(n, (int, np.integer)) and n >= 1, f"Invalid Hilbert dimension {n}")
        object.__setattr__(self, "H0", check_hermitian(self.H0, name="drift Hamiltonian", dim=n))
        object.__setattr__(self, "noise_drift",
                           tuple(as_operator(L, dim=n, name="drift noise operator") for L in self.noise_drift))
        channels = tuple(self.channels)
        for channel in channels:
            if channel.dim is not None and channel.dim != n:
                raise DimensionMismatchError(
                    f"Channel '{channel.label}' acts on dimension {channel.dim}, model has {n}")
        labels = [c.label for c in channels]
        validate_and_raise(len(set(labels)) == len(labels), f"Duplicate channel labels in {labels}")
        object.__setattr__(self, "channels", channels)

        # Unitality of each affine part
        one = identity(n)
        scale = max(1.0, hs_norm(one))
        drift_res = hs_norm(self.drift_apply(one)) / scale
        validate_and_raise(drift_res <= self.unital_tol * max(1.0, self._operator_scale()),
                           f"Drift generator does not annihilate the identity (residual {drift_res:.3e})")
        for channel in channels:
            res = hs_norm(channel.apply(one)) / scale
            validate_and_raise(res <= self.unital_tol * max(1.0, self._operator_scale()),
                               f"Channel '{channel.label}' does not annihilate the identity (residual {res:.3e})")

    def _operator_scale(self) -> float:
        norms = [hs_norm(self.H0)] + [hs_norm(L) ** 2 for L in self.noise_drift]
        for channel in self.channels:
            norms.extend(hs_norm(op) ** 2 for op in channel.operators)
        return max(norms) if norms else 1.0

    @property
    def num_controls(self) -> int:
        return len(self.channels)

    @property
    def channel_labels(self) -> List[str]:
        return [c.label for c in self.channels]

    def channel_index(self, label_or_index) -> int:
        if isinstance(label_or_index, (int, np.integer)):
            idx = int(label_or_index)
            validate_and_raise(0 <= idx < self.num_controls, f"Channel index {idx} out of range")
            return idx
        labels = self.channel_labels
        validate_and_raise(label_or_index in labels, f"Unknown channel '{label_or_index}'; known: {labels}")
        return labels.index(label_or_index)

    def drift_apply(self, X: Operator) -> Operator:
        out = apply_hamiltonian(self.H0, X)
        for L in self.noise_drift:
            out = out + apply_dissipator(L, X)
        return out

    def part_functions(self) -> List[Callable[[Operator], Operator]]:
        """Operator-level affine generating set [L_0, K_1, ..., K_m]."""
        return [self.drift_apply] + [channel.apply for channel in self.channels]

    def with_channels(self, channels: Sequence[ControlChannel]) -> "ControlledLindbladGenerator":
        return ControlledLindbladGenerator(self.dim_H, self.H0, self.noise_drift, tuple(channels), self.unital_tol)


# Operator-level actions

def apply_hamiltonian(H: Operator, X: Operator) -> Operator:
    return 1j * (H @ X - X @ H)


def apply_dissipator(L: Operator, X: Operator) -> Operator:
    Ld = dagger(L)
    LdL = Ld @ L
    return Ld @ X @ L - 0.5 * (LdL @ X + X @ LdL)


def validate_controls(gen: ControlledLindbladGenerator, u, tol: float = 1e-12) -> np.ndarray:
    """Check a control vector against the channel count and coefficient domains."""
    u = np.atleast_1d(np.asarray(u, dtype=float)) if gen.num_controls else np.zeros(0)
    validate_and_raise(u.shape == (gen.num_controls,),
                       f"Control vector has length {u.size}, model has {gen.num_controls} channels")
    validate_and_raise(bool(np.all(np.isfinite(u))), "Control vector contains NaN or Inf")
    for value, channel in zip(u, gen.channels):
        validate_and_raise(channel.coefficient_domain.contains(float(value), tol),
                           f"Control {value} outside the domain {channel.coefficient_domain.to_list()} "
                           f"of channel '{channel.label}'")
    return u


def apply_generator(gen: ControlledLindbladGenerator, u, O: Operator) -> Operator:
    """Heisenberg-picture generator L_u applied to O."""
    u = validate_controls(gen, u)
    O = as_operator(O, dim=gen.dim_H, name="observable")
    out = gen.drift_apply(O)
    for value, channel in zip(u, gen.channels):
        if value != 0.0:
            out = out + value * channel.apply(O)
    return out


# Superoperator builders

def hamiltonian_superoperator(H: Operator) -> Superoperator:
    """Matrix of X -> i[H, X]."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    eye = np.eye(n, dtype=complex)
    return Superoperator(1j * (np.kron(eye, H) - np.kron(H.T, eye)), n, n)


def dissipator_superoperator(L: Operator) -> Superoperator:
    """Matrix of X -> L^dag X L - 1/2 {L^dag L, X}."""
    L = np.asarray(L, dtype=complex)
    n = L.shape[0]
    eye = np.eye(n, dtype=complex)
    LdL = dagger(L) @ L
    matrix = np.kron(L.T, dagger(L)) - 0.5 * np.kron(eye, LdL) - 0.5 * np.kron(LdL.T, eye)
    return Superoperator(matrix, n, n)


def lindblad_superoperator(H: Operator, noise: Sequence[Operator] = ()) -> Superoperator:
    S = hamiltonian_superoperator(H)
    matrix = S.matrix.copy()
    for L in noise:
        matrix += dissipator_superoperator(L).matrix
    return Superoperator(matrix, S.dim_in, S.dim_out)


def affine_superoperators(gen: ControlledLindbladGenerator) -> Tuple[Superoperator, List[Superoperator]]:
    """Drift and per-channel superoperators with L_u = drift + sum_l u_l parts[l]."""
    drift = lindblad_superoperator(gen.H0, gen.noise_drift)
    parts = [channel.superoperator(gen.dim_H) for channel in gen.channels]
    return drift, parts


def generator_superoperator(gen: ControlledLindbladGenerator, u) -> Superoperator:
    u = validate_controls(gen, u)
    drift, parts = affine_superoperators(gen)
    matrix = drift.matrix.copy()
    for value, part in zip(u, parts):
        matrix += value * part.matrix
    return Superoperator(matrix, gen.dim_H, gen.dim_H)


# Admissible controls

def validate_affine_span(gen: ControlledLindbladGenerator):
    """The admissible set must affinely span R^m: every interval needs a nonempty interior."""
    degenerate = [c.label for c in gen.channels if c.coefficient_domain.is_degenerate]
    validate_and_raise(
        not degenerate,
        f"Channels {degenerate} have a single admissible value; the admissible set does not affinely span "
        f"the control space. Supply explicit generator samples to the parametric observable space instead.",
        details={"degenerate_channels": degenerate}
    )


def sample_admissible_controls(gen: ControlledLindbladGenerator, rng: np.random.Generator,
                               n_random: int = 8, scale: float = 1.0,
                               max_vertex_channels: int = 4) -> List[np.ndarray]:
    """Vertices, midpoint and seeded random interior points of the admissible box."""
    m = gen.num_controls
    if m == 0:
        return [np.zeros(0)]
    bounds = np.array([c.coefficient_domain.finite_bounds(scale) for c in gen.channels])
    mid = bounds.mean(axis=1)
    samples: List[np.ndarray] = []
    if m <= max_vertex_channels:
        for corner in itertools.product(*bounds.tolist()):
            samples.append(np.array(corner, dtype=float))
    else:
        for ell in range(m):
            for end in bounds[ell]:
                point = mid.copy()
                point[ell] = end
                samples.append(point)
    samples.append(mid)
    for _ in range(n_random):
        samples.append(bounds[:, 0] + rng.random(m) * (bounds[:, 1] - bounds[:, 0]))
    return samples


# Lindblad certificate

@dataclass(frozen=True, eq=False)
class LindbladCertificate:
    """Outcome of the GKS test of a superoperator together with the extracted operators."""
    is_unital: bool
    unital_residual: float
    hermiticity_residual: float
    kossakowski_min_eigenvalue: float
    scale: float
    hamiltonian: Operator
    noise_ops: Tuple[Operator, ...]
    reconstruction_residual: float
    tol: float
    tol_psd: float

    @property
    def is_lindblad(self) -> bool:
        return (self.is_unital and self.hermiticity_residual <= self.tol
                and self.kossakowski_min_eigenvalue >= -self.tol_psd)

    @property
    def passed(self) -> bool:
        return self.is_lindblad and self.reconstruction_residual <= max(self.tol, 1e-10)

    def to_summary(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "is_unital": self.is_unital,
            "unital_residual": self.unital_residual,
            "hermiticity_residual": self.hermiticity_residual,
            "kossakowski_min_eigenvalue": self.kossakowski_min_eigenvalue,
            "reconstruction_residual": self.reconstruction_residual,
            "num_noise_ops": len(self.noise_ops),
            "scale": self.scale,
        }


def _superoperator_scale(S: Superoperator) -> float:
    """RMS singular value ||S||_F / n; 1 for the zero map."""
    scale = float(np.linalg.norm(S.matrix)) / S.dim_in
    return scale if scale > 0.0 else 1.0


def is_lindblad(S: Superoperator, tol: float = DEFAULT_TOL, tol_psd: float = DEFAULT_TOL_PSD) -> LindbladCertificate:
    """GKS test: unitality, Hermiticity preservation and a PSD Kossakowski matrix.

    With Choi matrix C and Q = 1 - |1>><<1|/n, the Kossakowski matrix is QCQ.
    Its eigenvectors |M_k>> with eigenvalues lambda_k give the noise operators
    sqrt(lambda_k) M_k^dag; the remainder C - QCQ = |G^dag>><<1| + |1>><<G^dag|
    fixes G = -iH - 1/2 sum L^dag L.
    """
    if not S.is_square:
        raise ValidationError(f"Lindblad test needs a square superoperator, got {S.dim_in} -> {S.dim_out}")
    n = S.dim_in
    scale = _superoperator_scale(S)
    one = vec(identity(n))

    unital_residual = float(np.linalg.norm(S.matrix @ one)) / (scale * np.sqrt(n))
    C = choi_matrix(S)
    c_norm = float(np.linalg.norm(C))
    herm_residual = float(np.linalg.norm(C - C.conj().T)) / c_norm if c_norm > 0 else 0.0
    C = 0.5 * (C + C.conj().T)

    Q = np.eye(n * n, dtype=complex) - np.outer(one, one.conj()) / n
    K = Q @ C @ Q
    K = 0.5 * (K + K.conj().T)
    eigvals, eigvecs = np.linalg.eigh(K)
    min_eig = float(eigvals[0]) / scale if eigvals.size else 0.0

    drop = 1e-12 * scale
    noise: List[Operator] = []
    for idx in np.argsort(eigvals)[::-1]:
        lam = float(eigvals[idx])
        if lam <= drop:
            break
        M = unvec(eigvecs[:, idx], n)
        L = np.sqrt(lam) * dagger(M)
        noise.append(_fix_phase(L))

    C_T = C - K
    tr_G = (one.conj() @ C_T @ one).real / (2.0 * n)
    G_dag = unvec((C_T @ one - tr_G * one) / n, n)
    G = dagger(G_dag)
    H = 0.5j * (G - G_dag)
    H = 0.5 * (H + dagger(H))
    H = H - np.trace(H).real / n * identity(n)

    rebuilt = lindblad_superoperator(H, noise)
    reconstruction = float(np.linalg.norm(rebuilt.matrix - S.matrix)) / max(1.0, float(np.linalg.norm(S.matrix)))

    certificate = LindbladCertificate(
        is_unital=unital_residual <= tol,
        unital_residual=unital_residual,
        hermiticity_residual=herm_residual,
        kossakowski_min_eigenvalue=min_eig,
        scale=scale,
        hamiltonian=H,
        noise_ops=tuple(noise),
        reconstruction_residual=reconstruction,
        tol=tol,
        tol_psd=tol_psd,
    )
    logger.debug(f"Lindblad test n={n}: unital={unital_residual:.2e}, min_eig={min_eig:.2e}, "
                 f"rebuild={reconstruction:.2e}, noise ops={len(noise)}")
    return certificate


def _fix_phase(L: Operator) -> Operator:
    """Make the largest-magnitude entry real positive."""
    flat = L.reshape(-1)
    pivot = flat[np.argmax(np.abs(flat))]
    if abs(pivot) == 0.0:
        return L
    return L * (abs(pivot) / pivot)


def extract_hamiltonian_and_noise(S: Superoperator, tol: float = DEFAULT_TOL,
                                  tol_psd: float = DEFAULT_TOL_PSD) -> Tuple[Operator, List[Operator]]:
    """Traceless Hamiltonian and traceless noise operators reproducing S."""
    certificate = is_lindblad(S, tol, tol_psd)
    if not certificate.passed:
        raise CertificateError(
            "Superoperator is not a Lindblad generator",
            details=certificate.to_summary()
        )
    return certificate.hamiltonian, list(certificate.noise_ops)
