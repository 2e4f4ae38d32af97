"""
Dense operator arithmetic, Hilbert-Schmidt geometry and superoperator matrices.

Conventions:
    * Operators are ``numpy`` complex arrays of shape (n, n).
    * Vectorization is column stacking, ``vec(X) = X.reshape(-1, order="F")``,
      so that ``vec(A X B) = kron(B.T, A) @ vec(X)``.
    * The Choi matrix of a map f is ``sum_kl |k><l| (x) f(|k><l|)`` (input factor first).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from ..utils.exceptions import DimensionMismatchError, ValidationError, validate_and_raise

logger = logging.getLogger(__name__)

Operator = np.ndarray

DEFAULT_TOL = 1e-10


# Construction and validation

def as_operator(X, dim: Optional[int] = None, name: str = "operator") -> Operator:
    """Coerce to a finite square complex matrix, optionally of a fixed dimension."""
    arr = np.asarray(X, dtype=complex)
    validate_and_raise(arr.ndim == 2 and arr.shape[0] == arr.shape[1],
                       f"{name} must be a square matrix, got shape {arr.shape}")
    validate_and_raise(bool(np.all(np.isfinite(arr))), f"{name} contains NaN or Inf entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has dimension {arr.shape[0]}, expected {dim}",
            details={"expected": dim, "actual": arr.shape[0]}
        )
    return arr


def dagger(X: Operator) -> Operator:
    return X.conj().T


def identity(n: int) -> Operator:
    return np.eye(n, dtype=complex)


def hermiticity_residual(X: Operator) -> float:
    """Relative deviation ||X - X^dag||_F / ||X||_F (0 for the zero operator)."""
    norm = np.linalg.norm(X)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(X - dagger(X)) / norm)


def check_hermitian(X, tol: float = DEFAULT_TOL, name: str = "operator", dim: Optional[int] = None) -> Operator:
    """Validate a self-adjoint operator and return it exactly symmetrized."""
    arr = as_operator(X, dim=dim, name=name)
    residual = hermiticity_residual(arr)
    validate_and_raise(residual <= tol, f"{name} is not self-adjoint (relative residual {residual:.3e})",
                       details={"residual": residual})
    return 0.5 * (arr + dagger(arr))


def check_density(rho, tol_trace: float = 1e-8, tol_psd: float = 1e-9,
                  tol_herm: float = DEFAULT_TOL, dim: Optional[int] = None,
                  name: str = "state") -> Operator:
    """Validate a density operator: self-adjoint, unit trace, positive semidefinite."""
    arr = check_hermitian(rho, tol=tol_herm, name=name, dim=dim)
    trace = np.trace(arr).real
    validate_and_raise(abs(trace - 1.0) <= tol_trace, f"{name} has trace {trace:.12g}, expected 1",
                       details={"trace": trace})
    min_eig = float(np.linalg.eigvalsh(arr)[0])
    validate_and_raise(min_eig >= -tol_psd, f"{name} is not positive semidefinite (min eigenvalue {min_eig:.3e})",
                       details={"min_eigenvalue": min_eig})
    return arr


def _check_same_dim(A: Operator, B: Operator):
    if A.shape != B.shape:
        raise DimensionMismatchError(f"Operator shapes differ: {A.shape} vs {B.shape}")


# Hilbert-Schmidt geometry

def hs_inner(A: Operator, B: Operator) -> complex:
    """Hilbert-Schmidt inner product tr(A^dag B)."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    _check_same_dim(A, B)
    return complex(np.vdot(A, B))


def hs_norm(X: Operator) -> float:
    return float(np.linalg.norm(X))


def vec(X: Operator) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, n: Optional[int] = None) -> Operator:
    if n is None:
        n = int(round(np.sqrt(v.shape[0])))
    return np.asarray(v).reshape(n, n, order="F")


class _VectorBasisBuilder:
    """Incremental orthonormal basis of vectors (Gram-Schmidt with one re-orthogonalization pass)."""

    def __init__(self, length: int, tol: float, capacity: Optional[int] = None):
        self.length = length
        self.tol = tol
        self.capacity = capacity or length
        self._Q = np.zeros((length, min(self.capacity, length)), dtype=complex)
        self.size = 0

    @property
    def Q(self) -> np.ndarray:
        return self._Q[:, :self.size]

    def residual_vector(self, v: np.ndarray) -> np.ndarray:
        Q = self.Q
        w = v - Q @ (Q.conj().T @ v)
        return w - Q @ (Q.conj().T @ w)

    def add(self, v: np.ndarray) -> bool:
        """Append the normalized residual of v; returns False when v is already in the span."""
        norm_in = np.linalg.norm(v)
        w = self.residual_vector(v)
        norm_w = np.linalg.norm(w)
        if norm_w <= self.tol * max(1.0, norm_in):
            return False
        if self.size >= self._Q.shape[1]:
            return False
        self._Q[:, self.size] = w / norm_w
        self.size += 1
        return True

    @property
    def full(self) -> bool:
        return self.size >= self._Q.shape[1]


@dataclass(frozen=True, eq=False)
class OperatorSubspace:
    """Hilbert-Schmidt orthonormal basis of a subspace of operator space.

    ``basis`` has shape (k, n, n); ``matrix`` stores the same basis as
    vectorized columns of shape (n^2, k).
    """
    dim_H: int
    matrix: np.ndarray

    @classmethod
    def from_columns(cls, n: int, columns: np.ndarray) -> "OperatorSubspace":
        return cls(dim_H=n, matrix=np.ascontiguousarray(columns))

    @classmethod
    def full(cls, n: int) -> "OperatorSubspace":
        return cls(dim_H=n, matrix=np.eye(n * n, dtype=complex))

    @classmethod
    def identity_only(cls, n: int) -> "OperatorSubspace":
        return cls(dim_H=n, matrix=vec(identity(n))[:, None] / np.sqrt(n))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.dim

    @property
    def basis(self) -> np.ndarray:
        n = self.dim_H
        return np.stack([unvec(self.matrix[:, i], n) for i in range(self.dim)]) if self.dim else \
            np.zeros((0, n, n), dtype=complex)

    def operators(self) -> List[Operator]:
        return list(self.basis)

    def __iter__(self):
        return iter(self.operators())

    def gram(self) -> np.ndarray:
        return self.matrix.conj().T @ self.matrix

    def coefficients(self, X: Operator) -> np.ndarray:
        return self.matrix.conj().T @ vec(X)

    def project(self, X: Operator) -> Operator:
        return unvec(self.matrix @ self.coefficients(X), self.dim_H)

    def residual(self, X: Operator) -> Tuple[Operator, float]:
        X = as_operator(X, dim=self.dim_H)
        projection = self.project(X)
        return projection, hs_norm(X - projection)

    def contains(self, X: Operator, tol: float = DEFAULT_TOL) -> bool:
        _, res = self.residual(X)
        return res <= tol * max(hs_norm(X), np.finfo(float).tiny)

    def projector_matrix(self) -> np.ndarray:
        """Orthogonal projector onto the subspace as an n^2 x n^2 matrix."""
        return self.matrix @ self.matrix.conj().T

    def contains_identity(self, tol: float = DEFAULT_TOL) -> bool:
        return self.contains(identity(self.dim_H), tol)


def orthonormalize(ops: Iterable[Operator], tol: float = DEFAULT_TOL,
                   dim: Optional[int] = None) -> OperatorSubspace:
    """HS-orthonormal basis of span(ops) in input order.

    Vectors whose residual is at most ``tol * max(1, ||input||)`` are dropped.
    """
    ops = [np.asarray(op, dtype=complex) for op in ops]
    validate_and_raise(len(ops) > 0, "orthonormalize needs at least one operator")
    n = dim or ops[0].shape[0]
    builder = _VectorBasisBuilder(n * n, tol)
    for op in ops:
        op = as_operator(op, dim=n)
        builder.add(vec(op))
        if builder.full:
            break
    validate_and_raise(builder.size > 0, "All operators are numerically zero")
    return OperatorSubspace.from_columns(n, builder.Q.copy())


def span_union(*spaces: OperatorSubspace, tol: float = DEFAULT_TOL) -> OperatorSubspace:
    validate_and_raise(len(spaces) > 0, "span_union needs at least one subspace")
    n = spaces[0].dim_H
    ops: List[Operator] = []
    for space in spaces:
        if space.dim_H != n:
            raise DimensionMismatchError("Subspaces live on different Hilbert spaces")
        ops.extend(space.operators())
    return orthonormalize(ops, tol, dim=n)


def residual(S: OperatorSubspace, X: Operator) -> Tuple[Operator, float]:
    """Orthogonal projection of X onto S and the norm of what is left over."""
    return S.residual(X)


def subspace_contains(S: OperatorSubspace, T: OperatorSubspace, tol: float = DEFAULT_TOL) -> bool:
    """True iff every basis element of T lies in S up to tol."""
    if S.dim_H != T.dim_H:
        return False
    return max_residual(S, T.matrix) <= tol


def max_residual(S: OperatorSubspace, columns: np.ndarray, floor: Optional[float] = None) -> float:
    """Largest relative residual of vectorized operators (columns) against S.

    Norms below ``floor`` are replaced by ``floor`` in the denominator.
    """
    if columns.shape[1] == 0:
        return 0.0
    Q = S.matrix
    left = columns - Q @ (Q.conj().T @ columns)
    norms = np.maximum(np.linalg.norm(columns, axis=0), floor if floor is not None else np.finfo(float).tiny)
    return float(np.max(np.linalg.norm(left, axis=0) / norms))


def subspace_equal(S1: OperatorSubspace, S2: OperatorSubspace, tol: float = DEFAULT_TOL) -> bool:
    return subspace_contains(S1, S2, tol) and subspace_contains(S2, S1, tol)


def subspace_intersection(S1: OperatorSubspace, S2: OperatorSubspace, tol: float = 1e-8) -> Optional[OperatorSubspace]:
    """Intersection via principal vectors with cosine at least 1 - tol; None when trivial."""
    if S1.dim_H != S2.dim_H:
        raise DimensionMismatchError("Subspaces live on different Hilbert spaces")
    u, s, _ = np.linalg.svd(S1.matrix.conj().T @ S2.matrix, full_matrices=False)
    keep = s >= 1.0 - tol
    if not np.any(keep):
        return None
    columns = S1.matrix @ u[:, keep]
    q, _ = np.linalg.qr(columns)
    return OperatorSubspace.from_columns(S1.dim_H, q)


def orthogonal_complement(S: OperatorSubspace, tol: float = DEFAULT_TOL) -> Optional[OperatorSubspace]:
    """Orthonormal basis of the HS-orthogonal complement; None when S is everything."""
    n = S.dim_H
    if S.dim >= n * n:
        return None
    P = np.eye(n * n, dtype=complex) - S.projector_matrix()
    eigvals, eigvecs = np.linalg.eigh(0.5 * (P + P.conj().T))
    columns = eigvecs[:, eigvals > 0.5]
    return OperatorSubspace.from_columns(n, columns)


def hermitian_basis(S: OperatorSubspace, tol: float = DEFAULT_TOL) -> OperatorSubspace:
    """Re-express a *-closed subspace in a basis of self-adjoint operators."""
    ops: List[Operator] = []
    for B in S.operators():
        ops.append(B + dagger(B))
        ops.append(1j * (B - dagger(B)))
    ops = [op for op in ops if hs_norm(op) > tol]
    return orthonormalize(ops, tol, dim=S.dim_H)


def adjoint_residual(S: OperatorSubspace) -> float:
    """How far S is from being closed under the adjoint."""
    adjoints = np.stack([vec(dagger(B)) for B in S.operators()], axis=1)
    return max_residual(S, adjoints)


# Superoperators

@dataclass(frozen=True, eq=False)
class Superoperator:
    """Matrix of a linear map B(C^dim_in) -> B(C^dim_out) on column-stacked vectors."""
    matrix: np.ndarray
    dim_in: int
    dim_out: int

    def __post_init__(self):
        expected = (self.dim_out ** 2, self.dim_in ** 2)
        if self.matrix.shape != expected:
            raise DimensionMismatchError(
                f"Superoperator matrix has shape {self.matrix.shape}, expected {expected}")
        validate_and_raise(bool(np.all(np.isfinite(self.matrix))), "Superoperator contains NaN or Inf entries")

    @classmethod
    def square(cls, matrix: np.ndarray) -> "Superoperator":
        n = int(round(np.sqrt(matrix.shape[0])))
        return cls(np.asarray(matrix, dtype=complex), n, n)

    @classmethod
    def identity(cls, n: int) -> "Superoperator":
        return cls(np.eye(n * n, dtype=complex), n, n)

    @classmethod
    def zero(cls, n: int) -> "Superoperator":
        return cls(np.zeros((n * n, n * n), dtype=complex), n, n)

    @property
    def dim_H(self) -> int:
        if self.dim_in != self.dim_out:
            raise DimensionMismatchError("Rectangular superoperator has no single Hilbert dimension")
        return self.dim_in

    @property
    def is_square(self) -> bool:
        return self.dim_in == self.dim_out

    def apply(self, X: Operator) -> Operator:
        X = as_operator(X, dim=self.dim_in)
        return unvec(self.matrix @ vec(X), self.dim_out)

    def __call__(self, X: Operator) -> Operator:
        return self.apply(X)

    def compose(self, other: "Superoperator") -> "Superoperator":
        """self after other."""
        if other.dim_out != self.dim_in:
            raise DimensionMismatchError("Superoperators cannot be composed: dimensions differ")
        return Superoperator(self.matrix @ other.matrix, other.dim_in, self.dim_out)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return self.compose(other)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionMismatchError("Superoperators act on different spaces")
        return Superoperator(self.matrix + other.matrix, self.dim_in, self.dim_out)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "Superoperator":
        return Superoperator(self.matrix * factor, self.dim_in, self.dim_out)

    def adjoint(self) -> "Superoperator":
        """Hilbert-Schmidt adjoint (vec is an isometry, so this is the conjugate transpose)."""
        return Superoperator(self.matrix.conj().T, self.dim_out, self.dim_in)

    def choi(self) -> np.ndarray:
        return choi_matrix(self)


def superoperator_from_map(f: Callable[[Operator], Operator], n: int,
                           n_out: Optional[int] = None) -> Superoperator:
    """Tabulate a linear map by its action on the matrix units E_kl."""
    columns = []
    for col in range(n * n):
        unit = np.zeros(n * n, dtype=complex)
        unit[col] = 1.0
        image = np.asarray(f(unvec(unit, n)), dtype=complex)
        if n_out is None:
            n_out = image.shape[0]
        columns.append(vec(as_operator(image, dim=n_out, name="map output")))
    return Superoperator(np.stack(columns, axis=1), n, n_out)


def choi_matrix(S: Superoperator) -> np.ndarray:
    """Choi matrix C[(k,i),(l,j)] = S[(i,j),(k,l)]; the map is CP iff C is PSD."""
    m, n = S.dim_out, S.dim_in
    S4 = S.matrix.reshape(m, m, n, n)  # axes: j, i, l, k
    return S4.transpose(3, 1, 2, 0).reshape(n * m, n * m)


def choi_min_eigenvalue(S: Superoperator) -> float:
    C = choi_matrix(S)
    return float(np.linalg.eigvalsh(0.5 * (C + C.conj().T))[0])


def operator_to_sandwich(A: Operator, B: Operator) -> Superoperator:
    """Superoperator of X -> A X B."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    return Superoperator(np.kron(B.T, A), B.shape[0], A.shape[0])


def commutant(A: OperatorSubspace, tol: float = DEFAULT_TOL) -> OperatorSubspace:
    """All X with [B, X] = 0 for every basis element B of the *-closed subspace A.

    The stacked maps X -> [B_i, X] are accumulated into the Gram matrix
    sum_i C_i^dag C_i whose kernel is the commutant.
    """
    n = A.dim_H
    adj = adjoint_residual(A)
    validate_and_raise(adj <= max(tol, 1e-8), f"commutant needs a *-closed subspace (adjoint residual {adj:.3e})")
    basis = A.basis
    eye = np.eye(n, dtype=complex)
    BdB = np.einsum("iba,ibc->ac", basis.conj(), basis)        # sum B^dag B
    BBd = np.einsum("iab,icb->ac", basis, basis.conj())        # sum B B^dag
    cross = np.einsum("iba,idc->acbd", basis, basis.conj()).reshape(n * n, n * n)  # sum kron(B^T, B^dag)
    gram = np.kron(eye, BdB) + np.kron(BBd.conj(), eye) - cross - cross.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    eigvals, eigvecs = np.linalg.eigh(gram)
    scale = max(float(eigvals[-1]), 1.0)
    kernel = eigvecs[:, eigvals <= tol * scale]
    space = OperatorSubspace.from_columns(n, kernel)
    return hermitian_basis(space, tol)


# Random test objects

def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (G + dagger(G))


def random_operator(n: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2.0)


def random_density(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> Operator:
    """Random mixed state G G^dag / tr, with G an n x rank Ginibre matrix."""
    rank = rank or n
    G = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = G @ dagger(G)
    return rho / np.trace(rho).real


def random_unitary(n: int, rng: np.random.Generator) -> Operator:
    """Haar-random unitary."""
    if n == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(n, random_state=rng)


# Pauli strings

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli_string(label: str) -> Operator:
    """Kronecker product in string order; the leftmost character acts on qubit 0."""
    validate_and_raise(len(label) > 0, "Empty Pauli string")
    unknown = set(label) - set(PAULI_MATRICES)
    validate_and_raise(not unknown, f"Unknown Pauli characters {sorted(unknown)} in '{label}'")
    out = np.ones((1, 1), dtype=complex)
    for char in label:
        out = np.kron(out, PAULI_MATRICES[char])
    return out


def pauli_sum(terms: Sequence[Tuple[str, complex]]) -> Operator:
    validate_and_raise(len(terms) > 0, "A Pauli expansion needs at least one term")
    width = len(terms[0][0])
    out = np.zeros((2 ** width, 2 ** width), dtype=complex)
    for label, coeff in terms:
        validate_and_raise(len(label) == width, f"Pauli strings of different lengths: '{terms[0][0]}' vs '{label}'")
        out += complex(coeff) * pauli_string(label)
    return out


def embed_single_site(op: Operator, site: int, num_qubits: int) -> Operator:
    """Single-qubit operator acting on ``site`` (qubit 0 leftmost)."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(num_qubits):
        out = np.kron(out, op if k == site else PAULI_MATRICES["I"])
    return out
