"""
Unital *-algebras of operators: closure, center, commutant and the
Wedderburn decomposition A = U^dag (+)_k [B(F_k) (x) 1_{G_k}] U.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from ..utils.exceptions import (
    AlgebraDecompositionError,
    CertificateError,
    ConvergenceError,
    validate_and_raise,
)
from ..utils.helpers import make_rng
from .operators import (
    Operator,
    OperatorSubspace,
    _VectorBasisBuilder,
    adjoint_residual,
    commutant,
    dagger,
    hermitian_basis,
    identity,
    max_residual,
    orthonormalize,
    subspace_intersection,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
STRUCT_TOL = 1e-8
_PAIR_AUDIT_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class WedderburnStructure:
    """Unitary U (rows grouped per block) and block shapes (dF_k, dG_k).

    Within block k the rows are ordered (f, g) with the multiplicity index g
    running fastest, so U A U^dag restricted to the block reads M_k (x) 1_{dG_k}.
    """
    dim_H: int
    U: np.ndarray
    blocks: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple((int(dF), int(dG)) for dF, dG in self.blocks))
        validate_and_raise(self.U.shape == (self.dim_H, self.dim_H),
                           f"U has shape {self.U.shape}, expected {(self.dim_H, self.dim_H)}")
        validate_and_raise(all(dF >= 1 and dG >= 1 for dF, dG in self.blocks), "Block dimensions must be positive")

    @property
    def block_sizes(self) -> List[int]:
        return [dF * dG for dF, dG in self.blocks]

    @property
    def block_offsets(self) -> List[int]:
        return [0] + list(np.cumsum(self.block_sizes)[:-1])

    @property
    def reduced_offsets(self) -> List[int]:
        return [0] + list(np.cumsum([dF for dF, _ in self.blocks])[:-1])

    @property
    def n_reduced(self) -> int:
        return sum(dF for dF, _ in self.blocks)

    @property
    def algebra_dim(self) -> int:
        return sum(dF * dF for dF, _ in self.blocks)

    @property
    def commutant_dim(self) -> int:
        return sum(dG * dG for _, dG in self.blocks)

    def block_rows(self, k: int) -> np.ndarray:
        start = self.block_offsets[k]
        return self.U[start:start + self.block_sizes[k], :]


# Closure

def algebra_closure(S: OperatorSubspace, tol: float = DEFAULT_TOL, max_dim: Optional[int] = None,
                    audit_tol: float = STRUCT_TOL) -> OperatorSubspace:
    """Smallest unital *-algebra containing S.

    The generating set S + S^dag is made orthonormal, then the span of
    {1} + generators is closed under left multiplication by the generators,
    which reaches every word in the generators.
    """
    n = S.dim_H
    cap = n * n if max_dim is None else min(max_dim, n * n)
    generators = orthonormalize(S.operators() + [dagger(B) for B in S.operators()], tol, dim=n).operators()

    builder = _VectorBasisBuilder(n * n, tol, capacity=cap)
    builder.add(vec(identity(n)))
    for g in generators:
        builder.add(vec(g))

    frontier = list(range(builder.size))
    rounds = 0
    while frontier and not builder.full:
        rounds += 1
        new: List[int] = []
        for idx in frontier:
            A = unvec(builder.Q[:, idx], n)
            for g in generators:
                if builder.add(vec(g @ A)):
                    new.append(builder.size - 1)
                if builder.full:
                    break
            if builder.full:
                break
        logger.debug(f"Closure round {rounds}: dim {builder.size}")
        frontier = new

    algebra = OperatorSubspace.from_columns(n, builder.Q.copy())
    if builder.full and cap < n * n:
        residual = closure_residual(algebra, generators)
        if residual > audit_tol:
            raise ConvergenceError(
                f"Algebra closure exceeded max_dim={cap}",
                details={"max_dim": cap, "residual": residual}
            )

    residual = closure_residual(algebra, generators)
    if residual > audit_tol:
        raise CertificateError(
            f"Algebra closure audit failed (residual {residual:.3e})",
            details={"residual": residual, "dim": algebra.dim}
        )
    logger.info(f"Algebra closure: dim {S.dim} -> {algebra.dim} (n^2 = {n * n}), audit residual {residual:.2e}")
    return algebra


def closure_residual(A: OperatorSubspace, generators: Optional[Sequence[Operator]] = None,
                     seed: int = 0) -> float:
    """Largest residual of adjoints and products of basis elements against A.

    All pairwise products are audited when there are few enough of them;
    otherwise products with the generators plus a seeded sample of pairs.
    """
    n = A.dim_H
    basis = A.basis
    worst = adjoint_residual(A)
    d = A.dim
    if d * d <= _PAIR_AUDIT_LIMIT:
        pairs = [(i, j) for i in range(d) for j in range(d)]
    else:
        rng = np.random.default_rng(seed)
        pairs = list(zip(rng.integers(0, d, _PAIR_AUDIT_LIMIT), rng.integers(0, d, _PAIR_AUDIT_LIMIT)))
    for start in range(0, len(pairs), 512):
        chunk = pairs[start:start + 512]
        left = basis[[i for i, _ in chunk]]
        right = basis[[j for _, j in chunk]]
        products = np.matmul(left, right)
        columns = products.transpose(0, 2, 1).reshape(len(chunk), n * n).T
        worst = max(worst, max_residual(A, columns, floor=1.0))
    if generators:
        gens = np.stack(list(generators))
        for B in basis:
            products = np.matmul(gens, B)
            columns = products.transpose(0, 2, 1).reshape(len(gens), n * n).T
            worst = max(worst, max_residual(A, columns, floor=1.0))
    return worst


def is_star_algebra(A: OperatorSubspace, tol: float = STRUCT_TOL) -> bool:
    return A.contains_identity(tol) and closure_residual(A) <= tol


def center(A: OperatorSubspace, tol: float = DEFAULT_TOL, struct_tol: float = STRUCT_TOL) -> OperatorSubspace:
    """Z = A intersected with its commutant, in a self-adjoint basis."""
    Z = subspace_intersection(A, commutant(A, tol), struct_tol)
    if Z is None:
        raise AlgebraDecompositionError("Center of the algebra is empty; the input is not unital")
    return hermitian_basis(Z, tol)


# Wedderburn decomposition

def _cluster(eigvals: np.ndarray, gap: float) -> List[np.ndarray]:
    """Group sorted eigenvalues separated by more than ``gap``."""
    clusters: List[List[int]] = [[0]]
    for i in range(1, len(eigvals)):
        if eigvals[i] - eigvals[i - 1] > gap:
            clusters.append([i])
        else:
            clusters[-1].append(i)
    return [np.array(c) for c in clusters]


def _canonical_basis(P: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal basis of range(P) taken from projected unit vectors.

    Each step picks the lowest index whose remaining projected norm is within
    1e-6 of the largest one; every vector then has a real positive entry at
    its pivot, so the basis does not depend on the eigensolver's phases.
    """
    m = P.shape[0]
    chosen = np.zeros((m, 0), dtype=complex)
    remaining = P.copy()
    for _ in range(rank):
        norms = np.linalg.norm(remaining, axis=0)
        pivot = int(np.flatnonzero(norms >= (1.0 - 1e-6) * norms.max())[0])
        w = remaining[:, pivot]
        w = w - chosen @ (chosen.conj().T @ w)
        w = w / np.linalg.norm(w)
        chosen = np.hstack([chosen, w[:, None]])
        remaining = remaining - np.outer(w, w.conj() @ remaining)
    return chosen


def _restricted_algebra(A: OperatorSubspace, V: np.ndarray, tol: float) -> OperatorSubspace:
    basis = A.basis
    restricted = np.matmul(np.matmul(dagger(V)[None], basis), V[None])
    return orthonormalize(list(restricted), tol, dim=V.shape[1])


def _random_element(S: OperatorSubspace, rng: np.random.Generator, complex_coeffs: bool = False) -> Operator:
    coeffs = rng.normal(size=S.dim)
    if complex_coeffs:
        coeffs = coeffs + 1j * rng.normal(size=S.dim)
    return np.tensordot(coeffs, S.basis, axes=1)


def _multiplicity_basis(A_k: OperatorSubspace, dF: int, dG: int, rng: np.random.Generator,
                        tol: float, max_resamples: int, gap_rel: float,
                        min_isometry: float) -> np.ndarray:
    """Columns ordered (f, g), g fastest, spanning the block with A_k = B(F) (x) 1_G."""
    m = dF * dG
    C = commutant(A_k, tol)
    if C.dim != dG * dG:
        raise AlgebraDecompositionError(
            f"Block commutant has dimension {C.dim}, expected {dG * dG}",
            details={"dF": dF, "dG": dG, "commutant_dim": C.dim}
        )
    for attempt in range(max_resamples):
        Y = _random_element(C, rng)
        Y = 0.5 * (Y + dagger(Y))
        eigvals, eigvecs = np.linalg.eigh(Y)
        spread = max(eigvals[-1] - eigvals[0], float(np.max(np.abs(eigvals))), np.finfo(float).tiny)
        clusters = _cluster(eigvals, gap_rel * spread)
        if len(clusters) != dG or any(len(c) != dF for c in clusters):
            logger.warning(f"Multiplicity split attempt {attempt + 1}: {len(clusters)} eigenspaces, expected {dG}")
            continue
        Q = [eigvecs[:, c] for c in clusters]
        Q1 = _canonical_basis(Q[0] @ dagger(Q[0]), dF)
        transport = _random_element(C, rng, complex_coeffs=True)
        pieces = [Q1]
        ok = True
        for Qj in Q[1:]:
            T = dagger(Qj) @ transport @ Q1
            s = np.linalg.svd(T, compute_uv=False)
            if s[-1] < min_isometry * max(s[0], np.finfo(float).tiny):
                ok = False
                break
            unitary, _ = sla.polar(T)
            pieces.append(Qj @ unitary)
        if not ok:
            logger.warning(f"Multiplicity split attempt {attempt + 1}: degenerate partial isometry, resampling")
            continue
        columns = np.zeros((m, m), dtype=complex)
        for g, piece in enumerate(pieces):
            columns[:, g::dG] = piece
        return columns
    raise AlgebraDecompositionError(
        f"Could not separate the multiplicity space after {max_resamples} samples",
        details={"dF": dF, "dG": dG}
    )


def wedderburn(A: OperatorSubspace, tol: float = STRUCT_TOL, seed: Optional[int] = None,
               max_resamples: int = 5, cluster_gap: float = 1e-8,
               min_partial_isometry: float = 1e-6, rank_tol: float = DEFAULT_TOL) -> WedderburnStructure:
    """Wedderburn decomposition of a unital *-algebra, verified before it is returned."""
    n = A.dim_H
    validate_and_raise(A.contains_identity(rank_tol * 10), "Wedderburn decomposition needs a unital algebra")
    adj = adjoint_residual(A)
    validate_and_raise(adj <= tol, f"Wedderburn decomposition needs a *-closed algebra (adjoint residual {adj:.3e})")
    rng = make_rng(seed)

    if A.dim == n * n:
        W = WedderburnStructure(n, np.eye(n, dtype=complex), ((n, 1),))
        return _verified(A, W, tol)

    Z = center(A, rank_tol, tol)
    num_blocks = Z.dim
    clusters = None
    for attempt in range(max_resamples):
        z = _random_element(Z, rng)
        z = 0.5 * (z + dagger(z))
        eigvals, eigvecs = np.linalg.eigh(z)
        spread = max(eigvals[-1] - eigvals[0], float(np.max(np.abs(eigvals))), np.finfo(float).tiny)
        clusters = _cluster(eigvals, cluster_gap * spread)
        if len(clusters) == num_blocks:
            break
        logger.warning(f"Central split attempt {attempt + 1}: {len(clusters)} clusters, expected {num_blocks}")
        clusters = None
    if clusters is None:
        raise AlgebraDecompositionError(
            f"Could not separate {num_blocks} central blocks after {max_resamples} samples",
            details={"center_dim": num_blocks}
        )

    blocks = []
    for cluster in clusters:
        Vc = eigvecs[:, cluster]
        m = Vc.shape[1]
        P = Vc @ dagger(Vc)
        A_k = _restricted_algebra(A, Vc, rank_tol)
        dF = int(round(np.sqrt(A_k.dim)))
        if dF * dF != A_k.dim or m % dF != 0:
            raise AlgebraDecompositionError(
                f"Central block of size {m} carries a {A_k.dim}-dimensional algebra, not a full matrix factor",
                details={"block_size": m, "restricted_dim": A_k.dim}
            )
        dG = m // dF
        if dG == 1:
            basis = _canonical_basis(P, m)
        else:
            Vk = _canonical_basis(P, m)
            A_k = _restricted_algebra(A, Vk, rank_tol)
            basis = Vk @ _multiplicity_basis(A_k, dF, dG, rng, rank_tol, max_resamples,
                                             cluster_gap, min_partial_isometry)
        lowest = int(np.flatnonzero(np.real(np.diag(P)) > 1e-8)[0])
        blocks.append(((dF, dG), lowest, basis))

    blocks.sort(key=lambda item: (-item[0][0], -item[0][1], item[1]))
    U = np.vstack([dagger(basis) for _, _, basis in blocks])
    W = WedderburnStructure(n, U, tuple(shape for shape, _, _ in blocks))
    logger.info(f"Wedderburn decomposition: {len(W.blocks)} blocks {list(W.blocks)}, n_reduced={W.n_reduced}")
    return _verified(A, W, tol)


def _verified(A: OperatorSubspace, W: WedderburnStructure, tol: float) -> WedderburnStructure:
    ok, residual = verify_structure(A, W, tol)
    if not ok:
        raise AlgebraDecompositionError(
            f"Wedderburn structure failed verification (residual {residual:.3e})",
            details={"residual": residual, "blocks": list(W.blocks)}
        )
    return W


def block_form_residual(X: np.ndarray, W: WedderburnStructure) -> float:
    """Distance of U X U^dag from (+)_k M_k (x) 1_{dG_k}."""
    Y = W.U @ X @ dagger(W.U)
    fitted = np.zeros_like(Y)
    for (dF, dG), start in zip(W.blocks, W.block_offsets):
        m = dF * dG
        block = Y[start:start + m, start:start + m].reshape(dF, dG, dF, dG)
        M = np.einsum("agbg->ab", block) / dG
        fitted[start:start + m, start:start + m] = np.kron(M, np.eye(dG))
    return float(np.linalg.norm(Y - fitted))


def verify_structure(A: OperatorSubspace, W: WedderburnStructure, tol: float = STRUCT_TOL) -> Tuple[bool, float]:
    """Check unitarity, block shapes and the block form of every basis element."""
    n = A.dim_H
    if W.dim_H != n or sum(W.block_sizes) != n:
        return False, float("inf")
    if W.algebra_dim != A.dim:
        logger.debug(f"Structure dimension {W.algebra_dim} differs from algebra dimension {A.dim}")
        return False, float("inf")
    worst = float(np.linalg.norm(dagger(W.U) @ W.U - np.eye(n)))
    for B in A.operators():
        worst = max(worst, block_form_residual(B, W))
    return worst <= tol, worst


def structure_algebra(W: WedderburnStructure) -> OperatorSubspace:
    """The algebra U^dag [(+)_k B(F_k) (x) 1_{G_k}] U spanned by embedded matrix units."""
    n = W.dim_H
    columns = []
    for (dF, dG), start in zip(W.blocks, W.block_offsets):
        rows = W.U[start:start + dF * dG, :]
        for a in range(dF):
            for b in range(dF):
                unit = np.zeros((dF, dF), dtype=complex)
                unit[a, b] = 1.0
                X = dagger(rows) @ np.kron(unit, np.eye(dG)) @ rows / np.sqrt(dG)
                columns.append(vec(X))
    return OperatorSubspace.from_columns(n, np.stack(columns, axis=1))
