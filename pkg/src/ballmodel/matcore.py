"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` with
``ndim == 2``.  Zero-sized shapes such as ``(0, 3)`` are valid everywhere and
compose the way numpy composes them (an empty inner dimension gives a zero
matrix).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    IndefiniteBeyondTolerance,
    NonFiniteEntries,
    NotHermitian,
)

RANK_TOL = 1e-10

__all__ = [
    "RANK_TOL",
    "Subspace",
    "as_matrix",
    "opnorm",
    "fix_phase",
    "orthonormal_range",
    "null_space",
    "span_closure",
    "procrustes",
    "polar_unitary",
    "sqrtm_psd",
    "block_diag",
    "unitary_defect",
]


def as_matrix(M, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite complex 2-D array, optionally checking its shape."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a 2-D array, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteEntries(f"{name}: entries must be finite")
    if rows is not None and A.shape[0] != rows:
        raise DimensionMismatch(f"{name}: expected {rows} rows, got {A.shape[0]}")
    if cols is not None and A.shape[1] != cols:
        raise DimensionMismatch(f"{name}: expected {cols} columns, got {A.shape[1]}")
    return A


def opnorm(M: np.ndarray) -> float:
    """Spectral norm; zero for empty matrices."""
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def fix_phase(V: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive."""
    V = np.array(V, dtype=complex, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    pivots = V[idx, np.arange(V.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return V * np.conj(phases)[None, :]


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of C^ambient_dim with an orthonormal basis stored column-wise."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis, rows=self.ambient_dim, name="basis")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_full(self) -> bool:
        return self.dim == self.ambient_dim

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def complement(self, tol: float = RANK_TOL) -> "Subspace":
        if self.dim == 0:
            return Subspace(self.ambient_dim, np.eye(self.ambient_dim, dtype=complex))
        return null_space(self.basis.conj().T, tol=tol)

    def join(self, other: "Subspace", tol: float = RANK_TOL) -> "Subspace":
        _check_ambient(self, other)
        return orthonormal_range(np.hstack([self.basis, other.basis]), tol=tol)

    def intersect(self, other: "Subspace", tol: float = RANK_TOL) -> "Subspace":
        _check_ambient(self, other)
        return self.complement(tol).join(other.complement(tol), tol).complement(tol)

    def distance_from(self, M: np.ndarray) -> float:
        """Norm of the part of the columns of ``M`` lying outside this subspace."""
        M = as_matrix(M, rows=self.ambient_dim)
        if M.size == 0:
            return 0.0
        return opnorm(M - self.basis @ (self.basis.conj().T @ M))

    def contains(self, M: np.ndarray, tol: float = 1e-9) -> bool:
        M = as_matrix(M, rows=self.ambient_dim)
        return self.distance_from(M) <= tol * max(1.0, opnorm(M))

    def same_as(self, other: "Subspace", tol: float = 1e-8) -> bool:
        _check_ambient(self, other)
        if self.dim != other.dim:
            return False
        return opnorm(self.projector() - other.projector()) <= tol


def _check_ambient(a: Subspace, b: Subspace) -> None:
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}")


def orthonormal_range(M, tol: float = RANK_TOL) -> Subspace:
    """Orthonormal basis of Range(M).

    The rank counts singular values above ``tol * sigma_max``.  Basis vectors
    are left singular vectors with the phase convention of :func:`fix_phase`,
    so equal inputs give equal outputs bit for bit.
    """
    M = as_matrix(M)
    m = M.shape[0]
    if M.size == 0:
        return Subspace(m, np.zeros((m, 0), dtype=complex))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Subspace(m, np.zeros((m, 0), dtype=complex))
    r = int(np.sum(s > tol * s[0]))
    return Subspace(m, fix_phase(U[:, :r]))


def null_space(M, tol: float = RANK_TOL, scale: float = 0.0) -> Subspace:
    """Orthonormal basis of ker(M), using the same relative rank rule.

    Singular values at most ``tol * max(s_max, scale)`` count as zero, so a
    positive ``scale`` keeps roundoff-sized systems from reading as full rank.
    """
    M = as_matrix(M)
    n = M.shape[1]
    if M.size == 0:
        return Subspace(n, np.eye(n, dtype=complex))
    # the full right factor is needed only for wide matrices
    _, s, Vh = np.linalg.svd(M, full_matrices=M.shape[0] < n)
    if s.size == 0 or s[0] == 0.0:
        return Subspace(n, np.eye(n, dtype=complex))
    r = int(np.sum(s > tol * max(s[0], scale)))
    return Subspace(n, fix_phase(Vh[r:].conj().T))


def span_closure(seed: Subspace, operators: Sequence[np.ndarray], tol: float = RANK_TOL) -> Subspace:
    """Smallest subspace containing ``seed`` and invariant under every operator.

    Each pass appends the images of the current basis and re-orthonormalises;
    the dimension strictly grows until it stabilises, so at most
    ``ambient_dim`` passes are needed.
    """
    ops = [as_matrix(O, name="operator") for O in operators]
    n = seed.ambient_dim
    for O in ops:
        if O.shape != (n, n):
            raise DimensionMismatch(f"operator of shape {O.shape} does not act on C^{n}")
    current = seed
    for _ in range(n + 1):
        if current.dim == 0 or current.dim == n:
            return current
        Q = current.basis
        stacked = np.hstack([Q] + [O @ Q for O in ops])
        nxt = orthonormal_range(stacked, tol=tol)
        if nxt.dim == current.dim:
            return current
        current = nxt
    return current


def polar_unitary(M: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition of a square matrix."""
    M = as_matrix(M)
    if M.size == 0:
        return M.copy()
    U, _, Vh = np.linalg.svd(M)
    return U @ Vh


def procrustes(A, B, tol: float = RANK_TOL) -> np.ndarray:
    """Unitary W minimising ``||A - W B||_F``.

    Closed form ``W = U V*`` from the SVD ``A B* = U S V*``.  On the null
    space of ``A B*`` the minimiser is not unique; there we pick the unitary
    closest to the identity, so that ``procrustes(A, A)`` is exactly ``I``.
    """
    A = as_matrix(A, name="A")
    B = as_matrix(B, name="B")
    if A.shape != B.shape:
        raise DimensionMismatch(f"procrustes needs equal shapes, got {A.shape} and {B.shape}")
    m = A.shape[0]
    if m == 0:
        return np.zeros((0, 0), dtype=complex)
    M = A @ B.conj().T
    U, s, Vh = np.linalg.svd(M)
    V = Vh.conj().T
    r = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    W = U[:, :r] @ V[:, :r].conj().T
    if r < m:
        U0, V0 = U[:, r:], V[:, r:]
        omega = polar_unitary(V0.conj().T @ U0).conj().T
        W = W + U0 @ omega @ V0.conj().T
    return W


def sqrtm_psd(H, tol: float = RANK_TOL) -> np.ndarray:
    """Hermitian square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-tol*||H||, 0)`` are treated as roundoff and clamped.
    """
    H = as_matrix(H, name="H")
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {H.shape}")
    n = H.shape[0]
    if n == 0:
        return H.copy()
    scale = max(1.0, opnorm(H))
    if opnorm(H - H.conj().T) > tol * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    Hs = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(Hs)
    if w[0] < -tol * scale:
        raise IndefiniteBeyondTolerance(f"eigenvalue {w[0]:.3e} is below -tol*||H||")
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.conj().T
    S = 0.5 * (S + S.conj().T)
    return S


def block_diag(*blocks: np.ndarray) -> np.ndarray:
    """Block diagonal matrix that tolerates zero-sized blocks."""
    mats = [as_matrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in mats)
    cols = sum(b.shape[1] for b in mats)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for b in mats:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def unitary_defect(W: np.ndarray) -> float:
    """max(||W*W - I||, ||WW* - I||)."""
    W = as_matrix(W)
    if W.size == 0:
        return 0.0
    a = opnorm(W.conj().T @ W - np.eye(W.shape[1]))
    b = opnorm(W @ W.conj().T - np.eye(W.shape[0]))
    return max(a, b)


def solve(M: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``M^{-1} R`` that accepts empty systems."""
    if M.shape[0] == 0:
        return np.zeros((0, R.shape[1]), dtype=complex)
    return sla.solve(M, R)


def hstack(blocks: Iterable[np.ndarray], rows: int) -> np.ndarray:
    blocks = list(blocks)
    if not blocks:
        return np.zeros((rows, 0), dtype=complex)
    return np.hstack(blocks)


def vstack(blocks: Iterable[np.ndarray], cols: int) -> np.ndarray:
    blocks = list(blocks)
    if not blocks:
        return np.zeros((0, cols), dtype=complex)
    return np.vstack(blocks)
