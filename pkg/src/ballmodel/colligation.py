"""Structured colligations ``U = [A B; C D]: X + U -> X^d + Y`` and their transfer functions.

``A`` is stored as ``d`` blocks ``A_k`` (n x n) stacked into a column
``X -> X^d``; ``B`` likewise as ``d`` blocks ``B_k`` (n x p).  The transfer
function is ``S(z) = D + C (I - Z(z)A)^{-1} Z(z) B`` with
``Z(z) = [z_1 I ... z_d I]``, so ``Z(z)A = sum_k z_k A_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, PointOutsideBall, ShapeMismatch, SingularResolvent
from .matcore import (
    RANK_TOL,
    Subspace,
    as_matrix,
    block_diag,
    hstack,
    null_space,
    opnorm,
    orthonormal_range,
    polar_unitary,
    solve,
    span_closure,
)
from .sampling import grid_points
from .series import CommSeries, coefficient_bound, degree, multi_indices, resolvent_taylor_comm, shift

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Colligation:
    """Block operator with ``d`` state blocks; see the module docstring."""

    A: tuple
    B: tuple
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = tuple(as_matrix(a, name="A_k") for a in self.A)
        B = tuple(as_matrix(b, name="B_k") for b in self.B)
        if not A or len(A) != len(B):
            raise DimensionMismatch("A and B need the same positive number of blocks")
        n = A[0].shape[0]
        for a in A:
            if a.shape != (n, n):
                raise DimensionMismatch(f"A_k must be {n}x{n}, got {a.shape}")
        p = B[0].shape[1]
        for b in B:
            if b.shape != (n, p):
                raise DimensionMismatch(f"B_k must be {n}x{p}, got {b.shape}")
        C = as_matrix(self.C, cols=n, name="C")
        D = as_matrix(self.D, rows=C.shape[0], cols=p, name="D")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def d(self) -> int:
        return len(self.A)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def p(self) -> int:
        return self.B[0].shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def A_col(self) -> np.ndarray:
        return np.vstack(self.A)

    @property
    def B_col(self) -> np.ndarray:
        return np.vstack(self.B)

    @property
    def matrix(self) -> np.ndarray:
        """The assembled ``(dn+q) x (n+p)`` block matrix."""
        top = np.hstack([self.A_col, self.B_col])
        bottom = np.hstack([self.C, self.D])
        return np.vstack([top, bottom])

    @classmethod
    def from_matrix(cls, U, d: int, n: int) -> "Colligation":
        U = as_matrix(U, name="U")
        if U.shape[0] < d * n or U.shape[1] < n:
            raise DimensionMismatch("matrix too small for the requested state dimension")
        A = [U[k * n:(k + 1) * n, :n] for k in range(d)]
        B = [U[k * n:(k + 1) * n, n:] for k in range(d)]
        return cls(tuple(A), tuple(B), U[d * n:, :n], U[d * n:, n:])

    def zero_state_dim(self) -> bool:
        return self.n == 0


# ---------------------------------------------------------------------------
# evaluation helpers


def check_point(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.size != d:
        raise DimensionMismatch(f"point has {z.size} coordinates, expected {d}")
    if not np.all(np.isfinite(z)):
        raise PointOutsideBall("point has non-finite coordinates")
    if np.linalg.norm(z) >= 1.0:
        raise PointOutsideBall(f"||z|| = {np.linalg.norm(z):.6g} is not < 1")
    return z


def pencil(mats: Sequence[np.ndarray], z: np.ndarray) -> np.ndarray:
    """``sum_k z_k M_k``."""
    out = np.zeros(mats[0].shape, dtype=complex)
    for zk, M in zip(z, mats):
        out = out + zk * M
    return out


def _resolve(M: np.ndarray, R: np.ndarray) -> np.ndarray:
    try:
        return solve(M, R)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularResolvent(str(exc)) from exc


def state_resolvent(U: Colligation, z: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``(I - Z(z)A)^{-1} R``."""
    n = U.n
    return _resolve(np.eye(n) - pencil(U.A, z), R)


def observability_vectors(U: Colligation, z: np.ndarray) -> np.ndarray:
    """``x_O(z) = (I - A* Z(z)^*)^{-1} C^*`` (n x q)."""
    Astar = [a.conj().T for a in U.A]
    return _resolve(np.eye(U.n) - pencil(Astar, np.conj(z)), U.C.conj().T)


def input_vectors(U: Colligation, z: np.ndarray) -> np.ndarray:
    """``F(z) = (I - A Z(z))^{-1} B`` as a dn x p matrix."""
    ZB = pencil(U.B, z)
    inner = state_resolvent(U, z, ZB)
    return U.B_col + U.A_col @ inner


def transfer_eval(U: Colligation, z) -> np.ndarray:
    """``S(z) = D + C (I - Z(z)A)^{-1} Z(z) B`` by a direct linear solve."""
    z = check_point(z, U.d)
    if U.n == 0:
        return U.D.copy()
    return U.D + U.C @ state_resolvent(U, z, pencil(U.B, z))


def transfer_taylor(U: Colligation, order: int) -> CommSeries:
    """Taylor coefficients of the transfer function up to total degree ``order``."""
    d, n = U.d, U.n
    coeffs = {}
    if n == 0:
        for m in multi_indices(d, order):
            coeffs[m] = U.D.copy() if degree(m) == 0 else np.zeros(U.D.shape, dtype=complex)
        return CommSeries(d, U.D.shape, order, coeffs)
    P = resolvent_taylor_comm(U.A, max(order - 1, 0), side="right")
    for m in multi_indices(d, order):
        if degree(m) == 0:
            coeffs[m] = U.D.copy()
            continue
        acc = np.zeros((n, U.p), dtype=complex)
        for k in range(1, d + 1):
            if m[k - 1]:
                acc = acc + P.coeff(shift(m, k, -1)) @ U.B[k - 1]
        coeffs[m] = U.C @ acc
    return CommSeries(d, U.D.shape, order, coeffs)


# ---------------------------------------------------------------------------
# canonical subspaces


@dataclass(frozen=True, eq=False)
class SpanResult:
    """A span computed from sampled generators and cross-checked on Taylor coefficients."""

    subspace: Subspace
    sampled_dim: int
    coefficient_dim: int
    stabilized: bool


def _grid(U: Colligation) -> np.ndarray:
    return grid_points(U.d, max(4, 4 * U.n * U.d))


def _coefficient_span(blocks: list[tuple[np.ndarray, float]], ambient: int, tol: float) -> Subspace:
    """Span of coefficient blocks, each divided by its a-priori bound.

    Roundoff in a computed coefficient is proportional to its bound, so after
    the division the noise level is uniform across blocks.  Blocks below
    ``1e-12`` of their bound are treated as exact zeros, and singular values
    of the scaled stack below ``1e-12`` are discarded.
    """
    cols = scaled_blocks(blocks)
    M = hstack(cols, ambient)
    if M.size == 0:
        return Subspace(ambient, np.zeros((ambient, 0), dtype=complex))
    s0 = opnorm(M)
    return orthonormal_range(M, tol=max(tol, 1e-12 / s0))


def scaled_blocks(blocks: list[tuple[np.ndarray, float]]) -> list[np.ndarray]:
    out = []
    for M, bound in blocks:
        if M.size == 0 or bound <= 0:
            continue
        if float(np.linalg.norm(M)) <= 1e-12 * bound:
            continue
        out.append(M / bound)
    return out


def _finish_span(sampled: list[np.ndarray], sampled_half: list[np.ndarray], coeff: Subspace,
                 ambient: int, tol: float) -> SpanResult:
    full = orthonormal_range(hstack(sampled, ambient), tol=tol)
    half = orthonormal_range(hstack(sampled_half, ambient), tol=tol)
    stabilized = full.dim == half.dim and full.dim == coeff.dim
    if stabilized:
        stabilized = full.same_as(coeff, tol=1e-6)
    sub = full if stabilized else full.join(coeff, tol=tol)
    return SpanResult(sub, full.dim, coeff.dim, bool(stabilized))


def _norms(mats: Sequence[np.ndarray]) -> list[float]:
    return [opnorm(M) for M in mats]


def _shifted_bound(norms: Sequence[float], m) -> float:
    """``sum_k coefficient_bound(m - e_k)`` over the k with ``m_k >= 1``."""
    return sum(coefficient_bound(norms, shift(m, k, -1)) for k in range(1, len(m) + 1) if m[k - 1])


# Generator families.  Each returns the sampled generators at the grid points,
# the Taylor coefficient blocks (with a-priori norm bounds) and the ambient
# dimension.  Coefficients up to degree n + 1 suffice for every family: the
# resolvents are rational of degree at most n, so vanishing of the first
# n + 1 coefficients forces vanishing of the whole function.

def _fam_obs(U, pts):
    n, d = U.n, U.d
    sampled = [observability_vectors(U, z) for z in pts]
    Astar = [a.conj().T for a in U.A]
    Y = resolvent_taylor_comm(Astar, n + 1, right=U.C.conj().T)
    cn = opnorm(U.C)
    an = _norms(Astar)
    coeff = [(c, cn * coefficient_bound(an, m)) for m, c in Y.items()]
    return sampled, coeff, n


def _fam_input(U, pts):
    sampled = [input_vectors(U, z) for z in pts]
    return sampled, _input_coefficients(U, U.n + 1), U.d * U.n


def _fam_ctrl(U, pts):
    n, d = U.n, U.d
    sampled, coeff, _ = _fam_input(U, pts)
    split = lambda M: [M[k * n:(k + 1) * n] for k in range(d)]
    return ([b for M in sampled for b in split(M)],
            [(b, bound) for M, bound in coeff for b in split(M)], n)


def _fam_weak_co(U, pts):
    n, d = U.n, U.d
    sampled = []
    for z in pts:
        xo = observability_vectors(U, z)
        sampled.append(np.vstack([np.conj(z[k]) * xo for k in range(d)]))
    Astar = [a.conj().T for a in U.A]
    Y = resolvent_taylor_comm(Astar, n + 1, right=U.C.conj().T)
    cn = opnorm(U.C)
    coeff = []
    for m in multi_indices(d, n + 2):
        if degree(m) == 0:
            continue
        G = np.zeros((d * n, U.q), dtype=complex)
        for k in range(1, d + 1):
            if m[k - 1]:
                G[(k - 1) * n:k * n] = Y.coeff(shift(m, k, -1))
        coeff.append((G, cn * _shifted_bound(_norms(Astar), m)))
    return sampled, coeff, d * n


def _fam_weak_iso(U, pts):
    n, d = U.n, U.d
    sampled = []
    for z in pts:
        F = input_vectors(U, z)
        sampled.append(sum(z[k] * F[k * n:(k + 1) * n] for k in range(d)))
    P = resolvent_taylor_comm(U.A, n + 1, side="right")
    bn = max(opnorm(b) for b in U.B)
    coeff = []
    for m in multi_indices(d, n + 2):
        if degree(m) == 0:
            continue
        acc = np.zeros((n, U.p), dtype=complex)
        for k in range(1, d + 1):
            if m[k - 1]:
                acc = acc + P.coeff(shift(m, k, -1)) @ U.B[k - 1]
        coeff.append((acc, bn * _shifted_bound(_norms(U.A), m)))
    return sampled, coeff, n


_FAMILIES = {
    "obs": _fam_obs,
    "ctrl": _fam_ctrl,
    "input": _fam_input,
    "weak_co": _fam_weak_co,
    "weak_iso": _fam_weak_iso,
}


def _input_coefficients(U: Colligation, order: int) -> list[tuple[np.ndarray, float]]:
    """Taylor coefficients of ``F(z) = (I - A Z(z))^{-1} B`` with a-priori bounds."""
    n, d = U.n, U.d
    P = resolvent_taylor_comm(U.A, max(order - 1, 0), side="left")
    bn = max(opnorm(b) for b in U.B)
    an = opnorm(U.A_col)
    out = [(U.B_col, bn)]
    for m in multi_indices(d, order):
        if degree(m) == 0:
            continue
        acc = np.zeros((n, U.p), dtype=complex)
        for k in range(1, d + 1):
            if m[k - 1]:
                acc = acc + P.coeff(shift(m, k, -1)) @ U.B[k - 1]
        out.append((U.A_col @ acc, an * bn * _shifted_bound(_norms(U.A), m)))
    return out


def canonical_span(U: Colligation, kinds: Sequence[str], tol: float = RANK_TOL) -> SpanResult:
    """Joint span of one or more generator families.

    The verdict comes from generators sampled on a fixed grid of
    ``4 n d`` points of radius at most 0.9.  It is cross-checked against the
    Taylor-coefficient generators; if the two disagree, or if half the grid
    gives a smaller rank, the result is marked as not stabilized and the
    union of both spans is returned.
    """
    if U.n == 0:
        ambient = 0
        return SpanResult(Subspace(ambient, np.zeros((0, 0))), 0, 0, True)
    pts = _grid(U)
    half = len(pts) // 2
    sampled, sampled_half, coeff, ambient = [], [], [], None
    for kind in kinds:
        s, c, amb = _FAMILIES[kind](U, pts)
        if ambient is not None and amb != ambient:
            raise DimensionMismatch("generator families live in different spaces")
        ambient = amb
        per_point = len(s) // len(pts)
        sampled.extend(s)
        sampled_half.extend(s[: per_point * half])
        coeff.extend(c)
    coeff_sub = _coefficient_span(coeff, ambient, tol)
    return _finish_span(sampled, sampled_half, coeff_sub, ambient, tol)


def observability_span(U: Colligation, tol: float = RANK_TOL) -> SpanResult:
    """Span of ``(I - A* Z(z)^*)^{-1} C^* y`` over the ball."""
    return canonical_span(U, ["obs"], tol)


def controllability_span(U: Colligation, tol: float = RANK_TOL) -> SpanResult:
    """Span of ``I_j^* (I - A Z(z))^{-1} B u`` over the ball and over j."""
    return canonical_span(U, ["ctrl"], tol)


def weak_coisometry_span(U: Colligation, tol: float = RANK_TOL) -> SpanResult:
    """Span of ``Z(z)^* (I - A* Z(z)^*)^{-1} C^* y`` inside ``X^d``."""
    return canonical_span(U, ["weak_co"], tol)


def weak_isometry_span(U: Colligation, tol: float = RANK_TOL) -> SpanResult:
    """Span of ``Z(z)(I - A Z(z))^{-1} B u`` inside ``X``."""
    return canonical_span(U, ["weak_iso"], tol)


def word_observability_span(U: Colligation, tol: float = RANK_TOL) -> Subspace:
    """Closure of Range C^* under every ``A_k^*`` separately (noncommutative words)."""
    if U.n == 0:
        return Subspace(0, np.zeros((0, 0)))
    seed = orthonormal_range(U.C.conj().T, tol=tol)
    return span_closure(seed, [a.conj().T for a in U.A], tol=tol)


def word_controllability_span(U: Colligation, tol: float = RANK_TOL) -> Subspace:
    if U.n == 0:
        return Subspace(0, np.zeros((0, 0)))
    seed = orthonormal_range(hstack(U.B, U.n), tol=tol)
    return span_closure(seed, list(U.A), tol=tol)


# ---------------------------------------------------------------------------
# classification


@dataclass
class ColligationFlags:
    contraction: bool
    isometry: bool
    coisometry: bool
    unitary: bool
    observable: bool
    controllable: bool
    closely_connected: bool
    weakly_isometric: bool
    weakly_coisometric: bool
    weakly_unitary: bool
    observable_words: bool
    controllable_words: bool
    stabilized: bool
    residuals: dict = field(default_factory=dict)
    dims: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        keys = ["contraction", "isometry", "coisometry", "unitary", "observable", "controllable",
                "closely_connected", "weakly_isometric", "weakly_coisometric", "weakly_unitary",
                "observable_words", "controllable_words", "stabilized"]
        return {k: bool(getattr(self, k)) for k in keys}


def _compressed_defect(G: np.ndarray, Q: np.ndarray) -> float:
    """``||Q^*(I - G)Q||`` for a Gram matrix ``G``."""
    if Q.shape[1] == 0:
        return 0.0
    return opnorm(Q.conj().T @ (np.eye(G.shape[0]) - G) @ Q)


def classify(U: Colligation, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL) -> ColligationFlags:
    """Metric, span and weak-metric properties of a colligation."""
    M = U.matrix
    n, d, p, q = U.n, U.d, U.p, U.q
    sigma = opnorm(M)
    iso_res = opnorm(M.conj().T @ M - np.eye(n + p)) if M.shape[1] else 0.0
    coiso_res = opnorm(M @ M.conj().T - np.eye(d * n + q)) if M.shape[0] else 0.0
    contraction = sigma <= 1.0 + tol
    isometry = iso_res <= tol
    coisometry = coiso_res <= tol

    obs = observability_span(U, rank_tol)
    ctr = controllability_span(U, rank_tol)
    wco = weak_coisometry_span(U, rank_tol)
    wis = weak_isometry_span(U, rank_tol)
    joined = obs.subspace.join(ctr.subspace, rank_tol) if n else Subspace(0, np.zeros((0, 0)))

    Qco = block_diag(wco.subspace.basis, np.eye(q))
    Qis = block_diag(wis.subspace.basis, np.eye(p))
    wco_res = _compressed_defect(M @ M.conj().T, Qco)
    wis_res = _compressed_defect(M.conj().T @ M, Qis)
    weakly_co = contraction and wco_res <= tol
    weakly_iso = contraction and wis_res <= tol

    obs_w = word_observability_span(U, rank_tol)
    ctr_w = word_controllability_span(U, rank_tol)
    return ColligationFlags(
        contraction=contraction,
        isometry=isometry,
        coisometry=coisometry,
        unitary=isometry and coisometry,
        observable=obs.subspace.dim == n,
        controllable=ctr.subspace.dim == n,
        closely_connected=joined.dim == n,
        weakly_isometric=weakly_iso,
        weakly_coisometric=weakly_co,
        weakly_unitary=weakly_iso and weakly_co,
        observable_words=obs_w.dim == n,
        controllable_words=ctr_w.dim == n,
        stabilized=all(s.stabilized for s in (obs, ctr, wco, wis)),
        residuals={
            "norm": sigma,
            "isometry": iso_res,
            "coisometry": coiso_res,
            "weak_isometry": wis_res,
            "weak_coisometry": wco_res,
        },
        dims={
            "n": n,
            "observability": obs.subspace.dim,
            "controllability": ctr.subspace.dim,
            "closely_connected": joined.dim,
            "weak_coisometry": wco.subspace.dim,
            "weak_isometry": wis.subspace.dim,
        },
    )


# ---------------------------------------------------------------------------
# unitary equivalence


@dataclass
class EquivalenceResult:
    """Outcome of a witness search; ``witness`` is None when nothing was found."""

    witness: np.ndarray | None
    residual: float
    nullity: int
    attempts: int

    @property
    def found(self) -> bool:
        return self.witness is not None


def _vec(M: np.ndarray) -> np.ndarray:
    return M.reshape(-1, order="F")


def _unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return v.reshape((rows, cols), order="F")


def colligation_residual(U1: Colligation, U2: Colligation, W: np.ndarray) -> float:
    """Largest violation of ``W A_k = A~_k W``, ``W B_k = B~_k``, ``C = C~ W``, ``D = D~``."""
    res = [opnorm(U1.D - U2.D)]
    for k in range(U1.d):
        res.append(opnorm(W @ U1.A[k] - U2.A[k] @ W))
        res.append(opnorm(W @ U1.B[k] - U2.B[k]))
    res.append(opnorm(U1.C - U2.C @ W))
    return max(res) / max(1.0, opnorm(U1.matrix))


def colligation_equiv(U1: Colligation, U2: Colligation, tol: float = DEFAULT_TOL,
                      restarts: int = 8, seed: int = 0) -> EquivalenceResult:
    """Search for a unitary ``W: X1 -> X2`` with ``(+W)A = A~W``, ``(+W)B = B~``, ``C = C~W``.

    The relations, together with their adjoint forms (valid for unitary W),
    are linear in W.  The least-squares solution and random points of the
    solution set are projected to the unitary group; the first candidate
    meeting ``tol`` is returned.  Failure to find one is a heuristic "no".
    """
    if (U1.d, U1.p, U1.q) != (U2.d, U2.p, U2.q):
        raise ShapeMismatch("colligations differ in d, input or output dimension")
    if U1.n != U2.n:
        raise ShapeMismatch("colligations have different state dimensions")
    n = U1.n
    if n == 0:
        W = np.zeros((0, 0), dtype=complex)
        r = colligation_residual(U1, U2, W)
        return EquivalenceResult(W if r < tol else None, r, 0, 1)
    I = np.eye(n)
    rows, rhs = [], []
    for k in range(U1.d):
        A1, A2 = U1.A[k], U2.A[k]
        rows.append(np.kron(A1.T, I) - np.kron(I, A2))
        rhs.append(np.zeros(n * n))
        rows.append(np.kron(A1.conj(), I) - np.kron(I, A2.conj().T))
        rhs.append(np.zeros(n * n))
        rows.append(np.kron(U1.B[k].T, I))
        rhs.append(_vec(U2.B[k]))
        rows.append(np.kron(I, U2.B[k].conj().T))
        rhs.append(_vec(U1.B[k].conj().T))
    rows.append(np.kron(I, U2.C))
    rhs.append(_vec(U1.C))
    rows.append(np.kron(U1.C.conj(), I))
    rhs.append(_vec(U2.C.conj().T))
    Msys = np.vstack([r for r in rows if r.shape[0]])
    b = np.concatenate([r for r in rhs if r.size] or [np.zeros(0)])
    x0, *_ = np.linalg.lstsq(Msys, b, rcond=None)
    N = null_space(Msys, scale=max(1.0, opnorm(U1.matrix))).basis
    rng = np.random.default_rng(seed)
    best_W, best_res = None, np.inf
    attempts = 0
    for attempt in range(max(1, restarts)):
        attempts += 1
        x = x0.copy()
        if N.shape[1] and (attempt > 0 or np.linalg.norm(x0) < 1e-12):
            c = rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1])
            x = x + N @ c
        W = polar_unitary(_unvec(x, n, n))
        r = colligation_residual(U1, U2, W)
        if r < best_res:
            best_W, best_res = W, r
        if r < tol:
            return EquivalenceResult(W, r, N.shape[1], attempts)
        if N.shape[1] == 0:
            break
    return EquivalenceResult(None, float(best_res), N.shape[1], attempts)
