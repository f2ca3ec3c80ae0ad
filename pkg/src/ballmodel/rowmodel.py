"""Row contractions, their characteristic functions, classification and unitary invariants.

A row contraction is a tuple ``T = (T_1, ..., T_d)`` of n x n matrices with
``||[T_1 ... T_d]|| <= 1``.  The row ``[T_1 ... T_d]`` maps ``X^d -> X``;
``I_k: X -> X^d`` is the k-th block inclusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agler import BigKernelFactor, ModelGeometry, model_subspaces, nc_kernel_coefficient
from .colligation import (
    DEFAULT_TOL,
    Colligation,
    _coefficient_span,
    scaled_blocks,
    check_point,
    transfer_eval,
    transfer_taylor,
)
from .errors import (
    DimensionMismatch,
    NotCloselyConnected,
    NotOnSphere,
    NotRowContraction,
    ShapeMismatch,
)
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
    procrustes,
    span_closure,
)
from .sampling import ball_points, sample_pairs
from .series import (
    CommSeries,
    coefficient_bound,
    NcSeries,
    degree,
    multi_indices,
    multi_indices_of_degree,
    resolvent_taylor_comm,
    shift,
    transpose,
    word_product,
    words_upto,
    xn_coefficients,
)

DEFAULT_WORD_LENGTH = 4


# ---------------------------------------------------------------------------
# row contractions and defects


@dataclass(frozen=True, eq=False)
class RowContraction:
    T: tuple

    def __post_init__(self):
        mats = tuple(as_matrix(t, name="T_k") for t in self.T)
        if not mats:
            raise DimensionMismatch("a row contraction needs at least one operator")
        n = mats[0].shape[0]
        for t in mats:
            if t.shape != (n, n):
                raise DimensionMismatch(f"T_k must all be {n}x{n}, got {t.shape}")
        object.__setattr__(self, "T", mats)

    @property
    def d(self) -> int:
        return len(self.T)

    @property
    def n(self) -> int:
        return self.T[0].shape[0]

    @property
    def row(self) -> np.ndarray:
        return np.hstack(self.T)

    @property
    def row_norm(self) -> float:
        return opnorm(self.row)

    def commutator_norm(self) -> float:
        worst = 0.0
        for i in range(self.d):
            for j in range(i + 1, self.d):
                worst = max(worst, opnorm(self.T[i] @ self.T[j] - self.T[j] @ self.T[i]))
        return worst

    def is_commutative(self, tol: float = DEFAULT_TOL) -> bool:
        return self.commutator_norm() < tol

    def conjugated(self, Q: np.ndarray) -> "RowContraction":
        """``(Q T_k Q^*)_k``."""
        return RowContraction(tuple(Q @ t @ Q.conj().T for t in self.T))


def as_row_contraction(T) -> RowContraction:
    return T if isinstance(T, RowContraction) else RowContraction(tuple(T))


@dataclass(frozen=True, eq=False)
class DefectData:
    D_T: np.ndarray
    D_Tstar: np.ndarray
    basis_DT: Subspace
    basis_DTstar: Subspace


def _defect_root(H: np.ndarray, rank_tol: float) -> tuple[np.ndarray, Subspace]:
    """Square root and range of a PSD defect ``H`` from one eigendecomposition.

    Eigenvalues of ``H`` at most ``rank_tol`` are set to zero before taking
    the root.  Thresholding ``H`` rather than its root matters: roundoff of
    1e-16 in ``H`` would otherwise show up as 1e-8 in the root.
    """
    m = H.shape[0]
    if m == 0:
        return np.zeros((0, 0), dtype=complex), Subspace(0, np.zeros((0, 0)))
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    keep = w > rank_tol
    Vk = V[:, keep]
    root = (Vk * np.sqrt(w[keep])) @ Vk.conj().T
    root = 0.5 * (root + root.conj().T)
    if Vk.shape[1] == 0:
        return root, Subspace(m, np.zeros((m, 0), dtype=complex))
    return root, orthonormal_range(Vk @ Vk.conj().T, tol=1e-6)


def defects(T, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL) -> DefectData:
    T = as_row_contraction(T)
    row = T.row
    if T.row_norm > 1.0 + tol:
        raise NotRowContraction(f"||[T_1 ... T_d]|| = {T.row_norm:.6g} exceeds 1")
    n, d = T.n, T.d
    DT, QT = _defect_root(np.eye(d * n) - row.conj().T @ row, rank_tol)
    DTs, Qs = _defect_root(np.eye(n) - row @ row.conj().T, rank_tol)
    return DefectData(DT, DTs, QT, Qs)


def halmos(T, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL, dd: DefectData | None = None) -> Colligation:
    """``[T^*, D_T; D_{T^*}, -T]`` in the defect-space bases."""
    T = as_row_contraction(T)
    dd = dd or defects(T, tol, rank_tol)
    n, d = T.n, T.d
    QT, Qs = dd.basis_DT.basis, dd.basis_DTstar.basis
    B = dd.D_T @ QT
    A = tuple(t.conj().T for t in T.T)
    Bs = tuple(B[k * n:(k + 1) * n] for k in range(d))
    C = Qs.conj().T @ dd.D_Tstar
    D = -Qs.conj().T @ T.row @ QT
    return Colligation(A, Bs, C, D)


def char_eval(T, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Characteristic function at ``z``, mapping the defect space of T to that of ``T^*``."""
    return transfer_eval(halmos(T, tol), z)


def char_series(T, order: int, tol: float = DEFAULT_TOL) -> CommSeries:
    return transfer_taylor(halmos(T, tol), order)


def purity_check(S0, tol: float = DEFAULT_TOL) -> bool:
    """True iff no nonzero vector is mapped isometrically by ``S0``."""
    S0 = as_matrix(S0, name="S0")
    if S0.size == 0:
        return True
    s = np.linalg.svd(S0, compute_uv=False)
    return bool(np.all(s < 1.0 - tol))


# ---------------------------------------------------------------------------
# moments


def nc_char_moments(T, order: int = DEFAULT_WORD_LENGTH, tol: float = DEFAULT_TOL) -> NcSeries:
    """Word coefficients of the noncommutative characteristic function in the defect bases.

    ``[theta]_empty = -T`` restricted and ``[theta]_{v j} = D_{T^*} T^{*v} I_j^* D_T``
    with ``T^{*v} = T_{v_1}^* ... T_{v_N}^*``.
    """
    T = as_row_contraction(T)
    dd = defects(T, tol)
    n = T.n
    QT, Qs = dd.basis_DT.basis, dd.basis_DTstar.basis
    left = Qs.conj().T @ dd.D_Tstar
    right = dd.D_T @ QT
    Tstar = [t.conj().T for t in T.T]
    coeffs = {(): -Qs.conj().T @ T.row @ QT}
    for v in words_upto(T.d, order):
        if not v:
            continue
        j = v[-1]
        coeffs[v] = left @ word_product(Tstar, v[:-1], n) @ right[(j - 1) * n:j * n]
    return NcSeries(T.d, (Qs.shape[1], QT.shape[1]), order, coeffs)


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Both moment families up to word length ``order``.

    ``expanded[(v, v2, k, j)] = B_k^* T^v T^{*v2} B_j`` where ``B_k`` is the
    k-th block row of ``D_T`` restricted to the defect space, for
    ``|v| + |v2| <= order``.
    """

    order: int
    nc: NcSeries
    expanded: dict
    phi_cross_check: float

    def symmetry_residual(self) -> float:
        """``expanded(v, v2, k, j)^* = expanded(v2^T, v^T, j, k)``."""
        worst = 0.0
        for (v, v2, k, j), M in self.expanded.items():
            other = self.expanded[(transpose(v2), transpose(v), j, k)]
            worst = max(worst, opnorm(M.conj().T - other))
        return worst


def expanded_moments(T, order: int = DEFAULT_WORD_LENGTH, tol: float = DEFAULT_TOL) -> MomentTable:
    T = as_row_contraction(T)
    dd = defects(T, tol)
    n, d = T.n, T.d
    right = dd.D_T @ dd.basis_DT.basis
    Bk = [right[k * n:(k + 1) * n] for k in range(d)]
    Tstar = [t.conj().T for t in T.T]
    ws = words_upto(d, order)
    table = {}
    for v in ws:
        Tv = word_product(T.T, v, n)
        for v2 in ws:
            if len(v) + len(v2) > order:
                continue
            mid = Tv @ word_product(Tstar, v2, n)
            for k in range(1, d + 1):
                for j in range(1, d + 1):
                    table[(v, v2, k, j)] = Bk[k - 1].conj().T @ mid @ Bk[j - 1]
    U = halmos(T, tol, dd=dd)
    cross = 0.0
    for a in ws:
        for b in ws:
            if len(a) + len(b) > order:
                continue
            for i in range(1, d + 1):
                for j in range(1, d + 1):
                    w1, m1 = _input_word_label(i, transpose(a))
                    w2, m2 = _input_word_label(j, b)
                    ref = table[(transpose(w1), w2, m1, m2)]
                    got = nc_kernel_coefficient(U, ("Phi", i, j), a, b)
                    cross = max(cross, opnorm(got - ref))
    return MomentTable(order, nc_char_moments(T, order, tol), table, cross)


def _input_word_label(j: int, beta: tuple) -> tuple[tuple, int]:
    """Write the input coefficient of ``F_j`` at ``beta`` as ``T^{*w} B_m``."""
    if not beta:
        return (), j
    return (j,) + tuple(beta[:-1]), beta[-1]


def induced_defect_unitaries(T, R, W: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Defect-space unitaries ``(alpha, beta)`` induced by ``W`` with ``W T_k W^* = R_k``.

    Then ``theta_R(z) = alpha theta_T(z) beta^*`` and the moments transform alike.
    """
    T, R = as_row_contraction(T), as_row_contraction(R)
    dT, dR = defects(T, tol), defects(R, tol)
    Wd = np.kron(np.eye(T.d), W)
    beta = dR.basis_DT.basis.conj().T @ Wd @ dT.basis_DT.basis
    alpha = dR.basis_DTstar.basis.conj().T @ W @ dT.basis_DTstar.basis
    return alpha, beta


def moment_alignment_residual(mt_T: MomentTable, mt_R: MomentTable, alpha: np.ndarray,
                              beta: np.ndarray) -> float:
    """Largest mismatch of both moment families after rotating by ``(alpha, beta)``."""
    worst = 0.0
    for v, M in mt_T.nc.items():
        worst = max(worst, opnorm(alpha @ M @ beta.conj().T - mt_R.nc.coeff(v)))
    for key, M in mt_T.expanded.items():
        worst = max(worst, opnorm(beta @ M @ beta.conj().T - mt_R.expanded[key]))
    return worst


# ---------------------------------------------------------------------------
# classification


@dataclass
class RowClassification:
    pure: bool
    cnc: bool
    strongly_cc: bool
    cc: bool
    commutative: bool
    cnc_nc: bool
    forms_agree: bool
    stabilized: dict
    dims: dict

    def as_dict(self) -> dict:
        return {
            "pure": self.pure, "cnc": self.cnc, "strongly_cc": self.strongly_cc, "cc": self.cc,
            "commutative": self.commutative, "cnc_nc": self.cnc_nc, "forms_agree": self.forms_agree,
            "stabilized": dict(self.stabilized), "dims": dict(self.dims),
        }


def _inclusion(n: int, d: int, k: int) -> np.ndarray:
    E = np.zeros((d * n, n), dtype=complex)
    E[(k - 1) * n:k * n] = np.eye(n)
    return E


def _stable(history: list[int], window: int) -> bool:
    if history and history[-1] == 0:
        return True
    if len(history) < window + 1:
        return False
    return len(set(history[-(window + 1):])) == 1


def classify_row(T, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL,
                 cap_cc: int | None = None, cap_scc: int | None = None) -> RowClassification:
    """Purity and the chain c.n.c. => strongly c.c. => c.c.

    The subspaces M1 (c.c.) and M2 (strongly c.c.) are computed twice: as
    joint kernels of truncated coefficient operators and as complements of
    coefficient spans.  ``forms_agree`` records whether the two agree.
    """
    T = as_row_contraction(T)
    n, d = T.n, T.d
    dd = defects(T, tol, rank_tol)
    U = halmos(T, tol, rank_tol, dd)
    cap_cc = max(2 * n, n + 1) if cap_cc is None else cap_cc
    cap_scc = 2 * n + d if cap_scc is None else cap_scc
    top = max(cap_cc, cap_scc)
    DT, DTs = dd.D_T, dd.D_Tstar
    Tstar = [t.conj().T for t in T.T]
    tn = [opnorm(t) for t in T.T]
    rn = [T.row_norm] * d
    bound_T = lambda m: coefficient_bound(tn, m)
    bound_row = lambda m: coefficient_bound(rn, m)
    bound_shift = lambda m: sum(bound_row(shift(m, k, -1)) for k in range(1, d + 1) if m[k - 1])

    # kernel form
    Y = resolvent_taylor_comm(Tstar, top)
    row = T.row
    blocks = []
    for k in range(1, d + 1):
        M = np.zeros((d * n, d * n), dtype=complex)
        M[(k - 1) * n:k * n] = row
        blocks.append(M)
    F = resolvent_taylor_comm(blocks, top)
    inc = [_inclusion(n, d, k) for k in range(1, d + 1)]
    obs_cols, scc_cols, cc_cols = [], [], []
    hist0, hist2, hist1 = [], [], []
    adj = lambda M, bound: scaled_blocks([(M.conj().T, bound)])
    kernel = lambda cols: _coefficient_span([(c, 1.0) for c in cols], n, rank_tol).complement(rank_tol)
    for deg in range(top + 1):
        for m in multi_indices_of_degree(d, deg):
            obs_cols += adj(DTs @ Y.coeff(m), bound_T(m))
            if deg <= cap_cc:
                for i in range(d):
                    cc_cols += adj(DT @ F.coeff(m) @ inc[i], bound_row(m))
            if deg >= 1:
                acc = sum(F.coeff(shift(m, k, -1)) @ inc[k - 1] for k in range(1, d + 1) if m[k - 1])
                scc_cols += adj(DT @ acc, bound_shift(m))
        hist0.append(kernel(obs_cols).dim)
        hist2.append(kernel(obs_cols + scc_cols).dim)
        if deg <= cap_cc:
            hist1.append(kernel(obs_cols + scc_cols + cc_cols).dim)
    M2 = kernel(obs_cols + scc_cols)
    M1 = kernel(obs_cols + scc_cols + cc_cols)

    # span form
    Xn = xn_coefficients(T, top)
    Tw = resolvent_taylor_comm(T.T, top)
    obs_span, cc_span, scc_span = [], [], []
    for m in multi_indices(d, top):
        deg = degree(m)
        obs_span.append((Tw.coeff(m) @ DTs, bound_T(m)))
        if deg <= cap_cc:
            for i in range(d):
                cc_span.append((inc[i].conj().T @ Xn[m] @ DT, bound_row(m)))
        if deg >= 1:
            acc = sum(inc[k - 1].conj().T @ Xn[shift(m, k, -1)] for k in range(1, d + 1) if m[k - 1])
            scc_span.append((acc @ DT, bound_shift(m)))
    M2s = _coefficient_span(obs_span + scc_span, n, rank_tol).complement(rank_tol)
    M1s = _coefficient_span(obs_span + cc_span, n, rank_tol).complement(rank_tol)
    agree = M2.same_as(M2s, tol=1e-6) and M1.same_as(M1s, tol=1e-6)

    cnc_nc = span_closure(orthonormal_range(DTs, tol=rank_tol) if n else Subspace(0, np.zeros((0, 0))),
                          list(T.T), rank_tol).dim == n
    S0 = U.D
    return RowClassification(
        pure=purity_check(S0, tol),
        cnc=hist0[-1] == 0,
        strongly_cc=M2.dim == 0,
        cc=M1.dim == 0,
        commutative=T.is_commutative(tol),
        cnc_nc=bool(cnc_nc),
        forms_agree=bool(agree),
        stabilized={
            "cnc": _stable(hist0, d),
            "strongly_cc": _stable(hist2, d),
            "cc": _stable(hist1, d),
        },
        dims={"n": n, "cnc_kernel": hist0[-1], "M2": M2.dim, "M1": M1.dim,
              "defect": dd.basis_DT.dim, "defect_star": dd.basis_DTstar.dim},
    )


# ---------------------------------------------------------------------------
# equivalence


@dataclass
class WitnessResult:
    """A certified witness, or None with the best residual reached."""

    witness: object
    residual: float
    attempts: int
    detail: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.witness is not None


def intertwiner_residual(T, R, W: np.ndarray) -> float:
    T, R = as_row_contraction(T), as_row_contraction(R)
    return max(opnorm(W @ t @ W.conj().T - r) for t, r in zip(T.T, R.T))


def equiv_intertwiner(T, R, tol: float = 1e-9, restarts: int = 8, seed: int = 0) -> WitnessResult:
    """Unitary ``W`` with ``W T_i W^* = R_i`` for all i, or None.

    Searches the joint solution space of ``W T_i = R_i W`` and ``W T_i^* = R_i^* W``.
    """
    T, R = as_row_contraction(T), as_row_contraction(R)
    if T.d != R.d or T.n != R.n:
        raise ShapeMismatch("tuples differ in length or size")
    n = T.n
    I = np.eye(n)
    rows = []
    for t, r in zip(T.T, R.T):
        rows.append(np.kron(t.T, I) - np.kron(I, r))
        rows.append(np.kron(t.conj(), I) - np.kron(I, r.conj().T))
    N = null_space(np.vstack(rows), tol=1e-10, scale=1.0).basis
    if N.shape[1] == 0:
        return WitnessResult(None, float("inf"), 0, {"nullity": 0})
    rng = np.random.default_rng(seed)
    best, best_res = None, np.inf
    for attempt in range(max(1, restarts)):
        c = rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1])
        W = polar_unitary((N @ c).reshape((n, n), order="F"))
        res = intertwiner_residual(T, R, W)
        if res < best_res:
            best, best_res = W, res
        if res < tol:
            return WitnessResult(W, res, attempt + 1, {"nullity": N.shape[1]})
    return WitnessResult(None, float(best_res), max(1, restarts), {"nullity": N.shape[1]})


@dataclass(frozen=True, eq=False)
class CoincidenceData:
    """Samples for a coincidence search.

    ``theta`` holds ``q x p`` values at common points; ``factor`` optionally
    holds the kernel factors ``G(z)`` ((q + dp) x n) at the same points.
    """

    theta: tuple
    factor: tuple | None = None
    d: int = 1

    @property
    def q(self) -> int:
        return self.theta[0].shape[0]

    @property
    def p(self) -> int:
        return self.theta[0].shape[1]


def coincidence_data(U: Colligation, points: np.ndarray, with_factor: bool = True) -> CoincidenceData:
    theta = tuple(transfer_eval(U, z) for z in points)
    factor = tuple(BigKernelFactor(U).G(z) for z in points) if with_factor else None
    return CoincidenceData(theta, factor, U.d)


def _coincidence_residual(A: CoincidenceData, B: CoincidenceData, alpha, beta, P) -> float:
    ThA = np.hstack(A.theta)
    ThB = np.hstack(B.theta)
    scale = max(1.0, opnorm(ThA))
    res = opnorm(np.hstack([t @ beta for t in A.theta]) - alpha @ ThB) / scale if ThA.size else 0.0
    if A.factor is not None:
        Wd = _factor_unitary(alpha, beta, A.d)
        GA = np.hstack([g @ P for g in A.factor])
        GB = np.hstack([Wd @ g for g in B.factor])
        if GA.size:
            res = max(res, opnorm(GA - GB) / max(1.0, opnorm(GA)))
    return res


def _factor_unitary(alpha, beta, d):
    return block_diag(alpha, *([beta] * d))


def coincidence(A: CoincidenceData, B: CoincidenceData, tol: float = 1e-8, restarts: int = 8,
                seed: int = 0, max_iter: int = 200) -> WitnessResult:
    """Unitaries ``(alpha, beta)`` (and ``P`` when factors are given) with
    ``theta_A = alpha theta_B beta^*`` and ``G_A P = diag(alpha, beta, ..., beta) G_B``.

    Starts from the linear solution space and refines by alternating
    Procrustes steps.  The witness is ``(alpha, beta)`` or ``(alpha, beta, P)``.
    """
    if len(A.theta) != len(B.theta) or A.q != B.q or A.p != B.p:
        raise DimensionMismatch("coincidence needs samples of equal count and shape")
    use_factor = A.factor is not None and B.factor is not None
    if use_factor and A.factor[0].shape != B.factor[0].shape:
        raise DimensionMismatch("kernel factors have different shapes")
    q, p, d = A.q, A.p, A.d
    n = A.factor[0].shape[1] if use_factor else 0
    Af = A if use_factor else CoincidenceData(A.theta, None, d)
    Bf = B if use_factor else CoincidenceData(B.theta, None, d)
    N = _linear_coincidence_space(Af, Bf, q, p, n)
    rng = np.random.default_rng(seed)
    best, best_res, attempts = None, np.inf, 0
    for attempt in range(max(1, restarts)):
        attempts += 1
        if N.shape[1]:
            c = rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1])
            x = N @ c
        else:
            x = rng.standard_normal(q * q + p * p + n * n) + 0j
        alpha = polar_unitary(x[:q * q].reshape((q, q), order="F"))
        beta = polar_unitary(x[q * q:q * q + p * p].reshape((p, p), order="F"))
        P = polar_unitary(x[q * q + p * p:].reshape((n, n), order="F"))
        res = _coincidence_residual(Af, Bf, alpha, beta, P)
        for _ in range(max_iter):
            if res < tol:
                break
            alpha, beta, P = _procrustes_sweep(Af, Bf, alpha, beta, P, use_factor)
            new = _coincidence_residual(Af, Bf, alpha, beta, P)
            if new > res - 1e-15 * max(1.0, res) and new >= tol:
                res = new
                break
            res = new
        if res < best_res:
            best, best_res = (alpha, beta, P), res
        if res < tol:
            w = (alpha, beta, P) if use_factor else (alpha, beta)
            return WitnessResult(w, res, attempts, {"nullity": N.shape[1]})
    return WitnessResult(None, float(best_res), attempts, {"nullity": N.shape[1]})


def _linear_coincidence_space(A, B, q, p, n) -> np.ndarray:
    """Solutions ``(vec alpha, vec beta, vec P)`` of the homogeneous coincidence equations."""
    d = A.d
    blocks = []
    Iq, Ip, In = np.eye(q), np.eye(p), np.eye(n)
    for tA, tB in zip(A.theta, B.theta):
        # theta_A beta - alpha theta_B = 0
        blocks.append(np.hstack([-np.kron(tB.T, Iq), np.kron(Ip, tA), np.zeros((q * p, n * n))]))
    if A.factor is not None:
        for gA, gB in zip(A.factor, B.factor):
            top_A, top_B = gA[:q], gB[:q]
            blocks.append(np.hstack([-np.kron(top_B.T, Iq), np.zeros((q * n, p * p)), np.kron(In, top_A)]))
            for j in range(d):
                rA, rB = gA[q + j * p:q + (j + 1) * p], gB[q + j * p:q + (j + 1) * p]
                blocks.append(np.hstack([np.zeros((p * n, q * q)), -np.kron(rB.T, Ip), np.kron(In, rA)]))
    M = np.vstack([b for b in blocks if b.shape[0]]) if any(b.shape[0] for b in blocks) else np.zeros((0, q * q + p * p + n * n))
    if M.shape[1] == 0:
        return np.zeros((0, 0))
    return null_space(M, tol=1e-8, scale=1.0).basis


def _procrustes_sweep(A, B, alpha, beta, P, use_factor):
    q, p, d = A.q, A.p, A.d
    if use_factor:
        Wd = _factor_unitary(alpha, beta, d)
        # P minimises ||G_A P - W G_B|| stacked over samples
        GA_rows = np.vstack(A.factor)
        GB_rows = np.vstack([Wd @ g for g in B.factor])
        P = procrustes(GB_rows.conj().T, GA_rows.conj().T).conj().T
    left_a = [np.hstack([t @ beta for t in A.theta])]
    right_a = [np.hstack(B.theta)]
    if use_factor:
        left_a.append(np.hstack([g[:q] @ P for g in A.factor]))
        right_a.append(np.hstack([g[:q] for g in B.factor]))
    if q:
        alpha = procrustes(np.hstack(left_a), np.hstack(right_a))
    left_b = [np.hstack([t.conj().T @ alpha for t in A.theta])]
    right_b = [np.hstack([t.conj().T for t in B.theta])]
    if use_factor:
        for j in range(d):
            left_b.append(np.hstack([g[q + j * p:q + (j + 1) * p] @ P for g in A.factor]))
            right_b.append(np.hstack([g[q + j * p:q + (j + 1) * p] for g in B.factor]))
    if p:
        beta = procrustes(np.hstack(left_b), np.hstack(right_b))
    return alpha, beta, P


# ---------------------------------------------------------------------------
# characteristic triple


@dataclass(frozen=True, eq=False)
class CharTriple:
    theta: Colligation
    bigK: BigKernelFactor
    geometry: ModelGeometry

    @property
    def X(self) -> np.ndarray:
        return self.geometry.X

    def as_dict(self) -> dict:
        U = self.theta
        return {"dims": {"n": U.n, "defect": U.p, "defect_star": U.q,
                         "X_rows": self.X.shape[0], "X_cols": self.X.shape[1]},
                "geometry": self.geometry.as_dict()}


def characteristic_triple(T, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL) -> CharTriple:
    T = as_row_contraction(T)
    cls = classify_row(T, tol, rank_tol)
    if not cls.cc:
        raise NotCloselyConnected("the Halmos colligation of T is not closely connected")
    U = halmos(T, tol, rank_tol)
    return CharTriple(U, BigKernelFactor(U), model_subspaces(U, tol, rank_tol))


@dataclass
class TripleEquivResult:
    equivalent: bool
    reason: str
    residuals: dict
    witnesses: dict

    def as_dict(self) -> dict:
        return {"equivalent": self.equivalent, "reason": self.reason, "residuals": dict(self.residuals)}


def _x_operator(geom: ModelGeometry) -> np.ndarray:
    """``X`` as an operator ``X^d -> X`` supported on the defect spaces."""
    return geom.R_perp.basis @ geom.X @ geom.D_perp.basis.conj().T


def triple_equiv(T, R, tol: float = 1e-8, restarts: int = 8, seed: int = 0,
                 samples: int | None = None) -> TripleEquivResult:
    """Decide whether two c.c. row contractions have equivalent characteristic triples.

    (i) joint coincidence of characteristic function and kernel, with a state
    unitary ``P`` satisfying ``G_T P = diag(alpha, beta..) G_R``; (ii) the same
    ``P`` carries the defect compression of R to that of T.  Negative answers
    are heuristic unless an invariant (singular values of ``theta(0)`` or
    dimensions) already differs.
    """
    T, R = as_row_contraction(T), as_row_contraction(R)
    if T.d != R.d or T.n != R.n:
        return TripleEquivResult(False, "dimensions differ", {}, {})
    tT = characteristic_triple(T, tol)
    tR = characteristic_triple(R, tol)
    UT, UR = tT.theta, tR.theta
    if (UT.p, UT.q) != (UR.p, UR.q) or tT.X.shape != tR.X.shape:
        return TripleEquivResult(False, "defect dimensions differ", {}, {})
    sT = np.linalg.svd(UT.D, compute_uv=False) if UT.D.size else np.zeros(0)
    sR = np.linalg.svd(UR.D, compute_uv=False) if UR.D.size else np.zeros(0)
    sv_gap = float(np.max(np.abs(sT - sR))) if sT.size else 0.0
    if sv_gap > 1e-6:
        return TripleEquivResult(False, "singular values of theta(0) differ", {"theta0_singular_values": sv_gap}, {})
    n, d, p, q = UT.n, UT.d, UT.p, UT.q
    count = samples or max(6, 2 * n * d + 2)
    pts = ball_points(d, count, seed=seed, radius=0.7)
    A = coincidence_data(UT, pts)
    B = coincidence_data(UR, pts)
    XT, XR = _x_operator(tT.geometry), _x_operator(tR.geometry)
    N = _linear_coincidence_space(A, B, q, p, n)
    if N.shape[1]:
        # add X-compatibility: XT (+P) - P XR = 0 on the P coordinates
        # vec(XT kron(I_d, P) - P XR) is linear in vec P; build it column by column
        cols = []
        for idx in range(n * n):
            E = np.zeros(n * n, dtype=complex)
            E[idx] = 1
            Pm = E.reshape((n, n), order="F")
            cols.append((XT @ np.kron(np.eye(d), Pm) - Pm @ XR).reshape(-1, order="F"))
        Mx = np.array(cols).T if cols else np.zeros((0, 0))
        Sel = np.zeros((n * n, N.shape[0]), dtype=complex)
        Sel[:, q * q + p * p:] = np.eye(n * n)
        restricted = Mx @ Sel @ N
        if restricted.size and opnorm(restricted) > 0:
            Nx = null_space(restricted, tol=1e-8, scale=1.0).basis
            N = N @ Nx
    rng = np.random.default_rng(seed)
    best = (np.inf, None)
    for attempt in range(max(1, restarts)):
        if N.shape[1] == 0:
            break
        c = rng.standard_normal(N.shape[1]) + 1j * rng.standard_normal(N.shape[1])
        x = N @ c
        alpha = polar_unitary(x[:q * q].reshape((q, q), order="F"))
        beta = polar_unitary(x[q * q:q * q + p * p].reshape((p, p), order="F"))
        P = polar_unitary(x[q * q + p * p:].reshape((n, n), order="F"))
        res = _coincidence_residual(A, B, alpha, beta, P)
        for _ in range(200):
            if res < tol:
                break
            alpha, beta, P = _procrustes_sweep(A, B, alpha, beta, P, True)
            new = _coincidence_residual(A, B, alpha, beta, P)
            if new > res - 1e-15:
                res = min(res, new)
                break
            res = new
        xres = opnorm(XT @ np.kron(np.eye(d), P) - P @ XR)
        total = max(res, xres)
        if total < best[0]:
            best = (total, (alpha, beta, P, res, xres))
        if total < tol:
            break
    if best[1] is None:
        return TripleEquivResult(False, "no joint coincidence (heuristic)", {"coincidence": float("inf")}, {})
    alpha, beta, P, res, xres = best[1]
    inter = intertwiner_residual(T, R, P.conj().T)
    residuals = {"coincidence": float(res), "x_compatibility": float(xres), "intertwiner": float(inter)}
    ok = res < tol and xres < tol
    reason = "equivalent" if ok else "no compatible witnesses found (heuristic)"
    return TripleEquivResult(bool(ok), reason, residuals, {"alpha": alpha, "beta": beta, "P": P})


def theta_coincidence(T, R, tol: float = 1e-8, restarts: int = 8, seed: int = 0,
                      samples: int | None = None) -> WitnessResult:
    """Coincidence of characteristic functions alone."""
    UT, UR = halmos(T), halmos(R)
    if (UT.p, UT.q) != (UR.p, UR.q):
        return WitnessResult(None, float("inf"), 0, {"reason": "defect dimensions differ"})
    count = samples or max(6, 2 * UT.n * UT.d + 2)
    pts = ball_points(UT.d, count, seed=seed, radius=0.7)
    return coincidence(coincidence_data(UT, pts, False), coincidence_data(UR, pts, False),
                       tol=tol, restarts=restarts, seed=seed)


# ---------------------------------------------------------------------------
# the boundary-point example


def spherical_kernel(lam: Sequence[complex]):
    """Closed-form kernel for ``T = [lam_1 lam_2]`` with ``|lam| = 1``.

    ``K(z, w) = g(z) g(w)^*`` with ``g(z) = [conj(z_2 - lam_2), -conj(z_1 - lam_1)] / conj(1 - <lam, z>)``
    written through ``delta(z) = 1 - conj(z_1) lam_1 - conj(z_2) lam_2``.
    """
    l1, l2 = complex(lam[0]), complex(lam[1])

    def g(z):
        z = check_point(z, 2)
        delta = 1 - np.conj(z[0]) * l1 - np.conj(z[1]) * l2
        return np.array([[np.conj(z[1]) - np.conj(l2)], [-(np.conj(z[0]) - np.conj(l1))]]) / delta

    def kernel(z, w):
        return g(z) @ g(w).conj().T

    return kernel


def spherical_polynomial_residual(lam: Sequence[complex], z, w) -> float:
    """Residual of the polynomial form of the Agler identity for the boundary point ``lam``."""
    l1, l2 = complex(lam[0]), complex(lam[1])
    z1, z2 = np.conj(complex(z[0])), np.conj(complex(z[1]))  # conjugated z
    w1, w2 = complex(w[0]), complex(w[1])
    a1, a2 = z1 - np.conj(l1), z2 - np.conj(l2)
    b1, b2 = w1 - l1, w2 - l2
    lhs = (1 - z1 * l1 - z2 * l2) * (1 - w1 * np.conj(l1) - w2 * np.conj(l2))
    rhs = (a2 * b2 + a1 * b1
           - z1 * w1 * a2 * b2 + z1 * w2 * a2 * b1
           + z2 * w1 * a1 * b2 - z2 * w2 * a1 * b1)
    return abs(lhs - rhs)


@dataclass
class SphericalExample:
    lam: tuple
    T: RowContraction
    colligation: Colligation
    kernel: object
    agreement: float
    polynomial: float


def spherical_example(lam1: complex, lam2: complex, tol: float = 1e-9, pairs: int = 50,
                      seed: int = 0) -> SphericalExample:
    """Boundary point of the 2-ball as a 1 x 1 row coisometry, with its closed-form kernel.

    ``agreement`` compares the closed form to the kernel of the Halmos
    colligation at ``pairs`` random pairs; ``polynomial`` is the worst residual
    of the expanded identity at the same pairs.
    """
    lam = (complex(lam1), complex(lam2))
    if abs(abs(lam[0]) ** 2 + abs(lam[1]) ** 2 - 1.0) > tol:
        raise NotOnSphere(f"|lambda|^2 = {abs(lam[0]) ** 2 + abs(lam[1]) ** 2:.12g} is not 1")
    T = RowContraction((np.array([[lam[0]]]), np.array([[lam[1]]])))
    U = halmos(T, tol)
    closed = spherical_kernel(lam)
    realized = BigKernelFactor(U)
    agree = 0.0
    poly = 0.0
    for z, w in sample_pairs(2, pairs, seed=seed):
        agree = max(agree, opnorm(closed(z, w) - realized(z, w)))
        poly = max(poly, spherical_polynomial_residual(lam, z, w))
    return SphericalExample(lam, T, U, closed, agree, poly)
