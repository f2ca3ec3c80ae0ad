"""Agler decompositions of realized Schur multipliers and the associated model geometry.

The two-component kernel is ``K(z, w) = G(z) G(w)^*`` with

    G(z) = [ C (I - Z(z)A)^{-1} ; F_1(z)^* ; ... ; F_d(z)^* ],
    F(z) = (I - A Z(z))^{-1} B,   F_j = j-th block row of F.

Blocks: ``K_S = G_0 G_0^*`` (q x q), ``Psi_k = G_0 G_k^*`` (q x p) and
``Phi_ij = G_i G_j^*`` (p x p).  Functions in the kernel space are carried in
state coordinates: ``K(., w) v`` corresponds to ``G(w)^* v`` in ``X = C^n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .colligation import (
    DEFAULT_TOL,
    Colligation,
    canonical_span,
    check_point,
    classify,
    input_vectors,
    observability_vectors,
    pencil,
    state_resolvent,
    transfer_eval,
    transfer_taylor,
)
from .errors import DimensionMismatch, NotAContraction, NotStabilized
from .matcore import (
    RANK_TOL,
    Subspace,
    block_diag,
    hstack,
    opnorm,
    orthonormal_range,
    unitary_defect,
)
from .sampling import grid_points, sample_pairs
from .series import (
    CommSeries,
    NcSeries,
    da_backward_shift,
    da_weight,
    degree,
    multi_indices,
    resolvent_taylor_comm,
    shift,
    transpose,
    word_product,
    words_upto,
)

DEFAULT_PAIRS = 100
DEFAULT_SEED = 0

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# kernel factor


@dataclass(frozen=True, eq=False)
class KernelValue:
    """``K(z, w)`` with block accessors."""

    matrix: np.ndarray
    d: int
    p: int
    q: int

    def _rows(self, i: int) -> slice:
        if i == 0:
            return slice(0, self.q)
        return slice(self.q + (i - 1) * self.p, self.q + i * self.p)

    def block(self, i: int, j: int) -> np.ndarray:
        """Block ``(i, j)``; index 0 is the output block, ``1..d`` the input copies."""
        return self.matrix[self._rows(i), self._rows(j)]

    @property
    def K_S(self) -> np.ndarray:
        return self.block(0, 0)

    def Psi(self, k: int) -> np.ndarray:
        return self.block(0, k)

    def Phi(self, i: int, j: int) -> np.ndarray:
        return self.block(i, j)

    @property
    def Phi_matrix(self) -> np.ndarray:
        return self.matrix[self.q:, self.q:]

    @property
    def K0(self) -> np.ndarray:
        """First block column."""
        return self.matrix[:, :self.q]

    def Kj(self, j: int) -> np.ndarray:
        """Block column ``j`` (``1..d``)."""
        return self.matrix[:, self._rows(j)]

    @property
    def T(self) -> np.ndarray:
        """The block columns ``K_1 .. K_d`` stacked vertically."""
        return np.vstack([self.Kj(j) for j in range(1, self.d + 1)])


@dataclass(frozen=True, eq=False)
class BigKernelFactor:
    """Kolmogorov factor ``G`` of the kernel induced by a colligation."""

    source: Colligation

    @property
    def size(self) -> int:
        U = self.source
        return U.q + U.d * U.p

    def G(self, z) -> np.ndarray:
        """``G(z)``, a ``(q + dp) x n`` matrix."""
        U = self.source
        z = check_point(z, U.d)
        n = U.n
        top = U.C @ state_resolvent(U, z, np.eye(n)) if n else np.zeros((U.q, 0), dtype=complex)
        F = input_vectors(U, z) if n else np.zeros((0, U.p), dtype=complex)
        rows = [top] + [F[k * n:(k + 1) * n].conj().T for k in range(U.d)]
        return np.vstack(rows)

    def value(self, z, w) -> KernelValue:
        U = self.source
        M = self.G(z) @ self.G(w).conj().T
        return KernelValue(M, U.d, U.p, U.q)

    def __call__(self, z, w) -> np.ndarray:
        return self.value(z, w).matrix


def big_kernel_eval(F: BigKernelFactor, z, w) -> KernelValue:
    return F.value(z, w)


def M_matrix(z: np.ndarray, p: int, q: int) -> np.ndarray:
    """``diag(I_Y, col(z_k I_U))``."""
    col = np.vstack([zk * np.eye(p) for zk in z]) if p else np.zeros((0, 0))
    return block_diag(np.eye(q), col.reshape(len(z) * p, p))


def N_matrix(z: np.ndarray, j: int, p: int, q: int) -> np.ndarray:
    """``diag(conj(z_j) I_Y, e_j (x) I_U)`` with ``j`` 1-based."""
    d = len(z)
    e = np.zeros((d * p, p), dtype=complex)
    e[(j - 1) * p:j * p] = np.eye(p)
    return block_diag(np.conj(z[j - 1]) * np.eye(q), e)


# ---------------------------------------------------------------------------
# Agler identity


@dataclass
class AglerReport:
    tol: float
    seed: int
    pairs: int
    residuals: dict
    per_pair_max: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.residuals["total"] < self.tol

    def block_passed(self, name: str) -> bool:
        return self.residuals[name] < self.tol

    def as_dict(self) -> dict:
        return {
            "tol": self.tol,
            "seed": self.seed,
            "pairs": self.pairs,
            "residuals": dict(self.residuals),
            "passed": self.passed,
            "blocks_passed": {k: self.block_passed(k) for k in ("K_S", "Psi", "Phi")},
        }


def agler_residuals(U: Colligation, z, w, kernel: Kernel | None = None) -> dict:
    """Residuals of the Agler identity at one pair, scaled by ``max(1, ||K(z, w)||)``."""
    z = check_point(z, U.d)
    w = check_point(w, U.d)
    d, p, q = U.d, U.p, U.q
    K = (kernel or BigKernelFactor(U))(z, w)
    Kv = KernelValue(K, d, p, q)
    Sz, Sw = transfer_eval(U, z), transfer_eval(U, w)
    lhs = np.block([
        [np.eye(q) - Sz @ Sw.conj().T, Sw - Sz],
        [Sz.conj().T - Sw.conj().T, Sz.conj().T @ Sw - np.eye(p)],
    ]) if p + q else np.zeros((0, 0))
    rhs = M_matrix(z, p, q).conj().T @ K @ M_matrix(w, p, q)
    for j in range(1, d + 1):
        rhs = rhs - N_matrix(z, j, p, q).conj().T @ K @ N_matrix(w, j, p, q)
    scale = max(1.0, opnorm(K))
    inner = np.vdot(w, z)  # sum_j z_j conj(w_j)
    ks = (1 - inner) * Kv.K_S - (np.eye(q) - Sz @ Sw.conj().T)
    psi = Sz - Sw - sum((z[j] - w[j]) * Kv.Psi(j + 1) for j in range(d))
    phi = np.eye(p) - Sz.conj().T @ Sw
    for i in range(1, d + 1):
        phi = phi - Kv.Phi(i, i)
        for l in range(1, d + 1):
            phi = phi + np.conj(z[i - 1]) * w[l - 1] * Kv.Phi(i, l)
    return {
        "total": opnorm(lhs - rhs) / scale,
        "K_S": opnorm(ks) / scale,
        "Psi": opnorm(psi) / scale,
        "Phi": opnorm(phi) / scale,
    }


def agler_verify(U: Colligation, pairs: Sequence[tuple] | None = None, tol: float = DEFAULT_TOL,
                 samples: int = DEFAULT_PAIRS, seed: int = DEFAULT_SEED,
                 kernel: Kernel | None = None) -> AglerReport:
    """Both sides of the Agler identity at sample pairs, with per-block residuals.

    Failures are reported, never raised.
    """
    if pairs is None:
        pairs = sample_pairs(U.d, samples, seed=seed)
    worst = {"total": 0.0, "K_S": 0.0, "Psi": 0.0, "Phi": 0.0}
    per_pair = []
    for z, w in pairs:
        r = agler_residuals(U, z, w, kernel)
        per_pair.append(r["total"])
        for k in worst:
            worst[k] = max(worst[k], r[k])
    return AglerReport(tol, seed, len(pairs), worst, per_pair)


# ---------------------------------------------------------------------------
# the isometry V as a Gram identity


@dataclass(frozen=True)
class Generator:
    """Data ``(w, y, u)`` for one domain/range vector pair of V."""

    point: np.ndarray
    y: np.ndarray
    u: np.ndarray


def random_generators(U: Colligation, count: int, seed: int = DEFAULT_SEED) -> list[Generator]:
    rng = np.random.default_rng(seed)
    pts = [w for pair in sample_pairs(U.d, (count + 1) // 2, seed=seed) for w in pair][:count]
    out = []
    for w in pts:
        y = rng.standard_normal(U.q) + 1j * rng.standard_normal(U.q)
        u = rng.standard_normal(U.p) + 1j * rng.standard_normal(U.p)
        nrm = np.sqrt(np.linalg.norm(y) ** 2 + np.linalg.norm(u) ** 2) or 1.0
        out.append(Generator(np.asarray(w), y / nrm, u / nrm))
    return out


@dataclass
class GramReport:
    residual: float
    absolute: float
    tol: float
    count: int

    @property
    def passed(self) -> bool:
        return self.residual < self.tol

    def as_dict(self) -> dict:
        return {"residual": self.residual, "absolute": self.absolute, "tol": self.tol,
                "generators": self.count, "passed": self.passed}


def v_gram_matrices(U: Colligation, gens: Sequence[Generator],
                    kernel: Kernel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrices of the domain and range vectors of V, from kernel values only."""
    d, p, q = U.d, U.p, U.q
    K = kernel or BigKernelFactor(U)
    m = len(gens)
    Gd = np.zeros((m, m), dtype=complex)
    Gr = np.zeros((m, m), dtype=complex)
    S = [transfer_eval(U, g.point) for g in gens]
    xs = [np.concatenate([g.y, g.u]) for g in gens]
    for a, ga in enumerate(gens):
        for b, gb in enumerate(gens):
            Kba = K(gb.point, ga.point)
            dom = 0j
            for i in range(1, d + 1):
                va = N_matrix(ga.point, i, p, q) @ xs[a]
                vb = N_matrix(gb.point, i, p, q) @ xs[b]
                dom += np.vdot(vb, Kba @ va)
            dom += np.vdot(gb.y + S[b] @ gb.u, ga.y + S[a] @ ga.u)
            va = M_matrix(ga.point, p, q) @ xs[a]
            vb = M_matrix(gb.point, p, q) @ xs[b]
            rng_ = np.vdot(vb, Kba @ va)
            rng_ += np.vdot(S[b].conj().T @ gb.y + gb.u, S[a].conj().T @ ga.y + ga.u)
            Gd[b, a] = dom
            Gr[b, a] = rng_
    return Gd, Gr


def v_isometry_check(U: Colligation, gens: Sequence[Generator] | None = None,
                     tol: float = DEFAULT_TOL, count: int = 12, seed: int = DEFAULT_SEED,
                     kernel: Kernel | None = None) -> GramReport:
    """``||G_domain - G_range||`` relative to ``max(1, ||G_domain||)``.

    ``kernel`` replaces the realized kernel, e.g. to test a perturbed one.
    """
    if gens is None:
        gens = random_generators(U, count, seed)
    if not gens:
        return GramReport(0.0, 0.0, tol, 0)
    Gd, Gr = v_gram_matrices(U, gens, kernel)
    ab = opnorm(Gd - Gr)
    return GramReport(ab / max(1.0, opnorm(Gd)), ab, tol, len(gens))


# ---------------------------------------------------------------------------
# model geometry


@dataclass(frozen=True, eq=False)
class ModelGeometry:
    """Defect spaces of V and the compression X of ``U^*`` between them.

    ``D_sub`` and ``D_perp`` live in ``X^d``, ``R_sub`` and ``R_perp`` in ``X``.
    ``V`` is the ``(n + p) x (dn + q)`` matrix of V extended by zero on
    ``D_perp``; ``X`` is ``dim R_perp x dim D_perp``.
    """

    d: int
    n: int
    p: int
    q: int
    D_sub: Subspace
    R_sub: Subspace
    D_perp: Subspace
    R_perp: Subspace
    V: np.ndarray
    X: np.ndarray
    canonical: bool
    stabilized: bool
    residuals: dict

    def as_dict(self) -> dict:
        return {
            "dims": {
                "D": self.D_sub.dim, "R": self.R_sub.dim,
                "D_perp": self.D_perp.dim, "R_perp": self.R_perp.dim,
            },
            "canonical": self.canonical,
            "stabilized": self.stabilized,
            "residuals": dict(self.residuals),
        }


def _v_generators(U: Colligation, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns of the domain (in ``X^d + Y``) and range (in ``X + U``) vectors of V."""
    n, d, p, q = U.n, U.d, U.p, U.q
    dom, rng_ = [], []
    for w in pts:
        S = transfer_eval(U, w)
        xo = observability_vectors(U, w) if n else np.zeros((0, q))
        F = input_vectors(U, w) if n else np.zeros((0, p))
        Zs_xo = np.vstack([np.conj(w[k]) * xo for k in range(d)]) if n else np.zeros((0, q))
        ZF = sum(w[k] * F[k * n:(k + 1) * n] for k in range(d)) if n else np.zeros((0, p))
        dom.append(np.vstack([np.hstack([Zs_xo, F]), np.hstack([np.eye(q), S])]))
        rng_.append(np.vstack([np.hstack([xo, ZF]), np.hstack([S.conj().T, np.eye(p)])]))
    return hstack(dom, d * n + q), hstack(rng_, n + p)


def model_subspaces(U: Colligation, tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL,
                    require_stable: bool = True) -> ModelGeometry:
    """Defect geometry of the canonical isometry V in state coordinates.

    Raises :class:`NotStabilized` if a sampled span did not stabilize and
    ``require_stable`` is set.  For sources that are not unitary and closely
    connected, ``X`` is still the compression but ``canonical`` is False.
    """
    n, d, p, q = U.n, U.d, U.p, U.q
    Dspan = canonical_span(U, ["weak_co", "input"], rank_tol)
    Rspan = canonical_span(U, ["obs", "weak_iso"], rank_tol)
    stable = Dspan.stabilized and Rspan.stabilized
    if require_stable and not stable:
        raise NotStabilized("sampled spans of the defect spaces did not stabilize")
    Dsub = Dspan.subspace if n else Subspace(0, np.zeros((0, 0)))
    Rsub = Rspan.subspace if n else Subspace(0, np.zeros((0, 0)))
    Dp, Rp = Dsub.complement(rank_tol), Rsub.complement(rank_tol)

    pts = grid_points(d, max(4, 4 * n * d))
    Gdom, Grng = _v_generators(U, pts)
    Vfit = Grng @ np.linalg.pinv(Gdom, rcond=rank_tol) if Gdom.size else np.zeros((n + p, d * n + q))
    fit = opnorm(Vfit @ Gdom - Grng) / max(1.0, opnorm(Grng))

    Ustar = U.matrix.conj().T
    Ad = U.A_col.conj().T
    Bd = U.B_col.conj().T
    X = Rp.basis.conj().T @ Ad @ Dp.basis
    off = max(opnorm(Rsub.basis.conj().T @ Ad @ Dp.basis), opnorm(Bd @ Dp.basis))
    Pdom = block_diag(Dsub.projector(), np.eye(q))
    v_vs_u = opnorm((Vfit - Ustar) @ Pdom)
    flags = classify(U, tol, rank_tol)
    canonical = flags.unitary and flags.closely_connected
    residuals = {
        "off_diagonal": off,
        "v_fit": fit,
        "v_vs_adjoint": v_vs_u,
        "x_unitary_defect": unitary_defect(X) if X.shape[0] == X.shape[1] else float("inf"),
    }
    return ModelGeometry(d, n, p, q, Dsub, Rsub, Dp, Rp, Vfit @ Pdom, X, bool(canonical), bool(stable),
                         residuals)


def tcfm_from_X(geom: ModelGeometry, X, tol: float = DEFAULT_TOL) -> Colligation:
    """Colligation whose adjoint is V on the defect-free part and X between the defect spaces."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        X = X.reshape(geom.R_perp.dim, geom.D_perp.dim)
    if X.shape != (geom.R_perp.dim, geom.D_perp.dim):
        raise DimensionMismatch(f"X must be {geom.R_perp.dim}x{geom.D_perp.dim}, got {X.shape}")
    if opnorm(X) > 1.0 + tol:
        raise NotAContraction(f"||X|| = {opnorm(X):.6g} exceeds 1")
    n, d, p, q = geom.n, geom.d, geom.p, geom.q
    left = np.vstack([geom.R_perp.basis, np.zeros((p, geom.R_perp.dim))])
    right = np.vstack([geom.D_perp.basis, np.zeros((q, geom.D_perp.dim))])
    Ustar = geom.V + left @ X @ right.conj().T
    return Colligation.from_matrix(Ustar.conj().T, d, n)


# ---------------------------------------------------------------------------
# functional-model verification


@dataclass
class ModelReport:
    kind: str
    order: int
    tol: float
    residuals: dict
    flags: dict

    @property
    def passed(self) -> bool:
        return all(v < self.tol for v in self.residuals.values()) and all(self.flags.values())

    def as_dict(self) -> dict:
        return {"kind": self.kind, "order": self.order, "tol": self.tol,
                "residuals": dict(self.residuals), "flags": dict(self.flags), "passed": self.passed}


KINDS = ("cfm", "dcfm", "tcfm")


def _max_over(items) -> float:
    return max([0.0] + [float(x) for x in items])


def _gleason_residual(U: Colligation, order: int) -> float:
    """``C P_m = sum_k C P_{m-e_k} A_k`` with ``P`` built by the other recursion."""
    P = resolvent_taylor_comm(U.A, order, side="left")
    scale = max(1.0, opnorm(U.C))
    worst = 0.0
    for m in multi_indices(U.d, order):
        if degree(m) == 0:
            continue
        rhs = sum(U.C @ P.coeff(shift(m, k, -1)) @ U.A[k - 1] for k in range(1, U.d + 1) if m[k - 1])
        worst = max(worst, opnorm(U.C @ P.coeff(m) - rhs) / scale)
    return worst


def _dual_blocks(U: Colligation) -> list[np.ndarray]:
    """``I_k A^*`` as dn x dn blocks, so that ``sum_k conj(z_k) I_k A^* = Z(z)^* A^*``."""
    n, d = U.n, U.d
    row = U.A_col.conj().T
    out = []
    for k in range(d):
        M = np.zeros((d * n, d * n), dtype=complex)
        M[k * n:(k + 1) * n] = row
        out.append(M)
    return out


def _dual_gleason_residual(U: Colligation, order: int) -> tuple[float, CommSeries]:
    blocks = _dual_blocks(U)
    Bd = U.B_col.conj().T
    Y = resolvent_taylor_comm(blocks, order, side="left", left=Bd)
    scale = max(1.0, opnorm(Bd))
    worst = opnorm(Y.coeff(tuple([0] * U.d)) - Bd) / scale
    for m in multi_indices(U.d, order):
        if degree(m) == 0:
            continue
        rhs = sum(Y.coeff(shift(m, k, -1)) @ blocks[k - 1] for k in range(1, U.d + 1) if m[k - 1])
        worst = max(worst, opnorm(Y.coeff(m) - rhs) / scale)
    return worst, Y


def _difference_quotient_residual(U: Colligation, order: int) -> float:
    """For one variable: the backward shift of ``f_x`` equals ``f_{Ax}``."""
    n = U.n
    f = resolvent_taylor_comm(U.A, order, left=U.C)
    g = resolvent_taylor_comm(U.A, order - 1, left=U.C, right=U.A[0])
    shifted = da_backward_shift(f, 1)
    return shifted.max_abs_diff(g) / max(1.0, opnorm(U.C))


def _action_residuals(U: Colligation, pts: np.ndarray) -> dict:
    n, d, p, q = U.n, U.d, U.p, U.q
    Ad, Bd = U.A_col.conj().T, U.B_col.conj().T
    out = {k: 0.0 for k in ("obs_shift", "input_shift", "output_on_obs", "output_on_input", "state_on_input")}
    for w in pts:
        S = transfer_eval(U, w)
        xo = observability_vectors(U, w)
        F = input_vectors(U, w)
        Zs_xo = np.vstack([np.conj(w[k]) * xo for k in range(d)])
        ZF = sum(w[k] * F[k * n:(k + 1) * n] for k in range(d))
        scale = max(1.0, opnorm(xo), opnorm(F))
        out["obs_shift"] = max(out["obs_shift"], opnorm(Ad @ Zs_xo - (xo - U.C.conj().T)) / scale)
        out["input_shift"] = max(out["input_shift"], opnorm(U.A_col @ ZF - (F - U.B_col)) / scale)
        out["output_on_obs"] = max(out["output_on_obs"],
                                   opnorm(Bd @ Zs_xo - (S.conj().T - U.D.conj().T)) / scale)
        out["output_on_input"] = max(out["output_on_input"],
                                     opnorm(Bd @ F - (np.eye(p) - U.D.conj().T @ S)) / scale)
        out["state_on_input"] = max(out["state_on_input"],
                                    opnorm(Ad @ F - (ZF - U.C.conj().T @ S)) / scale)
    return out


def functional_model_verify(U: Colligation, kind: str = "tcfm", order: int | None = None,
                            tol: float = DEFAULT_TOL, rank_tol: float = RANK_TOL) -> ModelReport:
    """Check that ``U`` acts on its kernel space as the model colligation of the given kind.

    Identities are checked on Taylor coefficients up to ``order`` and at grid
    points.  The structural flags carry the discriminating content.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    n, d, p, q = U.n, U.d, U.p, U.q
    if order is None:
        order = max(2 * n, 2)
    flags_all = classify(U, tol, rank_tol)
    res: dict = {}
    res["constant_term"] = opnorm(transfer_eval(U, np.zeros(d)) - U.D)
    if n:
        pts = grid_points(d, max(4, 4 * n * d))
        actions = _action_residuals(U, pts)
        if kind in ("cfm", "tcfm"):
            res["gleason"] = _gleason_residual(U, order)
            res["obs_shift"] = actions["obs_shift"]
            res["output_on_obs"] = actions["output_on_obs"]
            if d == 1:
                res["difference_quotient"] = _difference_quotient_residual(U, order)
        if kind in ("dcfm", "tcfm"):
            dual, _ = _dual_gleason_residual(U, order)
            res["dual_gleason"] = dual
            res["input_shift"] = actions["input_shift"]
            res["output_on_input"] = actions["output_on_input"]
        if kind == "tcfm":
            res["state_on_input"] = actions["state_on_input"]
            res.update(_defect_residuals(U, order, rank_tol))
    if kind in ("cfm", "tcfm"):
        res["coisometric_output"] = opnorm(U.C @ U.C.conj().T + U.D @ U.D.conj().T - np.eye(q)) if q else 0.0
    if kind in ("dcfm", "tcfm"):
        res["isometric_input"] = (opnorm(U.B_col.conj().T @ U.B_col + U.D.conj().T @ U.D - np.eye(p))
                                  if p else 0.0)
    if kind == "cfm":
        flags = {"observable": flags_all.observable, "weakly_coisometric": flags_all.weakly_coisometric}
    elif kind == "dcfm":
        flags = {"controllable": flags_all.controllable, "weakly_isometric": flags_all.weakly_isometric}
    else:
        flags = {"closely_connected": flags_all.closely_connected,
                 "weakly_unitary": flags_all.weakly_unitary}
    return ModelReport(kind, order, tol, {k: float(v) for k, v in res.items()}, flags)


def _defect_residuals(U: Colligation, order: int, rank_tol: float) -> dict:
    """Vectors of the defect space give identically vanishing functions."""
    n, d = U.n, U.d
    Dspan = canonical_span(U, ["weak_co", "input"], rank_tol)
    H = Dspan.subspace.complement(rank_tol).basis
    if H.shape[1] == 0:
        return {"defect_output": 0.0, "defect_input": 0.0}
    P = resolvent_taylor_comm(U.A, order, left=U.C)
    out_res = 0.0
    for m in multi_indices(d, order + 1):
        acc = np.zeros((U.q, H.shape[1]), dtype=complex)
        for k in range(1, d + 1):
            if m[k - 1]:
                acc = acc + P.coeff(shift(m, k, -1)) @ H[(k - 1) * n:k * n]
        out_res = max(out_res, opnorm(acc))
    _, Y = _dual_gleason_residual(U, order)
    in_res = _max_over(opnorm(Y.coeff(m) @ H) for m in multi_indices(d, order))
    return {"defect_output": out_res, "defect_input": in_res}


def commutative_model_check(U: Colligation, tol: float = DEFAULT_TOL, order: int | None = None) -> dict:
    """Commutativity of the state blocks, the contractive Gleason inequality and backward-shift invariance.

    Invariance of the kernel space under the Drury-Arveson backward shifts can
    only be confirmed up to the truncation order, so it is reported as such.
    """
    n, d = U.n, U.d
    if order is None:
        order = max(2 * n, 2)
    comm = _max_over(opnorm(U.A[i] @ U.A[j] - U.A[j] @ U.A[i]) for i in range(d) for j in range(i + 1, d))
    G = np.eye(n) - sum(a.conj().T @ a for a in U.A) - U.C.conj().T @ U.C
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (G + G.conj().T)))) if n else 0.0
    inv_res = _da_invariance_residual(U, order) if n else 0.0
    return {
        "commutative": comm < tol,
        "gleason_contractive": min_eig > -tol,
        "da_invariant_up_to_order": inv_res < max(tol, 1e-8),
        "order": order,
        "residuals": {"commutator": comm, "gleason_min_eig": min_eig, "da_invariance": inv_res},
    }


def _weighted_stack(f: CommSeries, order: int) -> np.ndarray:
    rows = [np.sqrt(da_weight(m)) * f.coeff(m) for m in multi_indices(f.d, order)]
    return np.vstack(rows)


def _da_invariance_residual(U: Colligation, order: int) -> float:
    """Relative distance of ``M_{z_j}^* f_x`` from ``{f_y}`` in the weighted coefficient norm."""
    f = resolvent_taylor_comm(U.A, order, left=U.C)
    base = _weighted_stack(f, order - 1)
    worst = 0.0
    for j in range(1, U.d + 1):
        g = _weighted_stack(da_backward_shift(f, j), order - 1)
        if not g.size:
            continue
        c, *_ = np.linalg.lstsq(base, g, rcond=None)
        worst = max(worst, opnorm(base @ c - g) / max(1e-300, opnorm(g)) if opnorm(g) > 1e-14 else 0.0)
    return worst


# ---------------------------------------------------------------------------
# noncommutative kernel blocks


def nc_transfer_series(U: Colligation, order: int) -> NcSeries:
    """Word coefficients ``S_empty = D`` and ``S_{v j} = C A^v B_j``."""
    n = U.n
    coeffs = {(): U.D.copy()}
    for v in words_upto(U.d, order):
        if not v:
            continue
        coeffs[v] = U.C @ word_product(U.A, v[:-1], n) @ U.B[v[-1] - 1]
    return NcSeries(U.d, U.D.shape, order, coeffs)


def _input_word(U: Colligation, j: int, beta: tuple) -> np.ndarray:
    if not beta:
        return U.B[j - 1]
    return U.A[j - 1] @ word_product(U.A, beta[:-1], U.n) @ U.B[beta[-1] - 1]


def nc_kernel_coefficient(U: Colligation, block: tuple, alpha: tuple, beta: tuple) -> np.ndarray:
    """Coefficient of ``z^alpha zeta*^beta`` in an nc kernel block.

    ``block`` is ``("K_S",)``, ``("Psi", k)`` or ``("Phi", i, j)``.
    """
    n = U.n
    obs = lambda w: U.C @ word_product(U.A, w, n)
    if block[0] == "K_S":
        return obs(alpha) @ obs(transpose(beta)).conj().T
    if block[0] == "Psi":
        return obs(alpha) @ _input_word(U, block[1], beta)
    if block[0] == "Phi":
        return _input_word(U, block[1], transpose(alpha)).conj().T @ _input_word(U, block[2], beta)
    raise ValueError(f"unknown block {block!r}")


def _word_pairs(d: int, order: int):
    ws = words_upto(d, order)
    for a in ws:
        for b in ws:
            if len(a) + len(b) <= order:
                yield a, b


def nc_agler_verify(U: Colligation, order: int = 4, tol: float = DEFAULT_TOL) -> dict:
    """Coefficient-wise nc Agler identities for all word pairs with ``|alpha| + |beta| <= order``."""
    d, p, q = U.d, U.p, U.q
    S = nc_transfer_series(U, order)
    Sc = lambda w: S.coeff(w) if len(w) <= order else np.zeros((q, p))
    worst = {"K_S": 0.0, "Psi": 0.0, "Phi": 0.0}
    for a, b in _word_pairs(d, order):
        # output block
        lhs = nc_kernel_coefficient(U, ("K_S",), a, b)
        rhs = np.eye(q) if a == transpose(b) else np.zeros((q, q))
        for g in range(0, min(len(a), len(b)) + 1):
            gamma = a[len(a) - g:]
            if transpose(b[:g]) != gamma:
                continue
            rhs = rhs - Sc(a[:len(a) - g]) @ Sc(transpose(b[g:])).conj().T
        worst["K_S"] = max(worst["K_S"], opnorm(lhs - rhs))
        # mixed block
        if a and not b:
            lhs = Sc(a)
        elif b and not a:
            lhs = -Sc(b)
        else:
            lhs = np.zeros((q, p))
        rhs = np.zeros((q, p), dtype=complex)
        for k in range(1, d + 1):
            if a and a[-1] == k:
                rhs = rhs + nc_kernel_coefficient(U, ("Psi", k), a[:-1], b)
            if b and b[0] == k:
                rhs = rhs - nc_kernel_coefficient(U, ("Psi", k), a, b[1:])
        worst["Psi"] = max(worst["Psi"], opnorm(lhs - rhs))
        # input block
        lhs = (np.eye(p) if not a and not b else np.zeros((p, p))) - Sc(transpose(a)).conj().T @ Sc(b)
        rhs = sum(nc_kernel_coefficient(U, ("Phi", k, k), a, b) for k in range(1, d + 1))
        if a and b:
            rhs = rhs - nc_kernel_coefficient(U, ("Phi", a[-1], b[0]), a[:-1], b[1:])
        worst["Phi"] = max(worst["Phi"], opnorm(lhs - rhs))
    total = max(worst.values())
    return {"order": order, "tol": tol, "residuals": worst, "total": total, "passed": total < tol}
