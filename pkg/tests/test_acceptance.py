"""Acceptance criteria 1 to 10.

Each test prints one ``[C<k>] PASS|FAIL`` line with the measured figures and
then asserts.  The lines are repeated in the terminal summary.
"""
import io
import json
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.linalg import sqrtm

from ballmodel.agler import (
    agler_verify,
    functional_model_verify,
    model_subspaces,
    nc_agler_verify,
    tcfm_from_X,
    v_isometry_check,
)
from ballmodel.cli import run
from ballmodel.colligation import Colligation, classify, colligation_equiv
from ballmodel.generate import (
    conjugate,
    direct_sum,
    mixed_row_contraction_blocks,
    random_commuting_blocks,
    random_contractive_colligation,
    random_row_contraction_blocks,
    random_unitary_colligation,
    spherical_blocks,
    unitary_shapes,
)
from ballmodel.jsonio import dumps, encode_colligation, encode_row_contraction
from ballmodel.matcore import opnorm, unitary_defect
from ballmodel.rowmodel import (
    RowContraction,
    char_eval,
    classify_row,
    defects,
    equiv_intertwiner,
    expanded_moments,
    halmos,
    induced_defect_unitaries,
    moment_alignment_residual,
    nc_char_moments,
    spherical_example,
    theta_coincidence,
    triple_equiv,
)
from ballmodel.sampling import ball_points, random_unitary
from ballmodel.series import (
    CommSeries,
    da_backward_shift,
    da_inner,
    multi_indices,
    multiply_by_variable,
    nc_resolvent_series,
    resolvent_taylor_comm,
    words_upto,
    xn_coefficients,
)

from conftest import ACCEPTANCE_LINES, cmat

pytestmark = pytest.mark.acceptance

SEED = 20240601


def report(k: int, ok: bool, detail: str) -> None:
    line = f"[C{k}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def psd_root(H):
    H = 0.5 * (H + H.conj().T)
    R = sqrtm(H)
    return 0.5 * (R + R.conj().T)


def unitary_set():
    rng = np.random.default_rng(SEED)
    shapes = unitary_shapes(max_d=3, max_n=6, max_pq=3)
    picks = rng.choice(len(shapes), size=50, replace=True)
    return [random_unitary_colligation(*shapes[i][:2], shapes[i][3], rng) for i in picks]


@pytest.fixture(scope="module")
def unitary_colligations():
    return unitary_set()


def test_c1_spherical_example():
    rng = np.random.default_rng(SEED + 1)
    start = time.perf_counter()
    agree = poly = 0.0
    flags_ok = True
    for _ in range(20):
        lam = [b[0, 0] for b in spherical_blocks(2, rng)]
        ex = spherical_example(*lam, pairs=50, seed=int(rng.integers(1 << 30)))
        agree, poly = max(agree, ex.agreement), max(poly, ex.polynomial)
        c = classify_row(ex.T)
        flags_ok &= (c.cnc, c.strongly_cc, c.cc) == (False, True, True)
    elapsed = time.perf_counter() - start
    ok = agree < 1e-10 and poly < 1e-12 and flags_ok and elapsed < 5.0
    report(1, ok, f"kernel residual {agree:.2e}, polynomial {poly:.2e}, flags {flags_ok}, {elapsed:.2f} s")


def test_c2_agler_identity(unitary_colligations):
    worst = {"total": 0.0, "K_S": 0.0, "Psi": 0.0, "Phi": 0.0}
    for U in unitary_colligations:
        rep = agler_verify(U, samples=100, seed=7)
        for k in worst:
            worst[k] = max(worst[k], rep.residuals[k])
    rng = np.random.default_rng(SEED + 2)
    detected = 0
    smallest = np.inf
    for _ in range(20):
        d = int(rng.integers(1, 4))
        U = random_contractive_colligation(d, int(rng.integers(1, 5)), int(rng.integers(1, 4)),
                                           int(rng.integers(1, 4)), rng, norm=float(rng.uniform(0.5, 0.95)))
        rep = agler_verify(U, samples=100, seed=7)
        smallest = min(smallest, rep.residuals["K_S"])
        detected += not rep.block_passed("K_S")
    ok = max(worst.values()) < 1e-9 and detected == 20
    report(2, ok, f"unitary max residuals {', '.join(f'{k} {v:.2e}' for k, v in worst.items())}; "
                  f"contractive failures detected {detected}/20 (smallest {smallest:.2e})")


def test_c3_isometry_gram(unitary_colligations):
    worst = max(v_isometry_check(U, count=12, seed=3).residual for U in unitary_colligations)
    report(3, worst < 1e-9, f"max Gram residual {worst:.2e} over {len(unitary_colligations)} colligations")


def test_c4_tcfm_round_trip():
    rng = np.random.default_rng(SEED + 4)
    shapes = unitary_shapes(max_d=3, max_n=4, max_pq=3)
    x_defect = witness = 0.0
    count = 0
    while count < 25:
        d, n, p, q = shapes[int(rng.integers(len(shapes)))]
        U = random_unitary_colligation(d, n, q, rng)
        if not classify(U).closely_connected:
            continue
        count += 1
        g = model_subspaces(U)
        x_defect = max(x_defect, unitary_defect(g.X))
        witness = max(witness, colligation_equiv(U, tcfm_from_X(g, g.X)).residual)
    # defect spaces of V are nontrivial only without close connection
    hidden = 0.0
    for _ in range(5):
        U0 = random_unitary_colligation(1, int(rng.integers(1, 4)), 1, rng)
        W = random_unitary(2, rng)
        n = U0.n
        A = np.block([[U0.A[0], np.zeros((n, 2))], [np.zeros((2, n)), W]])
        U = Colligation((A,), (np.vstack([U0.B[0], np.zeros((2, U0.p))]),),
                        np.hstack([U0.C, np.zeros((U0.q, 2))]), U0.D)
        g = model_subspaces(U)
        assert g.X.shape == (2, 2)
        hidden = max(hidden, unitary_defect(g.X), colligation_equiv(U, tcfm_from_X(g, g.X)).residual)
    ok = x_defect < 1e-9 and witness < 1e-8 and hidden < 1e-8
    report(4, ok, f"25 c.c. sources: max unitary defect of X {x_defect:.2e}, witness residual {witness:.2e}; "
                  f"nonempty-X sources {hidden:.2e}")


def test_c5_single_variable():
    rng = np.random.default_rng(SEED + 5)
    theta = implication = quotient = 0.0
    implication_ok = True
    for i in range(20):
        n = 1 if i < 10 else int(rng.integers(2, 5))
        T = random_row_contraction_blocks(1, n, rng, norm=float(rng.uniform(0.2, 0.99)))[0]
        dd = defects([T])
        DT, DTs = psd_root(np.eye(n) - T.conj().T @ T), psd_root(np.eye(n) - T @ T.conj().T)
        for z in ball_points(1, 10, seed=i):
            ref = -T + z[0] * DTs @ np.linalg.solve(np.eye(n) - z[0] * T.conj().T, DT)
            got = dd.basis_DTstar.basis @ char_eval([T], z) @ dd.basis_DT.basis.conj().T
            theta = max(theta, opnorm(got - ref))
        U = halmos([T])
        rep = functional_model_verify(U, "cfm", order=8)
        quotient = max(quotient, rep.residuals["difference_quotient"], rep.residuals["gleason"])
        for V in (U, random_contractive_colligation(1, n, 1, 1, rng, norm=1.0),
                  random_unitary_colligation(1, n, 1, rng)):
            f = classify(V)
            if f.weakly_coisometric and f.observable:
                implication_ok &= f.coisometry
    ok = theta < 1e-10 and implication_ok and quotient < 1e-9
    report(5, ok, f"theta residual {theta:.2e}, weakly coisometric and observable implies coisometric "
                  f"{implication_ok}, difference-quotient residual {quotient:.2e}")


def test_c6_classification_chain():
    rng = np.random.default_rng(SEED + 6)
    violations = disagreements = 0
    for _ in range(200):
        c = classify_row(mixed_row_contraction_blocks(rng, max_d=3, max_n=5))
        violations += (c.cnc and not c.strongly_cc) or (c.strongly_cc and not c.cc)
        disagreements += not c.forms_agree
    report(6, violations == 0 and disagreements == 0,
           f"200 tuples: chain violations {violations}, form disagreements {disagreements}")


def _perturbed(T, rng):
    d, n = len(T), T[0].shape[0]
    R = [t + 0.05 * cmat(rng, n, n) for t in T]
    s = np.linalg.norm(np.hstack(R), 2)
    return [r * min(1.0, 0.95 / s) for r in R]


def test_c7_unitary_equivalence():
    rng = np.random.default_rng(SEED + 7)
    inter = align = 0.0
    triple_ok = negatives = agree_cnc = cnc_pairs = 0
    for i in range(30):
        d = int(rng.integers(1, 4))
        if i % 5 == 4:
            # boundary points; for d = 1 these would be unitary and not c.c.
            d = max(d, 2)
            k = int(rng.integers(1, 4))
            T = conjugate(direct_sum(*[spherical_blocks(d, rng) for _ in range(k)]), random_unitary(k, rng))
        elif i % 5 == 3:
            T = random_commuting_blocks(d, int(rng.integers(1, 4)), rng)
        else:
            T = random_row_contraction_blocks(d, int(rng.integers(1, 4)), rng, norm=float(rng.uniform(0.3, 0.95)))
        n = T[0].shape[0]
        Q = random_unitary(n, rng)
        R = conjugate(T, Q)
        w = equiv_intertwiner(T, R)
        inter = max(inter, w.residual)
        te = triple_equiv(T, R)
        triple_ok += te.equivalent
        alpha, beta = induced_defect_unitaries(T, R, Q)
        align = max(align, moment_alignment_residual(expanded_moments(T, 3), expanded_moments(R, 3), alpha, beta))
        S = _perturbed(T, rng)
        te_neg = triple_equiv(T, S)
        w_neg = equiv_intertwiner(T, S)
        negatives += (not te_neg.equivalent) and (not w_neg.found)
        if classify_row(T).cnc:
            for other, te_other in ((R, te), (S, te_neg)):
                if classify_row(other).cnc:
                    cnc_pairs += 1
                    agree_cnc += theta_coincidence(T, other).found == te_other.equivalent
    ok = inter < 1e-8 and triple_ok == 30 and align < 1e-10 and negatives == 30 and agree_cnc == cnc_pairs
    report(7, ok, f"witness residual {inter:.2e}, triple equivalent {triple_ok}/30, moment alignment {align:.2e}, "
                  f"perturbed rejected {negatives}/30, c.n.c. theta-only agreement {agree_cnc}/{cnc_pairs}")


def test_c8_nc_moments():
    rng = np.random.default_rng(SEED + 8)
    moment = block = 0.0
    for i in range(20):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 4))
        T = random_commuting_blocks(d, n, rng) if i % 4 == 0 else random_row_contraction_blocks(d, n, rng)
        row = np.hstack(T)
        DT = psd_root(np.eye(d * n) - row.conj().T @ row)
        DTs = psd_root(np.eye(n) - row @ row.conj().T)
        dd = defects(T)
        Qs, QT = dd.basis_DTstar.basis, dd.basis_DT.basis
        got = nc_char_moments(T, 4)
        for v in words_upto(d, 4):
            if not v:
                ref = -row
            else:
                P = np.eye(n, dtype=complex)
                for letter in v[:-1]:
                    P = P @ T[letter - 1].conj().T
                ref = DTs @ P @ DT[(v[-1] - 1) * n:v[-1] * n]
            moment = max(moment, opnorm(Qs @ got.coeff(v) @ QT.conj().T - ref))
        block = max(block, nc_agler_verify(halmos(T), order=4)["total"])
    ok = moment < 1e-10 and block < 1e-10
    report(8, ok, f"20 tuples to length 4: moment residual {moment:.2e}, nc block identity residual {block:.2e}")


def test_c9_series_layer():
    rng = np.random.default_rng(SEED + 9)
    ab = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 4))
        order = int(rng.integers(1, 5))
        mats = [cmat(rng, 3, 3) / 3 for _ in range(d)]
        c = resolvent_taylor_comm(mats, order)
        scale = max(1.0, max(np.abs(v).max() for _, v in c.items()))
        ab = max(ab, nc_resolvent_series(mats, order).abelianize().max_abs_diff(c) / scale)
    adj = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        order = int(rng.integers(1, 6))
        j = int(rng.integers(1, d + 1))
        f = CommSeries(d, (2, 1), order, {m: cmat(rng, 2, 1) for m in multi_indices(d, order)})
        g = CommSeries(d, (2, 1), order - 1, {m: cmat(rng, 2, 1) for m in multi_indices(d, order - 1)})
        lhs = da_inner(da_backward_shift(f, j), g)
        adj = max(adj, abs(lhs - da_inner(f, multiply_by_variable(g, j))) / max(1.0, abs(lhs)))
    xn = 0.0
    for d in (1, 2, 3):
        n = 2
        T = random_row_contraction_blocks(d, n, rng)
        Ts = np.hstack(T).conj().T
        blocks = []
        for k in range(d):
            P = np.zeros((n, d * n))
            P[:, k * n:(k + 1) * n] = np.eye(n)
            blocks.append(Ts @ P)
        X = xn_coefficients(T, 6)
        ref = resolvent_taylor_comm(blocks, 6)
        xn = max(xn, max(opnorm(X[m] - ref.coeff(m)) for m in multi_indices(d, 6)))
    ok = ab < 1e-12 and adj < 1e-12 and xn < 1e-12
    report(9, ok, f"abelianization {ab:.2e}, backward-shift adjoint {adj:.2e}, X_n recursion {xn:.2e}")


def test_c10_determinism(tmp_path):
    rng = np.random.default_rng(SEED + 10)
    U = random_unitary_colligation(2, 3, 1, rng)
    T = random_row_contraction_blocks(2, 2, rng)
    (tmp_path / "u.json").write_text(dumps(encode_colligation(U)))
    (tmp_path / "t.json").write_text(dumps(encode_row_contraction(RowContraction(tuple(T)))))
    (tmp_path / "r.json").write_text(dumps(encode_row_contraction(
        RowContraction(tuple(conjugate(T, random_unitary(2, rng)))))))
    u, t, r = (str(tmp_path / f) for f in ("u.json", "t.json", "r.json"))
    commands = [
        ["realize", "eval", "--file", u, "--points", "0.1,0.2j;0.3,-0.1"],
        ["check", "colligation", "--file", u],
        ["agler", "verify", "--file", u, "--samples", "20", "--seed", "7"],
        ["agler", "defects", "--file", u],
        ["model", "verify", "--file", u],
        ["rowc", "charfunc", "--file", t, "--points", "0.2,0.1", "--order", "3"],
        ["rowc", "classify", "--file", t],
        ["rowc", "moments", "--file", t, "--order", "3"],
        ["rowc", "equiv", "--a", t, "--b", r, "--seed", "5"],
        ["rowc", "triple-equiv", "--a", t, "--b", r],
        ["example", "spherical", "--lambda", "0.6,0.8j", "--format", "text"],
    ]
    identical = 0
    for argv in commands:
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            run(argv, buf, io.StringIO())
            outs.append(buf.getvalue())
        proc = subprocess.run([sys.executable, "-m", "ballmodel", *argv], capture_output=True, text=True)
        outs.append(proc.stdout)
        identical += len(set(outs)) == 1 and bool(outs[0])
    report(10, identical == len(commands), f"{identical}/{len(commands)} commands byte-identical across 3 runs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
