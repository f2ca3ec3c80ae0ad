import numpy as np
import pytest
from scipy.linalg import sqrtm

from ballmodel.agler import BigKernelFactor
from ballmodel.colligation import classify, transfer_eval
from ballmodel.errors import NotCloselyConnected, NotOnSphere, NotRowContraction, ShapeMismatch
from ballmodel.generate import (
    conjugate,
    direct_sum,
    mixed_row_contraction_blocks,
    random_commuting_blocks,
    random_row_contraction_blocks,
    spherical_blocks,
)
from ballmodel.matcore import opnorm
from ballmodel.rowmodel import (
    RowContraction,
    char_eval,
    char_series,
    characteristic_triple,
    classify_row,
    coincidence,
    coincidence_data,
    defects,
    equiv_intertwiner,
    expanded_moments,
    halmos,
    induced_defect_unitaries,
    moment_alignment_residual,
    nc_char_moments,
    purity_check,
    spherical_example,
    spherical_kernel,
    theta_coincidence,
    triple_equiv,
)
from ballmodel.sampling import ball_points, random_unitary, sample_pairs
from ballmodel.series import words_upto

from conftest import cmat


def psd_root(H):
    H = 0.5 * (H + H.conj().T)
    return 0.5 * (sqrtm(H) + sqrtm(H).conj().T)


def nagy_foias(T, z):
    """``-T + z D_{T*} (I - z T^*)^{-1} D_T`` on the full space (d = 1)."""
    n = T.shape[0]
    DT = psd_root(np.eye(n) - T.conj().T @ T)
    DTs = psd_root(np.eye(n) - T @ T.conj().T)
    return -T + z * DTs @ np.linalg.solve(np.eye(n) - z * T.conj().T, DT)


def brute_moments(T, order):
    """Word coefficients by expanding the nc resolvent one letter at a time."""
    d, n = len(T), T[0].shape[0]
    row = np.hstack(T)
    DT = psd_root(np.eye(d * n) - row.conj().T @ row)
    DTs = psd_root(np.eye(n) - row @ row.conj().T)
    out = {(): -row}
    for v in words_upto(d, order):
        if not v:
            continue
        P = np.eye(n, dtype=complex)
        for letter in v[:-1]:
            P = P @ T[letter - 1].conj().T
        j = v[-1]
        out[v] = DTs @ P @ DT[(j - 1) * n:j * n]
    return out


class TestRowContraction:
    def test_properties(self, rng):
        T = RowContraction(tuple(random_row_contraction_blocks(2, 3, rng, norm=0.7)))
        assert (T.d, T.n) == (2, 3)
        assert T.row_norm == pytest.approx(0.7)
        assert not T.is_commutative()
        assert RowContraction(tuple(random_commuting_blocks(3, 3, rng))).is_commutative()

    def test_defects_reject_expansive(self):
        with pytest.raises(NotRowContraction):
            defects([np.array([[1.2]])])

    def test_defect_identities(self, rng):
        blocks = random_row_contraction_blocks(2, 3, rng)
        dd = defects(blocks)
        row = np.hstack(blocks)
        assert np.allclose(dd.D_T @ dd.D_T, np.eye(6) - row.conj().T @ row, atol=1e-12)
        assert np.allclose(dd.D_Tstar @ dd.D_Tstar, np.eye(3) - row @ row.conj().T, atol=1e-12)

    def test_halmos_is_unitary(self, rng):
        for _ in range(5):
            U = halmos(mixed_row_contraction_blocks(rng))
            assert classify(U).unitary


class TestCharacteristicFunction:
    @pytest.mark.derived
    def test_scalar_mobius(self):
        assert char_eval([np.array([[0.6]])], [0.5])[0, 0] == pytest.approx(-1 / 7, abs=1e-14)

    @pytest.mark.derived
    def test_matrix_nagy_foias(self, rng):
        for _ in range(5):
            T = random_row_contraction_blocks(1, 3, rng, norm=0.9)[0]
            dd = defects([T])
            Qs, QT = dd.basis_DTstar.basis, dd.basis_DT.basis
            for z in ball_points(1, 8, seed=3):
                got = Qs @ char_eval([T], z) @ QT.conj().T
                assert np.linalg.norm(got - nagy_foias(T, z[0])) < 1e-10

    def test_series_resums(self, rng):
        T = random_row_contraction_blocks(2, 2, rng, norm=0.6)
        f = char_series(T, 30)
        for z in ball_points(2, 4, seed=2, radius=0.4):
            assert np.linalg.norm(f.evaluate(z) - char_eval(T, z)) < 1e-9

    def test_contractive_values(self, rng):
        T = random_row_contraction_blocks(3, 2, rng, norm=1.0)
        for z in ball_points(3, 10, seed=1):
            assert opnorm(char_eval(T, z)) <= 1 + 1e-12

    def test_purity(self, rng):
        for _ in range(10):
            assert purity_check(halmos(mixed_row_contraction_blocks(rng)).D)
        assert not purity_check(np.eye(2))
        assert purity_check(np.zeros((0, 2)))


class TestClassification:
    def test_scalar(self):
        c = classify_row([np.array([[0.6]])])
        assert c.cnc and c.strongly_cc and c.cc and c.pure

    def test_zero_row(self):
        c = classify_row([np.zeros((1, 1)), np.zeros((1, 1))])
        assert c.cnc

    @pytest.mark.reference
    def test_boundary_point(self):
        c = classify_row([np.array([[1.0]]), np.array([[0.0]])])
        assert not c.cnc and c.strongly_cc and c.cc
        assert c.forms_agree

    def test_chain_and_agreement(self, rng):
        for _ in range(40):
            c = classify_row(mixed_row_contraction_blocks(rng))
            assert (not c.cnc or c.strongly_cc) and (not c.strongly_cc or c.cc)
            assert c.forms_agree and all(c.stabilized.values())

    def test_conjugation_invariance(self, rng):
        T = mixed_row_contraction_blocks(rng)
        R = conjugate(T, random_unitary(T[0].shape[0], rng))
        a, b = classify_row(T).as_dict(), classify_row(R).as_dict()
        for k in ("cnc", "strongly_cc", "cc", "pure", "cnc_nc"):
            assert a[k] == b[k]

    def test_unitary_summand_blocks_close_connection(self, rng):
        # a unitary d = 1 summand has zero defects, so nothing reaches it
        W = random_unitary(2, rng)
        T = direct_sum([0.5 * np.eye(1)], [W])
        c = classify_row(T)
        assert not c.cc
        with pytest.raises(NotCloselyConnected):
            characteristic_triple(T)


class TestMoments:
    @pytest.mark.derived
    def test_against_brute_force(self, rng):
        for d in (1, 2, 3):
            T = random_row_contraction_blocks(d, 2, rng)
            dd = defects(T)
            Qs, QT = dd.basis_DTstar.basis, dd.basis_DT.basis
            got = nc_char_moments(T, 3)
            ref = brute_moments(T, 3)
            for v, M in ref.items():
                assert np.linalg.norm(Qs @ got.coeff(v) @ QT.conj().T - M) < 1e-10

    def test_expanded_table(self, rng):
        mt = expanded_moments(random_row_contraction_blocks(2, 2, rng), order=3)
        assert mt.symmetry_residual() < 1e-12
        assert mt.phi_cross_check < 1e-12

    def test_alignment_under_conjugation(self, rng):
        T = random_row_contraction_blocks(2, 3, rng)
        W = random_unitary(3, rng)
        R = conjugate(T, W)
        alpha, beta = induced_defect_unitaries(T, R, W)
        assert moment_alignment_residual(expanded_moments(T, 3), expanded_moments(R, 3), alpha, beta) < 1e-10
        for z in ball_points(2, 5, seed=4):
            assert np.linalg.norm(char_eval(R, z) - alpha @ char_eval(T, z) @ beta.conj().T) < 1e-10


class TestEquivalence:
    def test_identity(self, rng):
        T = random_row_contraction_blocks(2, 3, rng)
        res = equiv_intertwiner(T, T)
        assert res.found and res.residual < 1e-12

    def test_conjugated(self, rng):
        T = random_row_contraction_blocks(3, 3, rng)
        res = equiv_intertwiner(T, conjugate(T, random_unitary(3, rng)))
        assert res.found and res.residual < 1e-9

    def test_scalars_up_to_phase(self):
        # the system is zero up to roundoff; it must not read as full rank
        T = [np.array([[0.3 + 0.4j]]), np.array([[0.5]])]
        R = conjugate(T, np.array([[np.exp(0.7j)]]))
        assert equiv_intertwiner(T, R).found

    @pytest.mark.derived
    def test_scalar_sylvester(self):
        res = equiv_intertwiner([np.array([[0.6]])], [np.array([[0.7]])])
        assert not res.found and res.detail["nullity"] == 0

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            equiv_intertwiner(random_row_contraction_blocks(2, 2, rng), random_row_contraction_blocks(2, 3, rng))

    def test_coincidence_recovers_unitaries(self, rng):
        T = random_row_contraction_blocks(2, 2, rng)
        U = halmos(T)
        pts = ball_points(2, 8, seed=1, radius=0.7)
        a0, b0 = random_unitary(U.q, rng), random_unitary(U.p, rng)
        A = coincidence_data(U, pts, with_factor=False)
        B = type(A)(tuple(a0.conj().T @ t @ b0 for t in A.theta), None, 2)
        res = coincidence(A, B)
        assert res.found and res.residual < 1e-8
        assert coincidence(A, A).found

    @pytest.mark.derived
    def test_theta0_singular_values_separate(self):
        assert not theta_coincidence([np.array([[0.6]])], [np.array([[0.7]])]).found

    def test_triple_equiv_conjugated(self, rng):
        T = random_row_contraction_blocks(2, 2, rng)
        r = triple_equiv(T, conjugate(T, random_unitary(2, rng)))
        assert r.equivalent, r.as_dict()
        assert r.residuals["intertwiner"] < 1e-7

    def test_triple_equiv_boundary_points_differ(self):
        a = [np.array([[1.0]]), np.array([[0.0]])]
        b = [np.array([[0.0]]), np.array([[1.0]])]
        assert not triple_equiv(a, b).equivalent

    def test_triple_dimension_mismatch(self, rng):
        r = triple_equiv(random_row_contraction_blocks(1, 1, rng), random_row_contraction_blocks(1, 2, rng))
        assert not r.equivalent and r.reason == "dimensions differ"


class TestSpherical:
    @pytest.mark.derived
    def test_kernel_at_origin(self):
        K = spherical_kernel((1, 0))
        assert np.allclose(K([0, 0], [0, 0]), [[0, 0], [0, 1]])

    def test_example(self, rng):
        for _ in range(3):
            lam = [b[0, 0] for b in spherical_blocks(2, rng)]
            ex = spherical_example(*lam)
            assert ex.agreement < 1e-10 and ex.polynomial < 1e-12
            c = classify_row(ex.T)
            assert (c.cnc, c.strongly_cc, c.cc) == (False, True, True)

    def test_rejects_interior_point(self):
        with pytest.raises(NotOnSphere):
            spherical_example(0.5, 0.5)

    def test_triple_has_empty_X(self):
        tr = characteristic_triple([np.array([[1.0]]), np.array([[0.0]])])
        assert tr.X.size == 0
        assert tr.theta.p == 1 and tr.theta.q == 0

    def test_distinct_points_have_distinct_kernels(self):
        K1, K2 = spherical_kernel((1, 0)), spherical_kernel((0, 1))
        z, w = sample_pairs(2, 1, seed=0)[0]
        assert opnorm(K1(z, w) - K2(z, w)) > 1e-3
