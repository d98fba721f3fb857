"""
Tests für das biorthogonale Orakel (LR-Zerlegung, schiefe Projektionen)
"""

import numpy as np
import pytest
import scipy.linalg as la
from scipy.stats import unitary_group

from src.biorthogonal_oracle import (
    biorthogonalize,
    build_oracle,
    dual_inv_hessenberg,
    lr_decompose,
    oblique_pencil,
    oblique_single,
    unitary_structure_ranks,
    validate_oblique_structure,
)
from src.exceptions import BreakdownError, StructureMismatchError
from src.pencils import ProjectivePole, cycle_poles, parse_pole_list, poles_for_extended_space
from src.rational_arnoldi import rational_arnoldi
from src.rational_lanczos import recover_poles_sub, recover_poles_super
from src.structured_core import BreakdownKind, rank_profile_lower, spectral_norm

from conftest import complex_normal, random_hessenberg, separated_spectrum_matrix


@pytest.fixture
def oracle(rng):
    a = separated_spectrum_matrix(rng, 30)
    poles_k = cycle_poles(parse_pole_list("2.5i,15+3i,inf"), 6)
    poles_l = cycle_poles(parse_pole_list("1+2i,inf,20-1i"), 6)
    result = build_oracle(a, complex_normal(rng, 30), complex_normal(rng, 30), poles_k, poles_l, 6)
    return a, poles_k, poles_l, result


class TestLRDecompose:

    def test_factors(self, rng):
        m = complex_normal(rng, (6, 6))
        lr = lr_decompose(m)
        assert lr.complete
        assert np.allclose(np.diag(lr.L), 1.0)
        assert np.allclose(np.triu(lr.L, 1), 0.0)
        assert np.allclose(np.tril(lr.R, -1), 0.0)
        assert spectral_norm(lr.L @ lr.R - m) < 1e-12 * spectral_norm(m)

    def test_singular_leading_minor(self):
        m = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        lr = lr_decompose(m)
        assert not lr.complete
        assert lr.completed_size == 1
        assert lr.L.shape == (1, 1)

    def test_brute_force_leading_minors(self):
        """completed_size stimmt mit dem ersten singulären Hauptminor überein."""
        rng = np.random.default_rng(11)
        for _ in range(40):
            size = int(rng.integers(2, 11))
            lower = np.eye(size) + 0.2 * np.tril(complex_normal(rng, (size, size)), -1)
            upper = 0.2 * np.triu(complex_normal(rng, (size, size)), 1)
            upper += np.diag(rng.uniform(1.0, 2.0, size) * np.exp(2j * np.pi * rng.random(size)))
            if rng.random() < 0.8:
                k = int(rng.integers(0, size))
                upper[k, k] = 0.0
            m = lower @ upper
            expected = size
            for j in range(1, size + 1):
                minor = m[:j, :j]
                hadamard = np.prod(np.linalg.norm(minor, axis=1))
                if abs(np.linalg.det(minor)) <= 1e-10 * hadamard:
                    expected = j - 1
                    break
            assert lr_decompose(m).completed_size == expected

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError):
            lr_decompose(np.ones((3, 2)))


class TestBiorthogonalize:

    def test_biorthogonal_and_nested(self, rng):
        vhat = complex_normal(rng, (12, 5))
        what = complex_normal(rng, (12, 5))
        pair = biorthogonalize(vhat, what)
        assert pair.breakdown is None
        assert pair.size == 5
        assert pair.biorthogonality_defect() < 1e-10
        # V = V̂·R^{-1} mit oberer Dreiecksmatrix: gleiche geschachtelte Räume
        assert np.allclose(pair.V @ pair.lr.R, vhat)

    def test_serious_breakdown(self):
        m = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        vhat = np.eye(6)[:, :3]
        what = np.zeros((6, 3))
        what[:3, :] = m.conj().T
        pair = biorthogonalize(vhat, what)
        assert pair.size == 1
        assert pair.breakdown.kind is BreakdownKind.SERIOUS
        assert pair.breakdown.step == 2

    def test_orthogonal_start_vectors(self):
        e = np.eye(4)
        with pytest.raises(BreakdownError):
            biorthogonalize(e[:, :1], e[:, 1:2])

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            biorthogonalize(complex_normal(rng, (6, 3)), complex_normal(rng, (6, 2)))


class TestObliqueProjection:

    def test_oracle_pencil(self, oracle):
        a, poles_k, _, result = oracle
        assert result.breakdown is None
        assert result.n == 6
        assert result.pair.biorthogonality_defect() < 1e-8
        recovered = recover_poles_sub(result.pencil)
        assert all(p.cross_ratio_error(q) < 1e-8 for p, q in zip(recovered, poles_k))

    def test_pencil_reproduces_projection(self, oracle):
        a, _, _, result = oracle
        z = result.pair.W.conj().T @ a @ result.pair.V
        s, t = result.pencil.dense_S(), result.pencil.dense_T()
        assert spectral_norm(z @ s - t) < 1e-9 * spectral_norm(a) * spectral_norm(s)

    def test_structure_of_projection(self, oracle):
        a, _, _, result = oracle
        z = oblique_single(a, result.pair)
        assert z.shape == (7, 7)
        validate_oblique_structure(z, result.pair.poles_k, result.pair.poles_l)

    def test_dense_matrix_fails_structure(self, rng):
        z = complex_normal(rng, (6, 6))
        poles = cycle_poles(parse_pole_list("inf"), 5)
        with pytest.raises(StructureMismatchError):
            validate_oblique_structure(z, poles, poles)

    def test_too_few_poles(self, rng):
        with pytest.raises(ValueError):
            validate_oblique_structure(complex_normal(rng, (5, 5)), parse_pole_list("inf"), parse_pole_list("inf"))

    def test_pencil_needs_two_columns(self, rng):
        a = separated_spectrum_matrix(rng, 10)
        v = complex_normal(rng, 10)
        dec = rational_arnoldi(a, v, parse_pole_list("1i"))
        pair = biorthogonalize(dec.V[:, :1], complex_normal(rng, (10, 1)))
        with pytest.raises(ValueError):
            oblique_pencil(a, pair, dec)

    def test_dual_side_inv_hessenberg(self, oracle):
        _, _, _, result = oracle
        inverse = dual_inv_hessenberg(result.dec_W, 6)
        assert max(rank_profile_lower(inverse.H_inv, 1e-10)) <= 1
        assert max(rank_profile_lower(inverse.K_inv, 1e-10)) <= 1
        h, k = result.dec_W.Hext[:6, :6], result.dec_W.Kext[:6, :6]
        z = np.linalg.solve(k.T, h.T).T
        z_inv = np.linalg.solve(inverse.K_inv.T, inverse.H_inv.T).T
        assert spectral_norm(z - z_inv) < 1e-9 * spectral_norm(z)

    def test_mismatched_dual_poles(self, oracle):
        a, _, _, result = oracle
        w = result.dec_W.V[:, 0]
        other = rational_arnoldi(a.conj().T, w, parse_pole_list(",".join(["inf"] * 6)))
        with pytest.raises(StructureMismatchError):
            oblique_pencil(a, result.pair, result.dec_V, other)

    def test_hermitian_limit(self, rng):
        basis = unitary_group.rvs(14, random_state=3)
        a = basis @ np.diag(np.arange(1.0, 15.0)) @ basis.conj().T
        a = (a + a.conj().T) / 2
        v = complex_normal(rng, 14)
        poles = cycle_poles(parse_pole_list("7.5,inf"), 6)
        result = build_oracle(a, v, v, poles, poles, 6)
        assert result.breakdown is None
        pair = result.pair
        assert spectral_norm(pair.V - pair.W) < 1e-8
        # letzter Pol unendlich: T_n·S_n^{-1} = W_n^H A V_n, hier hermitesch
        lead = result.pencil.leading(6)
        z = np.linalg.solve(lead.dense_S().T, lead.dense_T().T).T
        assert spectral_norm(z - z.conj().T) < 1e-8 * spectral_norm(z)
        projected = pair.W[:, :6].conj().T @ a @ pair.V[:, :6]
        assert spectral_norm(z - projected) < 1e-8 * spectral_norm(a)
        sup = recover_poles_super(result.pencil)
        assert all(p.cross_ratio_error(q) < 1e-8 for p, q in zip(sup, poles))

    def test_extended_space_structure(self, rng):
        """K mit Potenzen 0,1,2,3,4,-1,5,-2 und L (zu A^H) mit 0,-1,1,-2,-3,-4,2,3."""
        a = separated_spectrum_matrix(rng, 10)
        poles_k = poles_for_extended_space([0, 1, 2, 3, 4, -1, 5, -2])
        poles_l = poles_for_extended_space([0, -1, 1, -2, -3, -4, 2, 3])
        dec_v = rational_arnoldi(a, complex_normal(rng, 10), poles_k)
        dec_w = rational_arnoldi(a.conj().T, complex_normal(rng, 10), poles_l)
        pair = biorthogonalize(dec_v.V, dec_w.V, dec_v.poles, dec_w.poles)
        assert pair.size == 8
        assert pair.breakdown is None
        z = oblique_single(a, pair, validate=True)
        # A·v liegt in span{v, A v}
        assert la.norm(z[2:, 0]) < 1e-8 * spectral_norm(z)


class TestUnitaryStructure:

    def test_unitary_projection_has_rank_one_blocks(self):
        u = unitary_group.rvs(20, random_state=7)
        dec = rational_arnoldi(u, np.ones(20), parse_pole_list(",".join(["inf"] * 9)))
        ranks = unitary_structure_ranks(dec.projection(u))
        assert max(ranks) <= 1

    @pytest.mark.parametrize("seed", range(10))
    def test_unitary_rank_one_blocks(self, seed):
        u = unitary_group.rvs(12, random_state=seed)
        v = complex_normal(np.random.default_rng(seed), 12)
        dec = rational_arnoldi(u, v, parse_pole_list(",".join(["inf"] * 9)))
        assert max(unitary_structure_ranks(dec.projection(u))) <= 1

    @pytest.mark.parametrize("seed", range(10))
    def test_bidiagonal_pencil(self, seed):
        """Unitäre Matrix, v = w, Xi nur unendlich, Psi nur 0: T unten, S oben bidiagonal."""
        u = unitary_group.rvs(12, random_state=100 + seed)
        v = complex_normal(np.random.default_rng(seed), 12)
        n = 8
        result = build_oracle(u, v, v, [ProjectivePole.infinity()] * n, [ProjectivePole.zero()] * n, n,
                              free_pole=ProjectivePole.zero())
        assert result.breakdown is None
        t, s = result.pencil.dense_T(), result.pencil.dense_S()
        assert la.norm(np.triu(t, 1)) < 1e-10 * la.norm(t)
        assert la.norm(np.tril(s, -1)) < 1e-10 * la.norm(s)
        pair = result.pair
        residual = spectral_norm(pair.W.conj().T @ u @ pair.V @ s - t)
        assert residual < 1e-10 * spectral_norm(s)

    def test_general_hessenberg_exceeds(self, rng):
        assert max(unitary_structure_ranks(random_hessenberg(rng, 8))) > 1


class TestBuildOracle:

    def test_orthogonal_start_vectors(self, rng):
        a = separated_spectrum_matrix(rng, 8)
        e = np.eye(8)
        with pytest.raises(BreakdownError):
            build_oracle(a, e[:, 0], e[:, 1], parse_pole_list("inf,inf"), parse_pole_list("inf,inf"), 2)

    def test_too_few_poles(self, rng):
        a = separated_spectrum_matrix(rng, 8)
        with pytest.raises(ValueError):
            build_oracle(a, np.ones(8), np.ones(8), parse_pole_list("inf"), parse_pole_list("inf,inf"), 2)
