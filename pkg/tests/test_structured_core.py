"""
Tests für den strukturierten Kern (Core-Transformationen, QR, Turnover, Transfer)
"""

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from src.exceptions import CoreIndexError, PoleOnSpectrumError, SingularMatrixError, StructureMismatchError
from src.structured_core import (
    CorePattern,
    CoreTransformation,
    StructureDescriptor,
    TransferDirection,
    Transition,
    apply_core_left,
    apply_core_right,
    assemble,
    classify_shape,
    fuse,
    ordering_from_transitions,
    qr_extended,
    qr_hessenberg,
    rank_profile_lower,
    ShiftedSolver,
    spectral_norm,
    structural_bottom,
    transfer_through,
    turnover,
)

from conftest import complex_normal, random_hessenberg


def random_core(rng, index):
    return CoreTransformation.from_block(index, la.qr(complex_normal(rng, (2, 2)))[0])


def random_shape(rng, n):
    transitions = [Transition.ASCENDING if rng.random() < 0.5 else Transition.DESCENDING
                   for _ in range(n - 2)]
    order = ordering_from_transitions(transitions)
    return CorePattern([random_core(rng, k) for k in order], n), transitions


angles = st.floats(min_value=0.0, max_value=2 * np.pi, allow_nan=False)


class TestCoreTransformation:

    def test_rotation_is_unitary_with_given_first_column(self):
        core = CoreTransformation.rotation(2, 3.0, 4.0j)
        assert np.allclose(core.block.conj().T @ core.block, np.eye(2), atol=1e-15)
        assert np.isclose(core.c, 0.6)
        assert np.isclose(core.s, 0.8j)

    def test_zero_rotation_is_identity(self):
        assert CoreTransformation.rotation(1, 0, 0).is_trivial()

    def test_non_unitary_block_rejected(self):
        with pytest.raises(ValueError):
            CoreTransformation(1, np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_index_must_be_positive(self):
        with pytest.raises(CoreIndexError):
            CoreTransformation.identity(0)

    def test_index_beyond_dimension(self):
        core = CoreTransformation.identity(4)
        with pytest.raises(CoreIndexError):
            core.embed(4)
        with pytest.raises(CoreIndexError):
            apply_core_left(core, np.eye(4))

    def test_zeroing_eliminates_second_entry(self):
        core = CoreTransformation.zeroing(1, 1.0 + 2.0j, -0.5j)
        out = core.adjoint().block @ np.array([1.0 + 2.0j, -0.5j])
        assert abs(out[1]) < 1e-15
        assert np.isclose(abs(out[0]), np.hypot(abs(1 + 2j), 0.5))

    @given(theta=angles, phi=angles, psi=angles)
    @settings(max_examples=50, deadline=None)
    def test_apply_matches_dense_embedding(self, theta, phi, psi):
        rng = np.random.default_rng(7)
        core = CoreTransformation.rotation(2, np.cos(theta) * np.exp(1j * psi), np.sin(theta) * np.exp(1j * phi))
        m = complex_normal(rng, (5, 5))
        dense = core.embed(5)
        assert np.allclose(apply_core_left(core, m), dense @ m, atol=1e-14)
        assert np.allclose(apply_core_right(m, core), m @ dense, atol=1e-14)

    def test_fuse_requires_equal_index(self, rng):
        with pytest.raises(CoreIndexError):
            fuse(random_core(rng, 1), random_core(rng, 2))

    def test_fuse_is_product(self, rng):
        a, b = random_core(rng, 3), random_core(rng, 3)
        assert np.allclose(fuse(a, b).embed(5), a.embed(5) @ b.embed(5), atol=1e-14)


class TestCorePattern:

    def test_dense_and_adjoint(self, rng):
        pattern, _ = random_shape(rng, 6)
        dense = pattern.dense()
        assert np.allclose(pattern.adjoint().dense(), dense.conj().T, atol=1e-14)
        assert np.allclose(dense.conj().T @ dense, np.eye(6), atol=1e-13)

    def test_assemble_is_product(self, rng):
        pattern, _ = random_shape(rng, 5)
        r = np.triu(complex_normal(rng, (5, 5)))
        assert np.allclose(assemble(pattern, r), pattern.dense() @ r, atol=1e-13)

    def test_swap_only_for_commuting_cores(self, rng):
        pattern = CorePattern([random_core(rng, 1), random_core(rng, 3), random_core(rng, 2)], 4)
        swapped = pattern.swap(0)
        assert swapped.indices == [3, 1, 2]
        assert np.allclose(swapped.dense(), pattern.dense(), atol=1e-14)
        with pytest.raises(CoreIndexError):
            pattern.swap(1)


class TestShapes:

    def test_ordering_and_classification(self):
        transitions = [Transition.DESCENDING, Transition.ASCENDING]
        order = ordering_from_transitions(transitions)
        assert order == [3, 1, 2]
        pattern = CorePattern([CoreTransformation.identity(k) for k in order], 4)
        assert classify_shape(pattern).transitions == tuple(transitions)

    def test_hessenberg_and_inv_hessenberg_flags(self):
        desc = CorePattern([CoreTransformation.identity(k) for k in (1, 2, 3, 4)], 5)
        asc = CorePattern([CoreTransformation.identity(k) for k in (4, 3, 2, 1)], 5)
        assert classify_shape(desc).is_hessenberg
        assert classify_shape(asc).is_inv_hessenberg

    def test_classify_rejects_incomplete_pattern(self):
        with pytest.raises(StructureMismatchError):
            classify_shape(CorePattern([CoreTransformation.identity(1)], 4))

    def test_descriptor_blocks(self):
        d = StructureDescriptor((Transition.DESCENDING, Transition.DESCENDING, Transition.ASCENDING), 5)
        blocks = d.blocks()
        assert [(b.transition, b.first_row, b.last_row) for b in blocks] == [
            (Transition.DESCENDING, 1, 4),
            (Transition.ASCENDING, 3, 5),
        ]
        assert d.ascending_positions() == [3]

    def test_descriptor_length_checked(self):
        with pytest.raises(ValueError):
            StructureDescriptor((Transition.DESCENDING,), 5)

    def test_structural_bottom(self):
        assert list(structural_bottom([1, 2, 3], 4)) == [0, 2, 3, 4, 4]
        assert list(structural_bottom([3, 2, 1], 4)) == [0, 4, 4, 4, 4]

    def test_structural_bottom_matches_zero_pattern(self, rng):
        for _ in range(10):
            pattern, _ = random_shape(rng, 7)
            r = np.triu(complex_normal(rng, (7, 7)))
            z = assemble(pattern, r)
            bottom = structural_bottom(pattern.indices, 7)
            for j in range(1, 8):
                assert np.allclose(z[bottom[j]:, j - 1], 0, atol=1e-13)


class TestQR:

    def test_qr_hessenberg_roundtrip(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 51))
            h = random_hessenberg(rng, n)
            pattern, r = qr_hessenberg(h)
            assert pattern.indices == list(range(1, n))
            assert np.allclose(np.tril(r, -1), 0)
            assert spectral_norm(pattern.apply_left(r) - h) < 1e-13 * spectral_norm(h)

    def test_qr_hessenberg_extended(self, rng):
        h = random_hessenberg(rng, 9, 8)
        pattern, r = qr_hessenberg(h)
        assert len(pattern) == 8
        assert spectral_norm(pattern.apply_left(r) - h) < 1e-13 * spectral_norm(h)

    def test_qr_hessenberg_rejects_full_matrix(self, rng):
        with pytest.raises(StructureMismatchError):
            qr_hessenberg(complex_normal(rng, (6, 6)))

    def test_qr_extended_recovers_shape(self, rng):
        for _ in range(20):
            pattern, _ = random_shape(rng, 8)
            r = np.triu(complex_normal(rng, (8, 8))) + 2 * np.eye(8)
            z = assemble(pattern, r)
            found, r2 = qr_extended(z, pattern.indices)
            assert found.indices == pattern.indices
            assert spectral_norm(found.apply_left(r2) - z) < 1e-12 * spectral_norm(z)

    def test_qr_extended_rejects_wrong_shape(self, rng):
        z = complex_normal(rng, (6, 6))
        with pytest.raises(StructureMismatchError):
            qr_extended(z, [1, 2, 3, 4, 5])


class TestTurnover:

    def test_turnover_exactness(self, rng):
        for _ in range(1000):
            g1, g2, g3 = random_core(rng, 1), random_core(rng, 2), random_core(rng, 1)
            before = CorePattern([g1, g2, g3], 3).dense()
            a, b, c = turnover(g1, g2, g3)
            assert (a.index, b.index, c.index) == (2, 1, 2)
            after = CorePattern([a, b, c], 3).dense()
            assert spectral_norm(after - before) < 1e-14

    def test_turnover_deep_index(self, rng):
        g1, g2, g3 = random_core(rng, 4), random_core(rng, 5), random_core(rng, 4)
        out = turnover(g1, g2, g3)
        assert np.allclose(CorePattern(list(out), 8).dense(), CorePattern([g1, g2, g3], 8).dense(),
                           atol=1e-14)

    def test_turnover_rejects_wrong_pattern(self, rng):
        with pytest.raises(CoreIndexError):
            turnover(random_core(rng, 1), random_core(rng, 3), random_core(rng, 1))


class TestTransfer:

    @pytest.mark.parametrize("direction", list(TransferDirection))
    def test_shape_preserved(self, rng, direction):
        for _ in range(20):
            n = int(rng.integers(3, 15))
            pattern, _ = random_shape(rng, n)
            r = np.triu(complex_normal(rng, (n, n))) + 3 * np.eye(n)
            r2, p2 = transfer_through(pattern, r, direction)
            assert p2.indices == pattern.indices
            assert classify_shape(p2) == classify_shape(pattern)
            assert np.allclose(np.tril(r2, -1), 0)
            if direction is TransferDirection.LEFT_TO_RIGHT:
                lhs, rhs = pattern.apply_left(r), p2.apply_right(r2)
            else:
                lhs, rhs = pattern.apply_right(r), p2.apply_left(r2)
            assert spectral_norm(lhs - rhs) < 1e-12 * spectral_norm(lhs)

    def test_singular_triangle_rejected(self, rng):
        pattern, _ = random_shape(rng, 4)
        r = np.triu(complex_normal(rng, (4, 4)))
        r[2, 2] = 0
        with pytest.raises(SingularMatrixError):
            transfer_through(pattern, r)


class TestRankProfile:

    def test_inverse_hessenberg_has_rank_one_lower_blocks(self, rng):
        h = random_hessenberg(rng, 10)
        assert max(rank_profile_lower(la.inv(h))) <= 1

    def test_full_matrix(self, rng):
        z = complex_normal(rng, (6, 6))
        assert rank_profile_lower(z) == [1, 2, 3, 3, 2]


class TestShiftedSolver:

    def test_solve_and_cache(self, rng):
        a = complex_normal(rng, (8, 8))
        x = complex_normal(rng, 8)
        solver = ShiftedSolver(a)
        y = solver.solve(2.0, 1.0, x)
        assert np.allclose((a - 2.0 * np.eye(8)) @ y, x)
        # gleicher projektiver Pol, anders skaliert
        y2 = solver.solve(4.0, 2.0, x)
        assert np.allclose((2.0 * a - 4.0 * np.eye(8)) @ y2, x)
        scale = 0.3 - 1.7j
        y3 = solver.solve(2.0 * scale, scale, x)
        assert np.allclose((scale * a - 2.0 * scale * np.eye(8)) @ y3, x)
        assert solver.factorizations == 1

    def test_adjoint_cached_separately(self, rng):
        a = complex_normal(rng, (6, 6))
        x = complex_normal(rng, 6)
        solver = ShiftedSolver(a)
        y = solver.solve(1j, 1.0, x, adjoint=True)
        assert np.allclose((a.conj().T - 1j * np.eye(6)) @ y, x)
        solver.solve(1j, 1.0, x)
        assert solver.factorizations == 2

    def test_infinite_pole(self, rng):
        x = complex_normal(rng, 5)
        solver = ShiftedSolver(np.eye(5))
        assert np.allclose(solver.solve(2.0, 0.0, x), -x / 2.0)
        assert solver.factorizations == 0

    def test_pole_on_spectrum(self):
        solver = ShiftedSolver(np.diag([1.0, 2.0, 3.0]))
        with pytest.raises(PoleOnSpectrumError):
            solver.solve(2.0, 1.0, np.ones(3))
