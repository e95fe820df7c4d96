"""Harmonic-domain algebra: vectors, Toeplitz operators, synthesis/analysis."""

import numpy as np
import pytest

from hssmmc import (
    HarmonicBlockMatrix,
    HarmonicVector,
    InsufficientSamplesError,
    OrderMismatchError,
    ResidualImaginaryError,
    analyze,
    convolve,
    frequency_matrix,
    synthesize,
    toeplitz,
)
from conftest import random_real_vector

W1 = 314.0


class TestHarmonicVector:
    def test_length_invariant(self):
        hv = HarmonicVector.zeros(3, W1)
        assert hv.coeffs.shape == (7,)
        with pytest.raises(OrderMismatchError):
            HarmonicVector(3, W1, np.zeros(5, dtype=complex))

    def test_indexing(self):
        hv = HarmonicVector.from_dict({0: 1.0, 2: 3.0 - 1j}, 2, W1)
        assert hv[0] == 1.0
        assert hv[2] == 3.0 - 1j
        assert hv[-2] == 0.0
        with pytest.raises(OrderMismatchError):
            hv[3]

    def test_conjugate_symmetry_detection(self):
        rng = np.random.default_rng(1)
        hv = random_real_vector(rng, 4, W1)
        assert hv.is_real_signal()
        broken = HarmonicVector.from_dict({1: 1.0}, 2, W1)
        assert not broken.is_real_signal()

    def test_cosine_constructor(self):
        hv = HarmonicVector.cosine(0.5, -0.4, 2 * np.pi / 3, 3, W1)
        # k=-1 coefficient of 1/2 - 0.4*cos(w t - 2pi/3) with amplitude -0.4
        expected = -0.2 * np.exp(1j * 2 * np.pi / 3)
        assert hv[-1] == pytest.approx(expected, abs=1e-15)
        assert hv[1] == pytest.approx(np.conj(expected), abs=1e-15)

    def test_immutability(self):
        hv = HarmonicVector.zeros(2, W1)
        with pytest.raises(ValueError):
            hv.coeffs[0] = 1.0

    def test_arithmetic_requires_same_grid(self):
        a = HarmonicVector.zeros(2, W1)
        b = HarmonicVector.zeros(3, W1)
        with pytest.raises(OrderMismatchError):
            a + b


class TestToeplitz:
    def test_structure(self):
        rng = np.random.default_rng(2)
        hv = random_real_vector(rng, 3, W1)
        T = toeplitz(hv).matrix
        h = 3
        for i in range(7):
            for j in range(7):
                expected = hv.coeffs[i - j + h] if abs(i - j) <= h else 0.0
                assert T[i, j] == expected

    def test_constant_gives_identity_scaling(self):
        hv = HarmonicVector.constant(2.5, 3, W1)
        assert np.array_equal(toeplitz(hv).matrix, 2.5 * np.eye(7))

    def test_open_loop_index_fixture(self):
        # 1/2 - (m/2)cos(w t): diagonal 1/2, first off-diagonals -m/4.
        m = 0.8
        hv = HarmonicVector.cosine(0.5, -0.5 * m, 0.0, 3, W1)
        T = toeplitz(hv).matrix
        assert np.allclose(np.diag(T), 0.5, atol=1e-15)
        assert np.allclose(np.diag(T, 1), -m / 4, atol=1e-15)
        assert np.allclose(np.diag(T, -1), -m / 4, atol=1e-15)
        assert np.allclose(np.diag(T, 2), 0.0, atol=1e-15)

    def test_product_matches_time_domain(self):
        # cos * cos = 1/2 + cos(2 w t)/2
        c = HarmonicVector.cosine(0.0, 1.0, 0.0, 3, W1)
        out = toeplitz(c) @ c
        assert out[0] == pytest.approx(0.5, abs=1e-15)
        assert out[2] == pytest.approx(0.25, abs=1e-15)
        assert out[-2] == pytest.approx(0.25, abs=1e-15)
        assert out[1] == pytest.approx(0.0, abs=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = random_real_vector(rng, 3, W1)
            b = random_real_vector(rng, 3, W1)
            alpha, beta = rng.normal(size=2)
            lhs = toeplitz(alpha * a + beta * b).matrix
            rhs = alpha * toeplitz(a).matrix + beta * toeplitz(b).matrix
            assert np.allclose(lhs, rhs, atol=1e-12)


class TestFrequencyMatrix:
    def test_values(self):
        q = frequency_matrix(1, W1)
        assert np.array_equal(q.diagonal, np.array([-314j, 0.0, 314j]))

    def test_dc_only(self):
        q = frequency_matrix(0, W1)
        assert q.matrix.shape == (1, 1)
        assert q.matrix[0, 0] == 0.0

    def test_linear_in_k(self):
        q = frequency_matrix(3, W1)
        assert q.diagonal[0] == -3j * W1
        assert q.diagonal[-1] == 3j * W1

    def test_purely_imaginary_and_antisymmetric(self):
        q = frequency_matrix(5, W1)
        assert np.all(q.diagonal.real == 0.0)
        assert np.array_equal(q.diagonal, -q.diagonal[::-1])


class TestSynthesize:
    def test_known_values(self):
        hv = HarmonicVector.from_dict({0: 1.0, 1: 0.5, -1: 0.5}, 1, W1)
        assert synthesize(hv, 0.0) == pytest.approx(2.0)
        assert synthesize(hv, np.pi / W1) == pytest.approx(0.0, abs=1e-12)

    def test_sine_peak(self):
        hv = HarmonicVector.from_dict({2: -0.5j, -2: 0.5j}, 2, W1)
        assert synthesize(hv, np.pi / (4 * W1)) == pytest.approx(1.0)

    def test_rejects_non_real(self):
        hv = HarmonicVector.from_dict({1: 1.0}, 1, W1)
        with pytest.raises(ResidualImaginaryError):
            synthesize(hv, 0.1)

    def test_vectorized(self):
        rng = np.random.default_rng(4)
        hv = random_real_vector(rng, 3, W1)
        ts = np.linspace(0.0, 0.02, 17)
        vals = synthesize(hv, ts)
        assert vals.shape == ts.shape
        assert vals[3] == pytest.approx(synthesize(hv, ts[3]))


class TestAnalyze:
    def test_constant(self):
        hv = analyze(np.full(64, 5.0), 3, W1)
        assert hv[0] == pytest.approx(5.0)
        assert np.allclose(np.delete(hv.coeffs, 3), 0.0, atol=1e-12)

    def test_cosine(self):
        T = 2 * np.pi / W1
        t = np.arange(64) * T / 64
        hv = analyze(np.cos(W1 * t), 3, W1)
        assert hv[1] == pytest.approx(0.5, abs=1e-10)
        assert hv[-1] == pytest.approx(0.5, abs=1e-10)
        assert abs(hv[0]) < 1e-10 and abs(hv[2]) < 1e-10

    def test_roundtrip_property(self):
        rng = np.random.default_rng(5)
        T = 2 * np.pi / W1
        for _ in range(25):
            h = rng.integers(1, 6)
            hv = random_real_vector(rng, int(h), W1)
            n = 4 * (2 * int(h) + 1) + int(rng.integers(0, 40))
            t = np.arange(n) * T / n
            back = analyze(synthesize(hv, t), int(h), W1)
            assert np.max(np.abs(back.coeffs - hv.coeffs)) < 1e-9

    def test_offset_start_time(self):
        rng = np.random.default_rng(6)
        hv = random_real_vector(rng, 3, W1)
        T = 2 * np.pi / W1
        t0 = 0.4321 * T
        t = t0 + np.arange(80) * T / 80
        back = analyze(synthesize(hv, t), 3, W1, t0=t0)
        assert np.max(np.abs(back.coeffs - hv.coeffs)) < 1e-9

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesError):
            analyze(np.zeros(27), 3, W1)


class TestConvolve:
    def test_identity_element(self):
        rng = np.random.default_rng(7)
        b = random_real_vector(rng, 3, W1)
        one = HarmonicVector.constant(1.0, 3, W1)
        out = convolve(one, b)
        assert np.allclose(out.coeffs, b.coeffs, atol=1e-15)

    def test_commutativity(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = random_real_vector(rng, 4, W1)
            b = random_real_vector(rng, 4, W1)
            ab = convolve(a, b)
            ba = convolve(b, a)
            assert np.allclose(ab.coeffs, ba.coeffs, atol=1e-12)

    def test_cosine_squared(self):
        c = HarmonicVector.cosine(0.0, 1.0, 0.0, 3, W1)
        cc = convolve(c, c)
        assert cc[0] == pytest.approx(0.5, abs=1e-15)
        assert cc[2] == pytest.approx(0.25, abs=1e-15)

    def test_matches_toeplitz_route(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = random_real_vector(rng, 3, W1)
            b = random_real_vector(rng, 3, W1)
            direct = convolve(a, b)
            via_matrix = toeplitz(a) @ b
            assert np.allclose(direct.coeffs, via_matrix.coeffs, atol=1e-12)

    def test_order_mismatch(self):
        with pytest.raises(OrderMismatchError):
            convolve(HarmonicVector.zeros(2, W1), HarmonicVector.zeros(3, W1))

    def test_synthesis_consistency_band_limited(self):
        # Exact when bandwidth(a) + bandwidth(b) <= h.
        rng = np.random.default_rng(10)
        h = 7
        a = random_real_vector(rng, 3, W1).truncate(h)
        b = random_real_vector(rng, 3, W1).truncate(h)
        ab = convolve(a, b)
        for t in rng.uniform(0, 0.02, size=10):
            assert synthesize(ab, t) == pytest.approx(
                synthesize(a, t) * synthesize(b, t), rel=1e-9, abs=1e-9
            )

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(11)
        a = random_real_vector(rng, 4, W1)
        b = random_real_vector(rng, 4, W1)
        assert convolve(a, b).is_real_signal()
        assert (toeplitz(a) @ b).is_real_signal()
        # Differentiation keeps the signal real.
        assert a.derivative().is_real_signal()


class TestHarmonicBlockMatrix:
    def test_roundtrip(self):
        rng = np.random.default_rng(12)
        blk = HarmonicBlockMatrix(["x", "y"], ["u", "v"], 2)
        m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        blk.set_block("y", "u", m)
        assert np.array_equal(blk.get_block("y", "u"), m)
        assert np.array_equal(blk.get_block("x", "v"), np.zeros((5, 5)))

    def test_assembled_dimension(self):
        blk = HarmonicBlockMatrix(["a", "b", "c"], ["u"], 3)
        assert blk.shape == (21, 7)

    def test_dense_placement(self):
        blk = HarmonicBlockMatrix(["a", "b"], ["a", "b"], 1)
        blk.set_block("b", "a", np.eye(3))
        dense = blk.dense
        assert np.array_equal(dense[3:6, 0:3], np.eye(3))
        assert np.count_nonzero(dense) == 3

    def test_unknown_label(self):
        blk = HarmonicBlockMatrix(["a"], ["a"], 1)
        with pytest.raises(KeyError):
            blk.get_block("a", "zz")
