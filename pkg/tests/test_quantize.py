"""Scalar quantization: reconstruction error and distance-order fidelity."""

import numpy as np

from gridann.quantize import LEVELS, dequantize, quantize_vectors


class TestRoundTrip:
    def test_extremes_exact(self):
        """Per-dimension min and max reconstruct exactly (codes 0 and 255)."""
        rng = np.random.default_rng(0)
        vecs = rng.normal(size=(500, 8)).astype(np.float32)
        cb, codes = quantize_vectors(vecs)
        lo_rows = vecs.argmin(axis=0)
        hi_rows = vecs.argmax(axis=0)
        recon = dequantize(cb, codes)
        for d in range(8):
            assert codes[lo_rows[d], d] == 0
            assert codes[hi_rows[d], d] == LEVELS - 1
            np.testing.assert_allclose(recon[lo_rows[d], d], vecs[lo_rows[d], d],
                                       rtol=1e-6)
            np.testing.assert_allclose(recon[hi_rows[d], d], vecs[hi_rows[d], d],
                                       rtol=1e-6)

    def test_error_bounded_by_half_step(self):
        rng = np.random.default_rng(1)
        vecs = (rng.random((300, 16)) * 10 - 5).astype(np.float32)
        cb, codes = quantize_vectors(vecs)
        recon = dequantize(cb, codes)
        half_step = cb.scale.astype(np.float64) / 2
        err = np.abs(recon.astype(np.float64) - vecs.astype(np.float64))
        assert np.all(err <= half_step + 1e-5)

    def test_constant_dimension(self):
        vecs = np.column_stack([np.full(50, 3.0), np.arange(50.0)])
        cb, codes = quantize_vectors(vecs.astype(np.float32))
        assert cb.scale[0] == 0.0
        assert np.all(codes[:, 0] == 0)
        recon = dequantize(cb, codes)
        np.testing.assert_allclose(recon[:, 0], 3.0)

    def test_codes_dtype_and_shape(self):
        vecs = np.random.default_rng(2).random((10, 4)).astype(np.float32)
        cb, codes = quantize_vectors(vecs)
        assert codes.dtype == np.uint8
        assert codes.shape == (10, 4)
        assert cb.dim == 4
        assert codes.flags.c_contiguous

    def test_single_vector(self):
        cb, codes = quantize_vectors(np.array([[1.5, -2.0]], dtype=np.float32))
        assert np.all(codes == 0)
        np.testing.assert_allclose(dequantize(cb, codes),
                                   [[1.5, -2.0]], rtol=1e-6)


class TestOrderFidelity:
    def test_pairwise_order_mostly_preserved(self):
        """Quantized distances agree with exact distances on at least 95%
        of random pairs whose exact distances are well separated."""
        rng = np.random.default_rng(3)
        vecs = rng.normal(size=(2000, 64)).astype(np.float32)
        cb, codes = quantize_vectors(vecs)
        recon = dequantize(cb, codes).astype(np.float64)
        exact = vecs.astype(np.float64)
        q = exact[rng.integers(0, 2000)]
        agree = total = 0
        for _ in range(1000):
            i, j = rng.integers(0, 2000, size=2)
            di = np.sum((exact[i] - q) ** 2)
            dj = np.sum((exact[j] - q) ** 2)
            if abs(di - dj) < 0.05 * max(di, dj, 1e-12):
                continue  # too close to call either way
            qi = np.sum((recon[i] - q) ** 2)
            qj = np.sum((recon[j] - q) ** 2)
            total += 1
            if (di < dj) == (qi < qj):
                agree += 1
        assert total > 700
        assert agree / total >= 0.95

    def test_exact_rerank_fixes_order(self):
        """Distances on reconstructed vectors stay within the error budget
        implied by the per-dimension step size."""
        rng = np.random.default_rng(4)
        vecs = rng.random((100, 8)).astype(np.float32)
        cb, codes = quantize_vectors(vecs)
        recon = dequantize(cb, codes).astype(np.float64)
        q = rng.random(8)
        d_exact = np.sum((vecs.astype(np.float64) - q) ** 2, axis=1)
        d_quant = np.sum((recon - q) ** 2, axis=1)
        # |sqrt(d_quant) - sqrt(d_exact)| <= ||recon - vec|| <= half-step norm
        budget = np.linalg.norm(cb.scale.astype(np.float64) / 2)
        gap = np.abs(np.sqrt(d_quant) - np.sqrt(d_exact))
        assert np.all(gap <= budget + 1e-5)
