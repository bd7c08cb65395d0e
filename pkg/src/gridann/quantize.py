"""8-bit per-dimension affine scalar quantization.

Each dimension is mapped to codes 0..255 over its own [min, max] range;
dequantization is min + scale * code.  Traversal computes query-to-code
distances by dequantizing on the fly, while the final rerank always re-scores
with the original float vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEVELS = 256


@dataclass
class Codebook:
    """Per-dimension affine parameters: value = vmin + scale * code."""

    vmin: np.ndarray   # (dim,) float32
    scale: np.ndarray  # (dim,) float32, 0 for constant dimensions

    @property
    def dim(self) -> int:
        return len(self.vmin)


def quantize_vectors(vectors: np.ndarray) -> tuple[Codebook, np.ndarray]:
    """Codebook plus (n, dim) uint8 codes for a float32 vector matrix."""
    vectors = np.asarray(vectors, dtype=np.float32)
    vmin = vectors.min(axis=0)
    vmax = vectors.max(axis=0)
    span = (vmax - vmin).astype(np.float64)
    scale = span / (LEVELS - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = (vectors.astype(np.float64) - vmin) / scale
    norm[:, scale == 0] = 0.0
    codes = np.clip(np.round(norm), 0, LEVELS - 1).astype(np.uint8)
    cb = Codebook(vmin=vmin.astype(np.float32),
                  scale=scale.astype(np.float32))
    return cb, np.ascontiguousarray(codes)


def dequantize(codebook: Codebook, codes: np.ndarray) -> np.ndarray:
    """Reconstructed float32 vectors for a block of codes."""
    return (codebook.vmin + codebook.scale *
            codes.astype(np.float32)).astype(np.float32)
