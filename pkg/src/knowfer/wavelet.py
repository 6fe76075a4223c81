"""Orthonormal Haar wavelet packet transform of patch vectors.

A patch is decomposed per channel over its spatial window into equal-size
frequency bands, lowest frequency first. For the default 2x2 window the four
bands are, per channel:

    LL = (p00 + p01 + p10 + p11) / 2
    LH = (p00 - p01 + p10 - p11) / 2
    HL = (p00 + p01 - p10 - p11) / 2
    HH = (p00 - p01 - p10 + p11) / 2

The transform is orthonormal, so the full band set is a rotation of the
patch: energy is preserved and full-band cosine similarity equals the
similarity of the raw patches. That equivalence is what makes truncated-band
matching an approximation with an exact mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, ParameterError, UnsupportedWindowError
from .tensor import PatchSpec


@dataclass(frozen=True)
class WaveletPacket:
    """Per-band components of one patch, each of length C, low frequency first."""

    components: tuple[np.ndarray, ...]
    window_h: int
    window_w: int
    channels: int

    @property
    def band_count(self) -> int:
        return len(self.components)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _sequency_basis(n: int) -> np.ndarray:
    """Rows of the full-depth 1D Haar packet basis, ordered by frequency.

    Full-depth recursion of orthonormal Haar pair averaging/differencing
    equals the normalized Hadamard transform; frequency order is the number
    of sign changes per basis row (0..n-1, all distinct).
    """
    h = np.ones((1, 1), dtype=np.float64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    changes = np.count_nonzero(np.diff(np.sign(h), axis=1), axis=1)
    return h[np.argsort(changes, kind="stable")] / np.sqrt(n)


@lru_cache(maxsize=None)
def _band_order(window_h: int, window_w: int) -> tuple[tuple[int, int], ...]:
    pairs = [(fy, fx) for fy in range(window_h) for fx in range(window_w)]
    return tuple(sorted(pairs, key=lambda p: (p[0] + p[1], p[0], p[1])))


def _check_window(spec: PatchSpec):
    if not (_is_pow2(spec.window_h) and _is_pow2(spec.window_w)):
        raise UnsupportedWindowError(
            f"window {spec.window_h}x{spec.window_w} is not a power of two per axis"
        )


def wpt_matrix(vectors: np.ndarray, spec: PatchSpec, channels: int) -> np.ndarray:
    """Transform (N, D) patch rows into band-major rows of the same shape.

    Output row layout is [band 0 channels..., band 1 channels...], bands
    ordered by total frequency then (fy, fx) scan order, matching
    `WaveletPacket.components`.
    """
    _check_window(spec)
    d = spec.vector_length(channels)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != d:
        raise DimensionError(
            f"expected (N, {d}) patch rows, got shape {vectors.shape}"
        )
    hy = _sequency_basis(spec.window_h)
    hx = _sequency_basis(spec.window_w)
    blocks = vectors.reshape(-1, channels, spec.window_h, spec.window_w)
    coeffs = np.einsum("ai,ncij,bj->ncab", hy, blocks, hx, optimize=True)
    order = _band_order(spec.window_h, spec.window_w)
    bands = np.stack([coeffs[:, :, fy, fx] for fy, fx in order], axis=1)  # (N, B, C)
    return bands.reshape(vectors.shape[0], -1)


def haar_wpt(patch: np.ndarray, spec: PatchSpec, channels: int) -> WaveletPacket:
    """Decompose one patch vector into its wavelet packet."""
    row = wpt_matrix(np.asarray(patch).reshape(1, -1), spec, channels)[0]
    comps = tuple(row[i * channels : (i + 1) * channels].copy()
                  for i in range(spec.window_h * spec.window_w))
    return WaveletPacket(comps, spec.window_h, spec.window_w, channels)


def partial_band_vector(packet: WaveletPacket, m: int) -> np.ndarray:
    """Concatenate the first m bands (length m*C).

    m equal to the band count yields an orthonormal rotation of the patch.
    """
    if not 1 <= m <= packet.band_count:
        raise ParameterError(
            f"band count m={m} out of range 1..{packet.band_count}"
        )
    return np.concatenate(packet.components[:m])


def inverse_haar_wpt(packet: WaveletPacket) -> np.ndarray:
    """Rebuild the original patch vector from a full packet."""
    wh, ww, c = packet.window_h, packet.window_w, packet.channels
    if packet.band_count != wh * ww:
        raise DimensionError(
            f"packet has {packet.band_count} bands, expected {wh * ww}"
        )
    order = _band_order(wh, ww)
    coeffs = np.zeros((c, wh, ww), dtype=np.float64)
    for comp, (fy, fx) in zip(packet.components, order):
        comp = np.asarray(comp, dtype=np.float64).reshape(-1)
        if comp.shape[0] != c:
            raise DimensionError(f"band length {comp.shape[0]} != channels {c}")
        coeffs[:, fy, fx] = comp
    hy = _sequency_basis(wh)
    hx = _sequency_basis(ww)
    blocks = np.einsum("ia,cab,jb->cij", hy.T, coeffs, hx.T, optimize=True)
    return blocks.reshape(-1)
