"""Feature maps, sliding-window patch extraction, and overlap-aware reassembly.

A feature map is a C x H x W grid of finite float32 scalars; RGB images are
the C=3 case with values in [0, 1]. Patches are flattened channel-major
(c, y, x), so every downstream consumer (similarity, wavelet bands, swaps)
shares one canonical layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, DimensionError


@dataclass(frozen=True)
class FeatureMap:
    """Immutable C x H x W scalar grid.

    Args:
        data: array of shape (C, H, W); copied and stored as float32.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise DimensionError(f"feature map must be (C, H, W), got shape {arr.shape}")
        if arr.size == 0:
            raise DimensionError(f"feature map has an empty axis: shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DimensionError("feature map contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchSpec:
    """Sliding-window geometry: window_h x window_w window, step `stride`."""

    window_h: int
    window_w: int
    stride: int

    def __post_init__(self):
        if self.window_h < 1 or self.window_w < 1:
            raise DimensionError(
                f"window must be positive, got {self.window_h}x{self.window_w}"
            )
        if self.stride < 1:
            raise DimensionError(f"stride must be >= 1, got {self.stride}")

    def vector_length(self, channels: int) -> int:
        return self.window_h * self.window_w * channels


@dataclass(frozen=True)
class Patch:
    """One extracted window: flattened channel-major vector plus its origin."""

    vector: np.ndarray
    origin_y: int
    origin_x: int

    def __post_init__(self):
        object.__setattr__(
            self, "vector", np.asarray(self.vector, dtype=np.float32).reshape(-1)
        )


def grid_positions(
    length: int, window: int, stride: int, flush_end: bool = False
) -> np.ndarray:
    """Window start offsets along one axis: 0, stride, 2*stride, ...

    Positions overhanging the axis are dropped. With `flush_end`, one final
    window flush against the far edge is appended when the regular grid
    leaves a margin, so translation can guarantee full coverage.
    """
    if window > length:
        raise DimensionError(f"window {window} larger than axis length {length}")
    last = length - window
    positions = list(range(0, last + 1, stride))
    if flush_end and positions[-1] != last:
        positions.append(last)
    return np.asarray(positions, dtype=np.int64)


def patch_matrix(
    fmap: FeatureMap, spec: PatchSpec, flush_end: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Extract all windows as one (N, D) float32 matrix.

    Returns:
        vectors: (N, D) matrix, rows in row-major scan order of the window grid.
        origins: (N, 2) int64 matrix of (y, x) window corners.
    """
    c, h, w = fmap.data.shape
    ys = grid_positions(h, spec.window_h, spec.stride, flush_end)
    xs = grid_positions(w, spec.window_w, spec.stride, flush_end)
    # windows[c, y, x, i, j] == data[c, y+i, x+j]
    windows = np.lib.stride_tricks.sliding_window_view(
        fmap.data, (spec.window_h, spec.window_w), axis=(1, 2)
    )
    sub = windows[:, ys][:, :, xs]  # (C, ny, nx, W_h, W_w)
    vectors = np.ascontiguousarray(
        sub.transpose(1, 2, 0, 3, 4).reshape(len(ys) * len(xs), -1)
    )
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    origins = np.stack([yy.reshape(-1), xx.reshape(-1)], axis=1)
    return vectors, origins


def extract_patches(fmap: FeatureMap, spec: PatchSpec) -> list[Patch]:
    """Cut every window of `spec` from `fmap`, row-major scan order.

    Count is (floor((H-W_h)/W_s)+1) * (floor((W-W_w)/W_s)+1); positions that
    would overhang the map are dropped, never padded. Each patch owns a copy
    of its values.
    """
    vectors, origins = patch_matrix(fmap, spec)
    return [
        Patch(vector=vectors[i], origin_y=int(origins[i, 0]), origin_x=int(origins[i, 1]))
        for i in range(vectors.shape[0])
    ]


def assemble_patches(
    patches: list[Patch], spec: PatchSpec, channels: int, height: int, width: int
) -> FeatureMap:
    """Blend patches back into a map, averaging wherever windows overlap.

    Every output cell must be covered by at least one patch; a stride gap
    raises CoverageError naming the first uncovered (y, x).
    """
    vectors = np.stack([p.vector for p in patches]) if patches else np.zeros((0, 0))
    origins = np.asarray([(p.origin_y, p.origin_x) for p in patches], dtype=np.int64)
    data = assemble_matrix(vectors, origins, spec, channels, height, width)
    return FeatureMap(data)


def assemble_matrix(
    vectors: np.ndarray,
    origins: np.ndarray,
    spec: PatchSpec,
    channels: int,
    height: int,
    width: int,
) -> np.ndarray:
    """Matrix-form assembly shared by `assemble_patches` and translation."""
    d = spec.vector_length(channels)
    if vectors.ndim != 2 or (vectors.shape[0] and vectors.shape[1] != d):
        raise DimensionError(
            f"patch vectors must have length {d}, got shape {vectors.shape}"
        )
    acc = np.zeros((channels, height, width), dtype=np.float64)
    cover = np.zeros((height, width), dtype=np.int64)
    blocks = vectors.reshape(-1, channels, spec.window_h, spec.window_w)
    for i in range(blocks.shape[0]):
        y, x = int(origins[i, 0]), int(origins[i, 1])
        if y < 0 or x < 0 or y + spec.window_h > height or x + spec.window_w > width:
            raise DimensionError(
                f"patch at (y={y}, x={x}) exceeds target {height}x{width}"
            )
        acc[:, y : y + spec.window_h, x : x + spec.window_w] += blocks[i]
        cover[y : y + spec.window_h, x : x + spec.window_w] += 1
    uncovered = np.argwhere(cover == 0)
    if uncovered.size:
        y, x = uncovered[0]
        raise CoverageError(int(y), int(x))
    return (acc / cover[None, :, :]).astype(np.float32)
