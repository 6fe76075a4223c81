"""Knowledge libraries: build, de-redundantize, persist, and activate.

A library is an immutable set of patch records with full provenance (which
source map, which window) built from one task's image set. A Gpkl bundles
several named libraries and activates one at a time; switching never
recomputes anything.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionError,
    EmptyLibraryError,
    FormatError,
    LibraryLookupError,
    ParameterError,
)
from .similarity import normalize_rows
from .tensor import FeatureMap, PatchSpec, patch_matrix

GPKL_MAGIC = b"GPKL"
GPKL_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = _FNV_OFFSET
    # tolist() turns the buffer into plain ints once, which roughly halves
    # the per-byte interpreter cost versus iterating the bytes object.
    for b in np.frombuffer(data, dtype=np.uint8).tolist():
        h = ((h ^ b) * _FNV_PRIME) & _U64_MASK
    return h


@dataclass(frozen=True)
class Provenance:
    """Where a record's window was cut from."""

    image_id: int
    origin_y: int
    origin_x: int
    map_h: int
    map_w: int


@dataclass(frozen=True)
class KnowledgeRecord:
    vector: np.ndarray
    provenance: Provenance


class KnowledgeLibrary:
    """De-redundantized patch records for one task, with provenance.

    Bulk storage is columnar: `vectors` is the (N, D) float32 record matrix
    and the provenance fields live in parallel int arrays. Instances are
    immutable after construction.
    """

    def __init__(
        self,
        name: str,
        spec: PatchSpec,
        channels: int,
        vectors: np.ndarray,
        image_ids: np.ndarray,
        origins: np.ndarray,
        map_dims: np.ndarray,
        image_names: list[str],
        redundancy_threshold: float,
        scale_factor: float = 1.0,
    ):
        d = spec.vector_length(channels)
        vectors = np.ascontiguousarray(vectors, dtype=np.float32).reshape(-1, d)
        n = vectors.shape[0]
        self.name = name
        self.spec = spec
        self.channels = channels
        self.vectors = vectors
        self.image_ids = np.ascontiguousarray(image_ids, dtype=np.uint32).reshape(n)
        self.origins = np.ascontiguousarray(origins, dtype=np.uint32).reshape(n, 2)
        self.map_dims = np.ascontiguousarray(map_dims, dtype=np.uint32).reshape(n, 2)
        self.image_names = list(image_names)
        self.redundancy_threshold = float(redundancy_threshold)
        self.scale_factor = float(scale_factor)
        self._content_hash: int | None = None
        self._validate_provenance()
        for arr in (self.vectors, self.image_ids, self.origins, self.map_dims):
            arr.setflags(write=False)

    def _validate_provenance(self):
        if len(self) == 0:
            return
        if int(self.image_ids.max(initial=0)) >= len(self.image_names):
            raise DimensionError("record image_id exceeds image-name table")
        bad_y = self.origins[:, 0] + self.spec.window_h > self.map_dims[:, 0]
        bad_x = self.origins[:, 1] + self.spec.window_w > self.map_dims[:, 1]
        if bad_y.any() or bad_x.any():
            i = int(np.flatnonzero(bad_y | bad_x)[0])
            raise DimensionError(
                f"record {i} window exceeds its source map bounds"
            )

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def record(self, i: int) -> KnowledgeRecord:
        return KnowledgeRecord(
            vector=self.vectors[i],
            provenance=Provenance(
                image_id=int(self.image_ids[i]),
                origin_y=int(self.origins[i, 0]),
                origin_x=int(self.origins[i, 1]),
                map_h=int(self.map_dims[i, 0]),
                map_w=int(self.map_dims[i, 1]),
            ),
        )

    @property
    def records(self) -> list[KnowledgeRecord]:
        return [self.record(i) for i in range(len(self))]

    @property
    def content_hash(self) -> int:
        """FNV-1a of the serialized library bytes; computed once, cached."""
        if self._content_hash is None:
            self._content_hash = fnv1a64(serialize_library(self))
        return self._content_hash


@dataclass(frozen=True)
class Gpkl:
    """A named collection of libraries with one plugged (active) at a time."""

    libraries: dict[str, KnowledgeLibrary]
    active: str | None = None

    def __post_init__(self):
        if self.active is not None and self.active not in self.libraries:
            raise LibraryLookupError(f"no library named {self.active!r}")

    @property
    def active_library(self) -> KnowledgeLibrary:
        if self.active is None:
            raise LibraryLookupError("no library is plugged")
        return self.libraries[self.active]


def plug(gpkl: Gpkl, name: str) -> Gpkl:
    """Activate `name`; everything else is untouched and nothing is recomputed."""
    if name not in gpkl.libraries:
        raise LibraryLookupError(f"no library named {name!r}")
    return replace(gpkl, active=name)


def _greedy_deredundancy(vectors: np.ndarray, tau: float) -> np.ndarray:
    """Indices retained by a first-kept scan: a candidate is dropped iff its
    ncc with some already-retained record exceeds tau."""
    n = vectors.shape[0]
    if tau > 1.0:
        return np.arange(n)
    unit = normalize_rows(vectors)
    kept = np.empty_like(unit)
    kept_count = 0
    keep_idx = []
    for i in range(n):
        v = unit[i]
        if kept_count and (kept[:kept_count] @ v > tau).any():
            continue
        kept[kept_count] = v
        kept_count += 1
        keep_idx.append(i)
    return np.asarray(keep_idx, dtype=np.int64)


def build_library(
    name: str,
    sources: list[tuple[str, FeatureMap]],
    spec: PatchSpec,
    tau: float = 0.97,
    scale_factor: float = 1.0,
) -> KnowledgeLibrary:
    """Extract all windows from all maps and keep a redundancy-free subset.

    Args:
        sources: (identifier, map) pairs; all maps must share a channel count.
        tau: similarity threshold; a patch is merged away when its ncc with a
            retained record exceeds tau. Values above 1 disable merging.

    Returns:
        The library, with every retained record carrying exact provenance.
    """
    if not sources:
        raise EmptyLibraryError("need at least one source map")
    if tau <= 0.0:
        raise ParameterError(f"tau must be positive, got {tau}")
    channels = sources[0][1].channels
    all_vectors = []
    all_image_ids = []
    all_origins = []
    all_dims = []
    names = []
    for image_id, (identifier, fmap) in enumerate(sources):
        if fmap.channels != channels:
            raise DimensionError(
                f"map {identifier!r} has {fmap.channels} channels, expected {channels}"
            )
        vectors, origins = patch_matrix(fmap, spec)
        all_vectors.append(vectors)
        all_origins.append(origins)
        all_image_ids.append(np.full(len(origins), image_id, dtype=np.uint32))
        all_dims.append(
            np.tile([fmap.height, fmap.width], (len(origins), 1)).astype(np.uint32)
        )
        names.append(identifier)
    vectors = np.concatenate(all_vectors)
    keep = _greedy_deredundancy(vectors, tau)
    return KnowledgeLibrary(
        name=name,
        spec=spec,
        channels=channels,
        vectors=vectors[keep],
        image_ids=np.concatenate(all_image_ids)[keep],
        origins=np.concatenate(all_origins)[keep],
        map_dims=np.concatenate(all_dims)[keep],
        image_names=names,
        redundancy_threshold=tau,
        scale_factor=scale_factor,
    )


class _Reader:
    """Byte cursor that reports the failing offset on truncation."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError(f"truncated while reading {what}", self.offset)
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, what: str) -> float:
        return struct.unpack("<f", self.take(4, what))[0]


def serialize_library(lib: KnowledgeLibrary) -> bytes:
    n = len(lib)
    d = lib.dimension
    parts = [
        GPKL_MAGIC,
        struct.pack("<H", GPKL_VERSION),
        struct.pack(
            "<IIII", lib.channels, lib.spec.window_h, lib.spec.window_w, lib.spec.stride
        ),
        struct.pack("<f", lib.redundancy_threshold),
        struct.pack("<II", n, len(lib.image_names)),
    ]
    for name in lib.image_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ParameterError(f"image name too long to serialize: {name[:32]!r}...")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
    if n:
        rec_bytes = d * 4 + 20
        block = np.empty((n, rec_bytes), dtype=np.uint8)
        block[:, : d * 4] = (
            lib.vectors.astype("<f4").view(np.uint8).reshape(n, d * 4)
        )
        prov = np.column_stack(
            [lib.image_ids, lib.origins[:, 0], lib.origins[:, 1],
             lib.map_dims[:, 0], lib.map_dims[:, 1]]
        ).astype("<u4")
        block[:, d * 4 :] = prov.view(np.uint8).reshape(n, 20)
        parts.append(block.tobytes())
    parts.append(struct.pack("<f", lib.scale_factor))
    return b"".join(parts)


def deserialize_library(data: bytes, name: str = "library") -> KnowledgeLibrary:
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != GPKL_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {GPKL_MAGIC!r}", 0)
    version = r.u16("version")
    if version != GPKL_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    channels = r.u32("channel count")
    window_h = r.u32("window height")
    window_w = r.u32("window width")
    stride = r.u32("stride")
    tau = r.f32("redundancy threshold")
    n = r.u32("record count")
    m = r.u32("image count")
    names = []
    for _ in range(m):
        length = r.u16("image name length")
        names.append(r.take(length, "image name").decode("utf-8"))
    spec = PatchSpec(window_h, window_w, stride)
    d = spec.vector_length(channels)
    rec_bytes = d * 4 + 20
    raw = r.take(n * rec_bytes, "records")
    if n:
        block = np.frombuffer(raw, dtype=np.uint8).reshape(n, rec_bytes)
        vectors = block[:, : d * 4].copy().view("<f4").reshape(n, d)
        prov = block[:, d * 4 :].copy().view("<u4").reshape(n, 5)
    else:
        vectors = np.zeros((0, d), dtype=np.float32)
        prov = np.zeros((0, 5), dtype=np.uint32)
    scale = r.f32("scale factor")
    if r.offset != len(data):
        raise FormatError("trailing bytes after library payload", r.offset)
    lib = KnowledgeLibrary(
        name=name,
        spec=spec,
        channels=channels,
        vectors=vectors,
        image_ids=prov[:, 0],
        origins=prov[:, 1:3],
        map_dims=prov[:, 3:5],
        image_names=names,
        redundancy_threshold=tau,
        scale_factor=scale,
    )
    lib._content_hash = fnv1a64(data)
    return lib


def save_library(lib: KnowledgeLibrary, path) -> None:
    data = serialize_library(lib)
    with open(path, "wb") as fh:
        fh.write(data)
    lib._content_hash = fnv1a64(data)


def load_library(path, name: str | None = None) -> KnowledgeLibrary:
    import os

    with open(path, "rb") as fh:
        data = fh.read()
    if name is None:
        name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return deserialize_library(data, name=name)
