"""Static r-bit retrieval over fuse graphs.

Each key is hashed to a fuse-graph edge; the structure stores one r-bit cell
per vertex such that the XOR of the k cells of a key's edge is the key's
value.  Cells are found by peeling the key graph and back-substituting in
reverse peel order.  Queries for keys outside the build set return an
arbitrary value.

Hashing.  ``h = xxh3_128(key, seed)`` split as ``h_hi, h_lo`` (64 bits each).
The edge type is ``h_hi % ell`` and offset ``t`` is ``mix(h_lo, t) % n`` with
``mix`` the splitmix64-based mixer from :mod:`fusepeel.hypergraph`.  Build
attempt ``i`` uses seed ``mix(seed, i)``.

Serialized layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"FUSR"
    4       1     version (1)
    5       1     k
    6       1     r_bits
    7       1     reserved (0)
    8       4     ell (u32)
    12      8     n (u64, segment size)
    20      8     m (u64, number of keys)
    28      8     c (IEEE-754 double)
    36      8     successful seed (u64)
    44      8*W   cells, W = ceil(n*(ell+k-1)*r_bits / 64) u64 words,
                  cell v at bits [v*r, (v+1)*r) of the word stream
    44+8W   8     CRC-64/XZ of all preceding bytes

An empty structure is 52 bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import xxhash
from numba import njit

from .hypergraph import MAX_INDEX, Hypergraph, mix, mix_int
from .peeler import peel_sequential

MAGIC = b"FUSR"
VERSION = 1
HEADER = struct.Struct("<4sBBBBIQQdQ")
HEADER_SIZE = HEADER.size
CHECKSUM_SIZE = 8
EMPTY_SIZE = HEADER_SIZE + CHECKSUM_SIZE


class RetrievalError(Exception):
    code = "retrieval-error"


class BuildFailed(RetrievalError):
    code = "build-failed"


class CapacityExceeded(RetrievalError):
    code = "capacity"


class FormatError(RetrievalError):
    code = "format"


class MagicMismatch(FormatError):
    code = "magic-mismatch"


class VersionMismatch(FormatError):
    code = "version-mismatch"


class Truncated(FormatError):
    code = "truncated"


class ChecksumMismatch(FormatError):
    code = "checksum-mismatch"


@dataclass(frozen=True)
class RetrievalParams:
    k: int = 3
    c: float = 0.91
    ell: int = 100
    r_bits: int = 1
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k < 3 or self.k > 255:
            raise ValueError(f"k must be in 3..255, got {self.k}")
        if not 1 <= self.ell < 2**32:
            raise ValueError(f"ell must be in 1..2**32-1, got {self.ell}")
        if not 0 < self.r_bits <= 64:
            raise ValueError(f"r_bits must be in 1..64, got {self.r_bits}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.density >= 1:
            raise ValueError(f"edge density c*ell/(ell+k-1) = {self.density:.6f} must be below 1")

    @property
    def density(self) -> float:
        return self.c * self.ell / (self.ell + self.k - 1)

    def segment_size(self, m: int) -> int:
        return math.ceil(m / (self.c * self.ell)) if m else 0


# --------------------------------------------------------------------------
# hashing


def hash128(key: bytes, seed: int) -> tuple:
    h = xxhash.xxh3_128_intdigest(key, seed=seed % 2**64)
    return h >> 64, h & (2**64 - 1)


def _hash_all(keys: Sequence[bytes], seed: int):
    hs = [xxhash.xxh3_128_intdigest(key, seed=seed) for key in keys]
    hi = np.array([h >> 64 for h in hs], dtype=np.uint64)
    lo = np.array([h & 0xFFFFFFFFFFFFFFFF for h in hs], dtype=np.uint64)
    return hi, lo


def _edges_from_hashes(hi, lo, k, ell, n):
    types = (hi % np.uint64(ell)).astype(np.int64)
    if n == 0:
        return np.zeros((len(hi), k), dtype=np.int64)
    slots = np.arange(k, dtype=np.uint64)
    offsets = (mix(lo[:, None], slots[None, :]) % np.uint64(n)).astype(np.int64)
    return (types[:, None] + np.arange(k)[None, :]) * n + offsets


def edges_of(keys: Sequence[bytes], seed: int, params: RetrievalParams, n: int) -> np.ndarray:
    hi, lo = _hash_all(keys, seed % 2**64)
    return _edges_from_hashes(hi, lo, params.k, params.ell, n).reshape(len(keys), params.k)


def edge_of(key: bytes, seed: int, params: RetrievalParams, n: int) -> tuple:
    """Vertices of the fuse edge for ``key``: one per segment ``j..j+k-1``."""
    hi, lo = hash128(key, seed)
    j = hi % params.ell
    if n == 0:
        return (0,) * params.k
    return tuple((j + t) * n + mix_int(lo, t) % n for t in range(params.k))


# --------------------------------------------------------------------------
# cell packing and checksum


@njit(cache=True)
def _pack(cells, r):
    nwords = (cells.shape[0] * r + 63) // 64
    words = np.zeros(nwords, dtype=np.uint64)
    mask = np.uint64(0xFFFFFFFFFFFFFFFF) if r == 64 else (np.uint64(1) << np.uint64(r)) - np.uint64(1)
    for v in range(cells.shape[0]):
        x = cells[v] & mask
        pos = v * r
        w = pos >> 6
        off = pos & 63
        words[w] |= x << np.uint64(off)
        if off + r > 64:
            words[w + 1] |= x >> np.uint64(64 - off)
    return words


@njit(cache=True)
def _unpack(words, count, r):
    cells = np.empty(count, dtype=np.uint64)
    mask = np.uint64(0xFFFFFFFFFFFFFFFF) if r == 64 else (np.uint64(1) << np.uint64(r)) - np.uint64(1)
    for v in range(count):
        pos = v * r
        w = pos >> 6
        off = pos & 63
        x = words[w] >> np.uint64(off)
        if off + r > 64:
            x |= words[w + 1] << np.uint64(64 - off)
        cells[v] = x & mask
    return cells


CRC64_POLY = 0xC96C5795D7870F42  # ECMA-182, reflected


def _crc_table():
    table = np.empty(256, dtype=np.uint64)
    for b in range(256):
        crc = b
        for _ in range(8):
            crc = (crc >> 1) ^ CRC64_POLY if crc & 1 else crc >> 1
        table[b] = crc
    return table


_CRC_TABLE = _crc_table()


@njit(cache=True)
def _crc64_kernel(data, table):
    crc = np.uint64(0xFFFFFFFFFFFFFFFF)
    for b in data:
        crc = table[(crc ^ np.uint64(b)) & np.uint64(0xFF)] ^ (crc >> np.uint64(8))
    return crc ^ np.uint64(0xFFFFFFFFFFFFFFFF)


def crc64(data: bytes) -> int:
    """CRC-64/XZ (reflected ECMA-182 polynomial, init and xorout all ones)."""
    return int(_crc64_kernel(np.frombuffer(data, dtype=np.uint8), _CRC_TABLE))


# --------------------------------------------------------------------------
# structure


@dataclass(frozen=True, eq=False)
class RetrievalStructure:
    params: RetrievalParams
    successful_seed: int
    n: int
    m: int
    words: np.ndarray
    attempts: int = 1
    _cells: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def num_cells(self) -> int:
        return self.n * (self.params.ell + self.params.k - 1)

    @property
    def cells(self) -> np.ndarray:
        """Unpacked cell values (cached)."""
        if self._cells is None:
            object.__setattr__(self, "_cells", _unpack(self.words, self.num_cells, self.params.r_bits))
        return self._cells

    def cell(self, v: int) -> int:
        r = self.params.r_bits
        pos = v * r
        w, off = pos >> 6, pos & 63
        x = int(self.words[w]) >> off
        if off + r > 64:
            x |= int(self.words[w + 1]) << (64 - off)
        return x & ((1 << r) - 1)

    def raw_overhead(self) -> float:
        """Cells per key minus one."""
        return self.num_cells / self.m - 1 if self.m else math.inf

    def total_overhead(self) -> float:
        """Serialized bits over ``m * r_bits`` minus one (header, padding and checksum included)."""
        if not self.m:
            return math.inf
        return 8 * self.serialized_size() / (self.m * self.params.r_bits) - 1

    def serialized_size(self) -> int:
        return HEADER_SIZE + 8 * len(self.words) + CHECKSUM_SIZE


def _check_values(values, r_bits):
    vals = np.asarray(values, dtype=object) if len(values) else np.zeros(0, dtype=object)
    limit = 1 << r_bits
    for v in vals:
        if not 0 <= int(v) < limit:
            raise ValueError(f"value {v} does not fit in {r_bits} bits")
    return np.array([int(v) for v in vals], dtype=np.uint64)


@njit(cache=True)
def _back_substitute(edges, order_vertices, order_edges, values, num_cells):
    cells = np.zeros(num_cells, dtype=np.uint64)
    k = edges.shape[1]
    for p in range(order_vertices.shape[0] - 1, -1, -1):
        e = order_edges[p]
        if e < 0:
            continue
        v = order_vertices[p]
        x = values[e]
        for t in range(k):
            w = edges[e, t]
            if w != v:
                x ^= cells[w]
        cells[v] = x
    return cells


def build(items: Iterable, params: RetrievalParams) -> RetrievalStructure:
    """Build from ``(key, value)`` pairs with distinct byte-string keys.

    Retries with derived seeds while the key graph has a non-empty 2-core;
    raises :class:`BuildFailed` after ``params.max_retries`` attempts.
    """
    items = list(items)
    keys = [bytes(k) for k, _ in items]
    values = _check_values([v for _, v in items], params.r_bits)
    m = len(keys)
    n = params.segment_size(m)
    num_cells = n * (params.ell + params.k - 1)
    if num_cells > MAX_INDEX or m * params.k > MAX_INDEX:
        raise CapacityExceeded(f"{num_cells} cells for {m} keys exceed the index width")
    for attempt in range(max(params.max_retries, 1)):
        seed = mix_int(params.seed, attempt)
        edges = edges_of(keys, seed, params, n)
        graph = Hypergraph(num_cells, edges)
        peel = peel_sequential(graph)
        if not peel.core_edges.size:
            cells = _back_substitute(graph.edges, peel.order_vertices, peel.order_edges, values, num_cells)
            words = _pack(cells, params.r_bits)
            return RetrievalStructure(params, seed, n, m, words, attempt + 1, cells)
    raise BuildFailed(f"key graph not peelable after {params.max_retries} attempts "
                      f"(m={m}, k={params.k}, c={params.c}, ell={params.ell})")


def query(s: RetrievalStructure, key: bytes) -> int:
    """XOR of the k cells on ``key``'s edge."""
    if s.num_cells == 0:
        return 0
    out = 0
    for v in edge_of(key, s.successful_seed, s.params, s.n):
        out ^= s.cell(v)
    return out


def query_many(s: RetrievalStructure, keys: Sequence[bytes]) -> np.ndarray:
    if s.num_cells == 0:
        return np.zeros(len(keys), dtype=np.uint64)
    edges = edges_of(keys, s.successful_seed, s.params, s.n)
    return np.bitwise_xor.reduce(s.cells[edges], axis=1)


def serialize(s: RetrievalStructure) -> bytes:
    p = s.params
    head = HEADER.pack(MAGIC, VERSION, p.k, p.r_bits, 0, p.ell, s.n, s.m, p.c, s.successful_seed % 2**64)
    body = head + np.ascontiguousarray(s.words, dtype="<u8").tobytes()
    return body + struct.pack("<Q", crc64(body))


def deserialize(data: bytes) -> RetrievalStructure:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise MagicMismatch("not a fuse retrieval structure")
    if len(data) < 5:
        raise Truncated("payload ends inside the header")
    if data[4] != VERSION:
        raise VersionMismatch(f"unsupported format version {data[4]}")
    if len(data) < EMPTY_SIZE:
        raise Truncated("payload ends inside the header")
    _, _, k, r_bits, _, ell, n, m, c, seed = HEADER.unpack_from(data)
    cells = n * (ell + k - 1)
    nwords = (cells * r_bits + 63) // 64
    expected = HEADER_SIZE + 8 * nwords + CHECKSUM_SIZE
    if len(data) < expected:
        raise Truncated(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes")
    (stored,) = struct.unpack_from("<Q", data, expected - CHECKSUM_SIZE)
    if crc64(data[:expected - CHECKSUM_SIZE]) != stored:
        raise ChecksumMismatch("checksum does not match")
    words = np.frombuffer(data, dtype="<u8", count=nwords, offset=HEADER_SIZE).astype(np.uint64)
    params = RetrievalParams(k=k, c=c, ell=ell, r_bits=r_bits, seed=seed)
    return RetrievalStructure(params, seed, n, m, words)


def synthetic_keys(count: int, seed: int = 0, r_bits: int = 1):
    """Deterministic distinct keys ``b"key-<seed>-<i>"`` with pseudo-random values."""
    keys = [f"key-{seed}-{i}".encode() for i in range(count)]
    raw = mix(np.uint64(seed % 2**64), np.arange(count, dtype=np.uint64))
    if r_bits < 64:
        raw = raw & np.uint64((1 << r_bits) - 1)
    return keys, [int(v) for v in raw]
