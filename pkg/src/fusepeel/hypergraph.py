"""Hypergraph containers, seeded generators and an orientability check.

Randomness is counter based.  Every draw is ``stream(seed, edge, slot)``,
a pure function of the seed, the edge index and a slot number, built from
the splitmix64 finalizer::

    fmix64(z):   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
                 z ^= z >> 27; z *= 0x94D049BB133111EB
                 z ^= z >> 31
    mix(x, i)   = fmix64(x + (i + 1) * 0x9E3779B97F4A7C15)      (mod 2**64)
    stream(s, e, t) = mix(mix(s, e), t)

so edges can be generated in any order (or in parallel) with identical
results.  Draws are reduced to a range with ``% n``; the modulo bias is
negligible for ranges far below ``2**64``.

Indexing is 0-based throughout: segment ``i`` holds vertices
``i*n, ..., (i+1)*n - 1`` and a fuse edge of type ``j`` with offsets
``o_0..o_{k-1}`` is ``{(j + t)*n + o_t}``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
MAX_INDEX = 2**63 - 1


class CapacityError(ValueError):
    """Vertex or edge counts do not fit the 64-bit index width."""


def fmix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def mix(x, i):
    """``fmix64(x + (i+1) * GOLDEN)`` on uint64, broadcasting."""
    x = np.asarray(x, dtype=np.uint64)
    i = np.asarray(i, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return fmix64(x + (i + np.uint64(1)) * GOLDEN)


def mix_int(x: int, i: int) -> int:
    return int(mix(np.uint64(x % 2**64), np.uint64(i % 2**64)))


def stream(seed, edge, slot):
    return mix(mix(np.uint64(seed % 2**64), edge), slot)


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class FuseParams:
    k: int
    c: float
    ell: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(f"k must be >= 3, got {self.k}")
        if self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")

    @property
    def num_segments(self) -> int:
        return self.ell + self.k - 1

    @property
    def num_vertices(self) -> int:
        return self.n * self.num_segments

    @property
    def num_edges(self) -> int:
        return int(round(self.c * self.n * self.ell))

    @property
    def density(self) -> float:
        return self.c * self.ell / self.num_segments


class SegmentLayout(NamedTuple):
    n: int
    ell: int
    k: int

    @property
    def num_segments(self) -> int:
        return self.ell + self.k - 1


class Edge(NamedTuple):
    vertices: tuple
    type: Optional[int] = None
    offsets: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """``num_vertices`` vertices and an ``(m, k)`` array of edges.

    Fuse graphs also carry the edge types and their :class:`SegmentLayout`.
    Duplicate edges are allowed.
    """

    num_vertices: int
    edges: np.ndarray
    types: Optional[np.ndarray] = None
    layout: Optional[SegmentLayout] = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64)
        if edges.ndim != 2:
            if edges.size == 0:
                edges = edges.reshape(0, 0)
            else:
                raise ValueError("edges must be a 2-d array")
        if edges.size and (edges.min() < 0 or edges.max() >= self.num_vertices):
            raise ValueError("edge references a vertex outside the graph")
        edges = np.ascontiguousarray(edges)
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        if self.types is not None:
            types = np.asarray(self.types, dtype=np.int64)
            types.flags.writeable = False
            object.__setattr__(self, "types", types)

    @property
    def k(self) -> int:
        return self.edges.shape[1]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def density(self) -> float:
        return self.num_edges / self.num_vertices if self.num_vertices else 0.0

    def edge(self, i: int) -> Edge:
        verts = tuple(int(v) for v in self.edges[i])
        if self.layout is None:
            return Edge(verts)
        j = int(self.types[i])
        n = self.layout.n
        return Edge(verts, j, tuple(v - (j + t) * n for t, v in enumerate(verts)))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_vertices)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.k} {self.num_vertices} {self.num_edges}\n")
        np.savetxt(buf, self.edges, fmt="%d")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Hypergraph":
        lines = text.strip().splitlines()
        k, nv, m = (int(x) for x in lines[0].split())
        edges = np.array([[int(x) for x in ln.split()] for ln in lines[1:m + 1]], dtype=np.int64).reshape(m, k)
        return cls(nv, edges)


def _check_capacity(num_vertices, num_edges, k):
    if num_vertices > MAX_INDEX or num_edges * k > MAX_INDEX:
        raise CapacityError(f"{num_vertices} vertices / {num_edges} edges exceed the index width")


# --------------------------------------------------------------------------
# generators


def fuse_edges(seed: int, edge_ids: np.ndarray, k: int, ell: int, n: int):
    """Types and vertex arrays for the given edge indices of a fuse graph."""
    edge_ids = np.asarray(edge_ids, dtype=np.uint64)
    base = mix(np.uint64(seed % 2**64), edge_ids)
    types = (mix(base, np.uint64(0)) % np.uint64(ell)).astype(np.int64)
    slots = np.arange(1, k + 1, dtype=np.uint64)
    offsets = (mix(base[:, None], slots[None, :]) % np.uint64(n)).astype(np.int64)
    verts = (types[:, None] + np.arange(k)[None, :]) * n + offsets
    return types, verts


def generate_fuse(params: FuseParams) -> Hypergraph:
    """Sample ``F(n, k, c, ell)``: ``round(c*n*ell)`` edges, each with a uniform type
    ``j`` and one uniform vertex in each of segments ``j, ..., j+k-1``."""
    k, ell, n = params.k, params.ell, params.n
    m = params.num_edges
    _check_capacity(params.num_vertices, m, k)
    types, verts = fuse_edges(params.seed, np.arange(m, dtype=np.uint64), k, ell, n)
    return Hypergraph(params.num_vertices, verts.reshape(m, k), types, SegmentLayout(n, ell, k))


def generate_er(k: int, n_vertices: int, m_edges: int, seed: int, replacement: bool = False) -> Hypergraph:
    """k-uniform Erdos-Renyi hypergraph with ``m_edges`` independent edges.

    By default the k vertices of an edge are distinct: an edge whose draw
    repeats a vertex is redrawn from the next block of ``k`` slots of its own
    stream.  ``replacement=True`` keeps repeats.
    """
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    if n_vertices < k:
        raise ValueError(f"need at least k={k} vertices, got {n_vertices}")
    _check_capacity(n_vertices, m_edges, k)
    ids = np.arange(m_edges, dtype=np.uint64)
    base = mix(np.uint64(seed % 2**64), ids)
    nv = np.uint64(n_vertices)
    slots = np.arange(1, k + 1, dtype=np.uint64)
    edges = (mix(base[:, None], slots[None, :]) % nv).astype(np.int64)
    if not replacement:
        attempt = 1
        bad = _has_repeat(edges)
        while bad.any():
            rows = np.flatnonzero(bad)
            slots = np.arange(attempt * k + 1, (attempt + 1) * k + 1, dtype=np.uint64)
            edges[rows] = (mix(base[rows, None], slots[None, :]) % nv).astype(np.int64)
            bad[rows] = _has_repeat(edges[rows])
            attempt += 1
    return Hypergraph(n_vertices, edges.reshape(m_edges, k))


def _has_repeat(edges: np.ndarray) -> np.ndarray:
    s = np.sort(edges, axis=1)
    return (s[:, 1:] == s[:, :-1]).any(axis=1)


# --------------------------------------------------------------------------
# orientation


@dataclass(frozen=True)
class Orientation:
    """Edge-to-vertex assignment from a maximum matching of the incidence graph.

    ``assignment[e]`` is the vertex chosen for edge ``e`` or -1.  ``size`` is
    the number of oriented edges; the orientation is ``full`` when every edge
    got a vertex.
    """

    assignment: np.ndarray
    size: int

    @property
    def full(self) -> bool:
        return self.size == len(self.assignment)


def orient(h: Hypergraph) -> Orientation:
    """Maximum (partial) orientation of ``h`` via Hopcroft-Karp."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_bipartite_matching

    m = h.num_edges
    if m == 0:
        return Orientation(np.empty(0, dtype=np.int64), 0)
    rows = np.repeat(np.arange(m), h.k)
    data = np.ones(rows.size, dtype=np.int8)
    inc = csr_matrix((data, (rows, h.edges.ravel())), shape=(m, h.num_vertices))
    inc.sum_duplicates()
    match = maximum_bipartite_matching(inc, perm_type="column").astype(np.int64)
    return Orientation(match, int((match >= 0).sum()))


def is_valid_orientation(h: Hypergraph, assignment: np.ndarray) -> bool:
    """Every edge mapped to one of its own vertices, injectively."""
    assignment = np.asarray(assignment)
    if len(assignment) != h.num_edges or (assignment < 0).any():
        return False
    if not (h.edges == assignment[:, None]).any(axis=1).all():
        return False
    return len(np.unique(assignment)) == len(assignment)
