"""2-core peeling: round-synchronous and work-queue variants.

Both peelers keep, per vertex, a degree counter and the XOR of the indices of
its incident edges.  When the degree drops to 1 the accumulator is the index
of the one remaining edge, so no adjacency lists are built.

A peel order is a sequence of records ``(vertex, edge)``; ``edge`` is -1 when
the vertex had degree 0 when it was removed.  Replaying the records in order
against the original graph, every vertex has degree <= 1 at its turn and the
paired edge is its only remaining edge.  Assigning retrieval cells in reverse
order therefore satisfies each equation exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .hypergraph import Hypergraph, SegmentLayout


@dataclass(frozen=True, eq=False)
class PeelResult:
    """Outcome of peeling a hypergraph.

    ``order_vertices[t], order_edges[t]`` is the t-th deletion record.
    ``deletion_round[v]`` is the round in which ``v`` was removed (-1 for core
    vertices; 0 for every deleted vertex when peeled sequentially).
    ``survivors_by_round[r, i]`` counts segment-``i`` vertices alive after
    ``r`` rounds (fuse graphs peeled by rounds only).  ``work`` counts
    incidence visits.
    """

    num_vertices: int
    num_edges: int
    order_vertices: np.ndarray
    order_edges: np.ndarray
    rounds: int
    deletion_round: np.ndarray
    edge_alive: np.ndarray
    survivors_by_round: Optional[np.ndarray] = None
    layout: Optional[SegmentLayout] = None
    work: int = 0

    @property
    def peel_order(self):
        return [(int(v), None if e < 0 else int(e)) for v, e in zip(self.order_vertices, self.order_edges)]

    @property
    def core_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.deletion_round < 0)

    @property
    def core_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_alive)

    @property
    def is_peelable(self) -> bool:
        return len(self.order_vertices) == self.num_vertices


@njit(cache=True)
def _init_counters(edges, num_vertices):
    m, k = edges.shape
    deg = np.zeros(num_vertices, dtype=np.int64)
    acc = np.zeros(num_vertices, dtype=np.int64)
    for e in range(m):
        for t in range(k):
            v = edges[e, t]
            dup = False
            for s in range(t):
                if edges[e, s] == v:
                    dup = True
            if not dup:
                deg[v] += 1
                acc[v] ^= e
    return deg, acc


@njit(cache=True)
def _remove_edge(edges, e, deg, acc):
    k = edges.shape[1]
    for t in range(k):
        w = edges[e, t]
        dup = False
        for s in range(t):
            if edges[e, s] == w:
                dup = True
        if not dup:
            deg[w] -= 1
            acc[w] ^= e


@njit(cache=True)
def _peel_sequential_kernel(edges, num_vertices):
    m, k = edges.shape
    deg, acc = _init_counters(edges, num_vertices)
    work = m * k
    removed = np.zeros(num_vertices, dtype=np.bool_)
    queued = np.zeros(num_vertices, dtype=np.bool_)
    edge_alive = np.ones(m, dtype=np.bool_)
    queue = np.empty(num_vertices, dtype=np.int64)
    head = 0
    tail = 0
    for v in range(num_vertices):
        if deg[v] <= 1:
            queue[tail] = v
            tail += 1
            queued[v] = True
    ov = np.empty(num_vertices, dtype=np.int64)
    oe = np.empty(num_vertices, dtype=np.int64)
    count = 0
    while head < tail:
        v = queue[head]
        head += 1
        if deg[v] == 1:
            e = acc[v]
            edge_alive[e] = False
            _remove_edge(edges, e, deg, acc)
            work += k
            for t in range(k):
                w = edges[e, t]
                if deg[w] <= 1 and not queued[w]:
                    queued[w] = True
                    queue[tail] = w
                    tail += 1
            ov[count] = v
            oe[count] = e
        else:
            ov[count] = v
            oe[count] = -1
        removed[v] = True
        count += 1
        work += 1
    return ov[:count], oe[:count], removed, edge_alive, work


@njit(cache=True)
def _peel_rounds_kernel(edges, num_vertices):
    m, k = edges.shape
    deg, acc = _init_counters(edges, num_vertices)
    work = m * k
    del_round = np.full(num_vertices, -1, dtype=np.int64)
    edge_alive = np.ones(m, dtype=np.bool_)
    touched = np.zeros(num_vertices, dtype=np.bool_)
    frontier = np.arange(num_vertices)
    nfront = num_vertices
    nxt = np.empty(num_vertices, dtype=np.int64)
    ov = np.empty(num_vertices, dtype=np.int64)
    oe = np.empty(num_vertices, dtype=np.int64)
    count = 0
    alive = num_vertices
    rounds = 0
    while alive > 0:
        rounds += 1
        # vertices of degree <= 1 at the start of this round
        batch = np.empty(nfront, dtype=np.int64)
        nb = 0
        for p in range(nfront):
            v = frontier[p]
            touched[v] = False
            work += 1
            if del_round[v] < 0 and deg[v] <= 1:
                batch[nb] = v
                nb += 1
        if nb == 0:
            break
        batch = np.sort(batch[:nb])
        for p in range(nb):
            del_round[batch[p]] = rounds
        nn = 0
        for p in range(nb):
            v = batch[p]
            ov[count] = v
            if deg[v] == 1:
                e = acc[v]
                edge_alive[e] = False
                _remove_edge(edges, e, deg, acc)
                work += k
                oe[count] = e
                for t in range(k):
                    w = edges[e, t]
                    if del_round[w] < 0 and deg[w] <= 1 and not touched[w]:
                        touched[w] = True
                        nxt[nn] = w
                        nn += 1
            else:
                oe[count] = -1
            count += 1
        alive -= nb
        frontier, nxt = nxt, frontier
        nfront = nn
    return ov[:count], oe[:count], del_round, edge_alive, rounds, work


def _survivors(del_round, rounds, layout):
    n, nseg = layout.n, layout.num_segments
    seg = np.arange(len(del_round)) // n
    dr = np.where(del_round < 0, rounds + 1, del_round)
    hist = np.zeros((nseg, rounds + 2), dtype=np.int64)
    np.add.at(hist, (seg, dr), 1)
    deleted_by = np.cumsum(hist, axis=1)[:, : rounds + 1]
    return (n - deleted_by).T.copy()


def _edges_array(h: Hypergraph) -> np.ndarray:
    edges = h.edges
    if edges.shape[0] == 0:
        return np.zeros((0, max(edges.shape[1], 1)), dtype=np.int64)
    return np.ascontiguousarray(edges, dtype=np.int64)


def peel_rounds(h: Hypergraph) -> PeelResult:
    """Round-synchronous peeling.

    Each round removes every vertex of degree <= 1 (with its edge) at once;
    within a round records are in ascending vertex order.  Stops when no
    vertex is left or a round removes nothing; that empty round is counted.
    """
    edges = _edges_array(h)
    ov, oe, del_round, edge_alive, rounds, work = _peel_rounds_kernel(edges, h.num_vertices)
    surv = _survivors(del_round, rounds, h.layout) if h.layout is not None else None
    return PeelResult(h.num_vertices, h.num_edges, ov, oe, rounds, del_round, edge_alive, surv, h.layout, work)


def peel_sequential(h: Hypergraph) -> PeelResult:
    """Work-queue peeling in linear time.

    The queue is seeded with all vertices of degree <= 1 in ascending order
    and is FIFO afterwards.
    """
    edges = _edges_array(h)
    ov, oe, removed, edge_alive, work = _peel_sequential_kernel(edges, h.num_vertices)
    del_round = np.where(removed, 0, -1)
    return PeelResult(h.num_vertices, h.num_edges, ov, oe, 1 if len(ov) else 0, del_round, edge_alive,
                      None, h.layout, work)


def is_peelable(h: Hypergraph) -> bool:
    return peel_sequential(h).is_peelable


def segment_survival(result: PeelResult, r: int) -> np.ndarray:
    """Fraction of each segment's vertices still present after ``r`` rounds."""
    if result.survivors_by_round is None:
        raise ValueError("segment survival needs a fuse graph peeled by rounds")
    if not 0 <= r <= result.rounds:
        raise ValueError(f"round {r} outside 0..{result.rounds}")
    return result.survivors_by_round[r] / result.layout.n


def replay_is_valid(h: Hypergraph, result: PeelResult) -> bool:
    """Check the peel order by replaying it on a fresh copy of ``h``."""
    incident = [set() for _ in range(h.num_vertices)]
    for e, row in enumerate(h.edges):
        for v in set(int(x) for x in row):
            incident[v].add(e)
    gone_v = np.zeros(h.num_vertices, dtype=bool)
    gone_e = np.zeros(h.num_edges, dtype=bool)
    for v, e in zip(result.order_vertices, result.order_edges):
        v = int(v)
        if gone_v[v] or len(incident[v]) > 1:
            return False
        if e < 0:
            if incident[v]:
                return False
        else:
            if incident[v] != {int(e)}:
                return False
            gone_e[e] = True
            for w in set(int(x) for x in h.edges[e]):
                incident[w].discard(int(e))
        gone_v[v] = True
    core_v = ~gone_v
    if not np.array_equal(np.flatnonzero(core_v), result.core_vertices):
        return False
    if not np.array_equal(np.flatnonzero(~gone_e), result.core_edges):
        return False
    # every core vertex keeps degree >= 2 inside the core
    return all(len(incident[v]) >= 2 for v in np.flatnonzero(core_v))


def orientation_from_peel(h: Hypergraph, result: PeelResult) -> Optional[np.ndarray]:
    """Orient each edge to the vertex that removed it; ``None`` unless peelable."""
    if not result.is_peelable:
        return None
    out = np.full(h.num_edges, -1, dtype=np.int64)
    mask = result.order_edges >= 0
    out[result.order_edges[mask]] = result.order_vertices[mask]
    return out


def rooted_survival(h: Hypergraph, rounds: int) -> np.ndarray:
    """Per-vertex survival under the rooted peeling process, for ``r = 0..rounds``.

    In the rooted process for ``v`` every vertex except ``v`` is removed at
    degree <= 1, while ``v`` is removed only at degree 0.  The result is a
    ``(rounds+1, num_vertices)`` boolean array; entry ``[r, v]`` says whether
    ``v`` survives ``r`` rounds of its own rooted process.  Computed by
    non-backtracking message passing over incidences, which is exact whenever
    the ``r``-neighbourhood of ``v`` is a tree.
    """
    m, k = h.edges.shape if h.num_edges else (0, max(h.k, 1))
    nv = h.num_vertices
    out = np.zeros((rounds + 1, nv), dtype=bool)
    out[0] = True
    if m == 0:
        return out
    inc_v = h.edges.ravel()
    inc_e = np.repeat(np.arange(m), k)
    # vert_msg[x] : vertex of incidence x survives t rounds without its parent edge
    vert_msg = np.ones(m * k, dtype=bool)
    for r in range(1, rounds + 1):
        # edge survives r-1 rounds as seen from each of its vertices
        dead = np.bincount(inc_e, weights=~vert_msg, minlength=m)
        edge_msg = (dead[inc_e] - ~vert_msg) == 0
        alive_edges = np.bincount(inc_v, weights=edge_msg, minlength=nv)
        out[r] = alive_edges >= 1
        vert_msg = (alive_edges[inc_v] - edge_msg) >= 1
    return out


def segment_fractions(flags: np.ndarray, layout: SegmentLayout) -> np.ndarray:
    """Average boolean per-vertex flags over each segment (last axis = vertices)."""
    flags = np.asarray(flags, dtype=float)
    shape = flags.shape[:-1] + (layout.num_segments, layout.n)
    return flags.reshape(shape).mean(axis=-1)
