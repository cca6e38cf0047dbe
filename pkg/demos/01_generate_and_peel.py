"""
Generating and peeling fuse graphs
==================================

A fuse graph spreads its vertices over ell + k - 1 segments and lets every
edge pick one vertex from each of k consecutive segments.  Below the
threshold the whole graph peels; above it a 2-core survives.
"""

import numpy as np

from fusepeel import FuseParams, generate_fuse, peel_rounds, peel_sequential, orient

# a small graph, printed edge by edge
h = generate_fuse(FuseParams(k=3, c=0.8, ell=4, n=5, seed=1))
print(h.num_vertices, "vertices,", h.num_edges, "edges")
for i in range(4):
    print(h.edge(i))

# the same parameters always give the same graph
again = generate_fuse(FuseParams(k=3, c=0.8, ell=4, n=5, seed=1))
print("deterministic:", np.array_equal(h.edges, again.edges))

# peeling below and above the threshold
for c in (0.88, 0.93):
    g = generate_fuse(FuseParams(k=3, c=c, ell=50, n=10_000, seed=7))
    res = peel_rounds(g)
    print(f"c={c}: peelable={res.is_peelable} rounds={res.rounds} core={len(res.core_vertices)} vertices")

# both peeling variants reach the same core
g = generate_fuse(FuseParams(k=3, c=0.95, ell=20, n=2_000, seed=3))
a, b = peel_rounds(g), peel_sequential(g)
print("same core:", np.array_equal(a.core_edges, b.core_edges))

# a peelable graph is orientable
g = generate_fuse(FuseParams(k=3, c=0.8, ell=10, n=200, seed=4))
print("peelable:", peel_sequential(g).is_peelable, "orientable:", orient(g).full)
