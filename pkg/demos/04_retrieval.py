"""
A one-bit retrieval structure
=============================

Each key hashes to an edge of a fuse graph; peeling the graph and assigning
cells in reverse order makes the XOR of a key's cells equal its value.
Space is about 12% above one bit per key for k=3.
"""

import numpy as np

from fusepeel import RetrievalParams, build, deserialize, query_many, serialize
from fusepeel.retrieval import synthetic_keys

# peeling needs large segments, so this uses three million keys
params = RetrievalParams(k=3, c=0.91, ell=100, r_bits=1)
keys, values = synthetic_keys(3_000_000, seed=0, r_bits=1)
s = build(zip(keys, values), params)
print("attempts:", s.attempts)
print(f"raw overhead {s.raw_overhead():.2%}, with header and checksum {s.total_overhead():.2%}")

got = query_many(s, keys)
print("all correct:", np.array_equal(got, np.array(values, dtype=np.uint64)))

blob = serialize(s)
print(len(blob), "bytes; round trip exact:", serialize(deserialize(blob)) == blob)

# a smaller set at a lower density builds easily, with wider values
small = RetrievalParams(k=3, c=0.8, ell=10, r_bits=8)
keys, values = synthetic_keys(5_000, seed=2, r_bits=8)
t = build(zip(keys, values), small)
print("8-bit values correct:", list(query_many(t, keys[:5])) == values[:5])
