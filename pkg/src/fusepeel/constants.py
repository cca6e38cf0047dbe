"""Reference values, for tests and reports only.

Keyed by edge size k.  ``ERODING_LOWER`` are densities verified to erode with
a window of half-width 50 in double precision, ``CONSOLIDATING_UPPER`` the
densities verified to consolidate; ``ORIENTABILITY`` are the orientability
thresholds of k-uniform Erdos-Renyi hypergraphs.  ``ER_PEELING`` is the
Erdos-Renyi peeling threshold (three digits).
"""

ERODING_LOWER = {
    3: 0.9179352469,
    4: 0.9767692112,
    5: 0.9924345766,
    6: 0.9973757381,
    7: 0.9990561294,
}

ORIENTABILITY = {
    3: 0.9179352767,
    4: 0.9767701649,
    5: 0.9924383913,
    6: 0.9973795528,
    7: 0.9990637588,
}

CONSOLIDATING_UPPER = {
    3: 0.9179353065,
    4: 0.9767711186,
    5: 0.9924422067,
    6: 0.9973833675,
    7: 0.9990713882,
}

ER_PEELING = {3: 0.818}

# retrieval configurations: (k, c, ell) -> reported overhead
RETRIEVAL_OVERHEAD = {
    (3, 0.910, 100): 0.121,
    (4, 0.960, 200): 0.057,
    (7, 0.985, 500): 0.027,
}
