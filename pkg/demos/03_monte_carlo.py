"""
Peelability across the transition
=================================

Fraction of peelable graphs over 20 seeded trials, for fuse graphs and for
plain random hypergraphs.  Fuse graphs keep peeling well past the point
where random hypergraphs stop.
"""

from fusepeel.cli import mc_peel

print("family  c      peeled")
for c in (0.80, 0.82, 0.84):
    frac = mc_peel("er", 3, c, 1, 100_000, 20, seed=1)[-1]["peelable"]
    print(f"er      {c:.2f}   {frac:.2f}")
for c in (0.88, 0.91, 0.93, 0.96):
    frac = mc_peel("fuse", 3, c, 50, 10_000, 20, seed=1)[-1]["peelable"]
    print(f"fuse    {c:.2f}   {frac:.2f}")
