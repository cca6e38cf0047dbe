"""
Certifying the threshold
========================

The survival operator is iterated on a finite window, with values outside
the window rounded in the safe direction.  If the left end of the upper
iterate drops below xi1/2 the density is eroding; if the right-hand iterate
climbs past the midpoint of the fixed points it is consolidating.
"""

from fusepeel import bracket_threshold, consolidation_check, erosion_check, fixed_points
from fusepeel.constants import ORIENTABILITY

k = 3
for c in (0.9179, 0.9180):
    fp = fixed_points(k, c)
    print(f"c={c}: xi1={fp.xi1:.6f} xi2={fp.xi2:.6f}")

ero = erosion_check(k, 0.9179, trace_every=2000)
con = consolidation_check(k, 0.9180, trace_every=2000)
print(ero.verdict.value, "after", ero.iterations, "iterations")
print(con.verdict.value, "after", con.iterations, "iterations")

# the left end of the erosion iterate, sampled every 2000 steps
print("r      a_r(0)")
for r, v in ero.trace:
    print(f"{int(r):6d} {v:.6f}")

# bisection down to a bracket of width 1e-4
br = bracket_threshold(k, tol=1e-4)
print(f"bracket [{br.lower:.8f}, {br.upper:.8f}], contains {ORIENTABILITY[k]}: {br.contains(ORIENTABILITY[k])}")
