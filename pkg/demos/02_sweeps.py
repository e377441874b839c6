"""Who gains from cooperating when the operators are not alike.

Sweeps the OP2/OP1 ratio of user density and finds where each operator's
gain over going alone changes sign.

    python demos/02_sweeps.py
"""

import numpy as np

from cellpool import RadioParams, Strategy, baseline_operator
from cellpool.analytic import breakeven_ratio, gain_over_nocoop, scaled_pair

op = baseline_operator()
radio = RadioParams()

ratios = np.geomspace(0.25, 4.0, 9)
print("user-density ratio   FLEXROAM OP1   FLEXROAM OP2   MERGER OP1   MERGER OP2")
for x in ratios:
    a, b = scaled_pair(op, op, "user_density", x)
    cells = [100 * gain_over_nocoop(s, a, b, k, radio)
             for s in (Strategy.FLEXROAM, Strategy.MERGER) for k in (1, 2)]
    print(f"{x:18.3f}   " + "   ".join(f"{g:+11.1f}%" for g in cells))

# The operator with fewer users per cell loses once it would carry the
# other's load; the crossing points bound the region where both gain.
lo = breakeven_ratio("flexroam", op, op, "user_density", 2, (0.2, 0.9), radio)
hi = breakeven_ratio("flexroam", op, op, "user_density", 1, (1.2, 3.0), radio)
print(f"\nFLEXROAM helps both operators for ratios in [{lo:.3f}, {hi:.3f}]")
edge = breakeven_ratio("merger", op, op, "user_density", 2, (0.2, 0.6), radio)
print(f"MERGER helps OP2 above a ratio of {edge:.3f}")

# Bandwidth asymmetry: a spectrum-poor operator gains most from pooling.
print("\nbandwidth ratio   MERGER OP1   MERGER OP2")
for x in (0.25, 0.5, 1.0, 2.0):
    a, b = scaled_pair(op, op, "bandwidth", x)
    print(f"{x:15.2f}   {100 * gain_over_nocoop('merger', a, b, 1, radio):+9.1f}%"
          f"   {100 * gain_over_nocoop('merger', a, b, 2, radio):+9.1f}%")
