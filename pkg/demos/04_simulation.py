"""Frame-level OFDMA simulation on the bundled 16 + 13 BS layout.

All three strategies see the same users, shadowing and fading in every run,
so the differences come from the strategy alone. The defaults here are
short (3 frames, 2 runs, 20 users per cell); pass --full for the 30 frame x
5 run configuration, which takes several minutes.

    python demos/04_simulation.py [--full]
"""

import dataclasses
import sys
from pathlib import Path

import numpy as np

import cellpool
from cellpool import Strategy
from cellpool.ingest import load_config
from cellpool.simulator import compare_strategies, emit_cdf

config = load_config(Path(cellpool.__file__).parent / "data" / "synthetic_16_13.yaml")
if "--full" not in sys.argv:
    config = dataclasses.replace(config, frames=3, runs=2, users_per_cell=(20, 20))

rows, reports = compare_strategies(config)
print(f"{'strategy':>9} {'operator':>8} {'mean kb/s':>10} {'gain':>8} {'median kb/s':>12} {'gain':>8}")
for r in rows:
    print(f"{r.strategy.value:>9} {r.operator:>8} {r.mean_bps / 1e3:10.1f} {100 * r.gain_vs_nocoop:7.1f}%"
          f" {r.median_bps / 1e3:12.1f} {100 * r.median_gain_vs_nocoop:7.1f}%")

print("\nper-run means (kb/s):")
for s, rep in reports.items():
    print(f"{s.value:>9}: " + ", ".join(f"{m / 1e3:.1f}" for m in rep.run_means()))

# A coarse text view of the user-throughput CDF.
print("\nCDF level   " + "   ".join(f"{s.value:>9}" for s in reports))
cdfs = {s: np.array(emit_cdf(rep, 10)) for s, rep in reports.items()}
for i in range(10):
    level = cdfs[Strategy.NOCOOP][i, 1]
    print(f"{level:9.2f}   " + "   ".join(f"{cdfs[s][i, 0] / 1e3:9.1f}" for s in reports))
