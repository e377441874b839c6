"""Average user throughput of two identical operators under the three
sharing strategies.

Each operator runs 16 BSs per 400 km^2 on 10 MHz with 100 users per cell.
NOCOOP keeps everything separate, FLEXROAM lets users attach to the
nearest BS of either operator while staying on their own spectrum, and
MERGER pools both sites and spectrum.

    python demos/01_baseline.py
"""

from cellpool import RadioParams, Strategy, baseline_operator, throughput

op = baseline_operator()
radio = RadioParams()  # 46 dBm, -174 dBm/Hz, alpha = 3.76

base = None
for strategy in (Strategy.NOCOOP, Strategy.FLEXROAM, Strategy.MERGER):
    r = throughput(strategy, op, op, radio)
    kbps = r.throughput_bps / 1e3
    base = base or kbps
    print(f"{strategy.value:>9}: {kbps:7.2f} kb/s   E[ln(1+SINR)] = {r.spectral_rate_nats:.4f} nats/s/Hz"
          f"   gain {100 * (kbps / base - 1):6.2f}%")

# MERGER is the same network as a single operator with the summed resources,
# so the two numbers below agree to the last bit.
from cellpool import rate_merger, rate_nocoop

merged = rate_merger(op, op, radio)
single = rate_nocoop(2 * op.bandwidth, 2 * op.bs_density, radio)
print("merger == nocoop(summed):", merged.spectral_rate_nats == single.spectral_rate_nats)
