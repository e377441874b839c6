"""Cross-check the quadrature rates against direct Monte Carlo.

Draws Poisson BS fields around a user at the origin, applies Rayleigh
fading, and averages ln(1 + SINR). The quadrature value should fall inside
the 99% interval.

    python demos/03_monte_carlo_check.py [n_samples]
"""

import sys

from cellpool import RadioParams, Strategy, baseline_operator
from cellpool.analytic import strategy_rate
from cellpool.oracle import empirical_association_prob, estimate_rate

n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
op = baseline_operator()
radio = RadioParams()

for strategy in (Strategy.NOCOOP, Strategy.FLEXROAM, Strategy.MERGER):
    exact = strategy_rate(strategy, op, op, radio).spectral_rate_nats
    est = estimate_rate(strategy, op, op, radio, n_samples=n, seed=1)
    verdict = "inside" if est.contains(exact) else "OUTSIDE"
    print(f"{strategy.value:>9}: quadrature {exact:.5f}, MC {est.mean:.5f} +- {est.half_width_99:.5f}"
          f"  ({verdict})")

# With equal densities a roaming user lands on either operator half the time.
p = empirical_association_prob(op.bs_density, op.bs_density, n, seed=2)
print(f"P(nearest BS belongs to OP1) = {p.mean:.4f} (expected 0.5)")
