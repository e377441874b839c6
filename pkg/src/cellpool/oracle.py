"""Monte Carlo ground truth for the analytic rates.

Nothing here shares code with :mod:`cellpool.analytic`: base stations are
drawn as Poisson point processes, links get explicit exponential power
fades, and ln(1 + SINR) is averaged over samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .params import OperatorParams, RadioParams, Strategy

Z99 = 2.5758293035489004

# substream purposes
_PPP = (11, 12)
_FADE = (21, 22)
_DISK = (31, 32)


class SampleBudgetError(RuntimeError):
    def __init__(self, message: str, estimate: "McEstimate"):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class PppSample:
    points: np.ndarray
    region_radius: float
    density: float

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_99: float
    n_samples: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width_99

    @property
    def high(self) -> float:
        return self.mean + self.half_width_99

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def sample_ppp(density: float, region_radius: float, seed: int) -> PppSample:
    """Homogeneous PPP on the disk of ``region_radius`` centred at the origin."""
    if density < 0:
        raise ValueError("density must be >= 0")
    if not region_radius > 0:
        raise ValueError("region_radius must be > 0")
    rng = substream(seed, 1)
    n = rng.poisson(density * math.pi * region_radius**2)
    r = region_radius * np.sqrt(rng.random(n))
    theta = 2 * math.pi * rng.random(n)
    points = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return PppSample(points, float(region_radius), float(density))


def _finish(total: float, total_sq: float, n: int) -> McEstimate:
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return McEstimate(mean, Z99 * math.sqrt(var / n), n)


def _chunks(n_samples: int, chunk_size: int):
    for index, start in enumerate(range(0, n_samples, chunk_size)):
        yield index, min(chunk_size, n_samples - start)


# -- ergodic rate ---------------------------------------------------------------

def _nearest_distances(rng, density, m, k):
    """Distances to the k nearest points of a PPP around the origin, sorted.

    pi * density * r_j^2 are the arrival times of a unit-rate Poisson
    process, i.e. cumulative sums of unit exponentials.
    """
    arrivals = np.cumsum(rng.standard_exponential((m, k)), axis=1)
    return np.sqrt(arrivals / (math.pi * density))


def _link_sinr(dist, fades, density, bandwidth, radio):
    """SINR of the nearest point, everything else interferes.

    Interference from beyond the k-th point is replaced by its conditional
    mean 2 pi lambda r_k^(2-a) / (a - 2).
    """
    a = radio.path_loss_exponent
    gain = fades * dist ** (-a)
    tail = 2 * math.pi * density * dist[:, -1] ** (2 - a) / (a - 2)
    noise = radio.noise_density * bandwidth / radio.tx_power
    return gain[:, 0] / (noise + gain[:, 1:].sum(axis=1) + tail)


def default_nearest(alpha: float) -> int:
    """Number of explicitly simulated BSs per process.

    The mean-field tail leaves a bias of order Var(tail)/I^2, which falls
    like k^(1-a); 64 points keep it far below 1e-4 nats for a >= 3.
    """
    return 64 if alpha >= 3 else 512


def estimate_rate(strategy: Strategy | str, op1: OperatorParams, op2: OperatorParams,
                  radio: RadioParams = RadioParams(), n_samples: int = 100_000, seed: int = 0,
                  n_nearest: int | None = None, chunk_size: int = 1 << 15,
                  target_half_width: float | None = None, workers: int = 1) -> McEstimate:
    """Monte Carlo E[ln(1 + SINR)] (nats/s/Hz) for a typical user of OP1.

    NOCOOP uses op1 alone; FLEXROAM draws both processes and serves the user
    from the nearer one, with interference from that operator only; MERGER
    is NOCOOP with summed density and bandwidth on the same streams.

    Each chunk of samples has its own substreams and chunk sums are combined
    with fsum, so the estimate does not depend on ``workers`` or on how
    chunks are scheduled.
    """
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.MERGER:
        merged = OperatorParams(op1.bs_density + op2.bs_density, op1.bandwidth + op2.bandwidth,
                                op1.user_density + op2.user_density)
        return estimate_rate(Strategy.NOCOOP, merged, op2, radio, n_samples, seed,
                             n_nearest, chunk_size, target_half_width, workers)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    k = n_nearest or default_nearest(radio.path_loss_exponent)
    ops = (op1,) if strategy is Strategy.NOCOOP else (op1, op2)
    if not ops[0].bs_density > 0 and (len(ops) == 1 or not ops[1].bs_density > 0):
        raise ValueError("at least one operator needs a positive BS density")

    def chunk(job):
        index, m = job
        nearest, sinr = [], []
        for which, op in enumerate(ops):
            if op.bs_density == 0:
                nearest.append(np.full(m, np.inf))
                sinr.append(np.zeros(m))
                continue
            dist = _nearest_distances(substream(seed, index, _PPP[which]), op.bs_density, m, k)
            fades = substream(seed, index, _FADE[which]).standard_exponential((m, k))
            nearest.append(dist[:, 0])
            sinr.append(_link_sinr(dist, fades, op.bs_density, op.bandwidth, radio))
        if len(ops) == 1:
            chosen = sinr[0]
        else:
            chosen = np.where(nearest[0] <= nearest[1], sinr[0], sinr[1])
        values = np.log1p(chosen)
        return math.fsum(values), math.fsum(values * values)

    jobs = list(_chunks(n_samples, chunk_size))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, jobs))
    else:
        parts = [chunk(job) for job in jobs]
    sums = [p[0] for p in parts]
    sums_sq = [p[1] for p in parts]
    est = _finish(math.fsum(sums), math.fsum(sums_sq), n_samples)
    if target_half_width is not None and est.half_width_99 > target_half_width:
        raise SampleBudgetError(
            f"99% half-width {est.half_width_99:.3g} exceeds target {target_half_width:.3g} "
            f"after {n_samples} samples", est)
    return est


# -- distributional checks ------------------------------------------------------

def _nearest_in_disk(rng, density, n, mean_count=40.0, radius=None):
    """Distance from the origin to the nearest point of a PPP restricted to a disk.

    The disk holds ``mean_count`` points on average (empty with probability
    e^-40); samples with no point report +inf.
    """
    if density == 0:
        return np.full(n, np.inf)
    if radius is None:
        radius = math.sqrt(mean_count / (math.pi * density))
    counts = rng.poisson(density * math.pi * radius**2, size=n)
    radii = radius * np.sqrt(rng.random(int(counts.sum())))
    out = np.full(n, np.inf)
    filled = counts > 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])[filled]
    out[filled] = np.minimum.reduceat(radii, starts)
    return out


def _pair_nearest(lam1, lam2, n_samples, seed):
    if lam1 < 0 or lam2 < 0 or lam1 + lam2 <= 0:
        raise ValueError("densities must be >= 0 with a positive sum")
    # one common disk, sized for the sparser positive process
    lam_min = min(x for x in (lam1, lam2) if x > 0)
    radius = math.sqrt(40.0 / (math.pi * lam_min))
    d1 = _nearest_in_disk(substream(seed, _DISK[0]), lam1, n_samples, radius=radius)
    d2 = _nearest_in_disk(substream(seed, _DISK[1]), lam2, n_samples, radius=radius)
    return d1, d2


def empirical_association_prob(lam1: float, lam2: float, n_samples: int = 100_000,
                               seed: int = 0) -> McEstimate:
    """Fraction of typical users whose nearest BS belongs to operator 1."""
    d1, d2 = _pair_nearest(lam1, lam2, n_samples, seed)
    hits = float(np.count_nonzero(d1 < d2))
    p = hits / n_samples
    half = Z99 * math.sqrt(max(p * (1 - p), 0.0) / n_samples)
    return McEstimate(p, half, n_samples)


def empirical_nearest_distance_cdf(lam1: float, lam2: float, n_samples: int = 100_000,
                                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sorted nearest-BS distances over both operators with their ECDF levels."""
    d1, d2 = _pair_nearest(lam1, lam2, n_samples, seed)
    d = np.sort(np.minimum(d1, d2))
    return d, np.arange(1, n_samples + 1) / n_samples


def nearest_distance_law(r, total_density: float):
    """1 - exp(-lambda pi r^2): nearest point of a PPP of density ``total_density``."""
    return -np.expm1(-total_density * math.pi * np.asarray(r, dtype=float) ** 2)
