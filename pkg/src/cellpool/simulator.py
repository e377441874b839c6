"""Frame-level OFDMA experiments under the three sharing strategies."""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import MIN_DISTANCE, PathLossModel, draw_fading, draw_shadowing, link_distances, path_loss
from .deployment import (BaseStation, Region, association_indices, deploy_users, layout_arrays,
                         synthesize_layout, user_arrays)
from .params import OperatorParams, RadioParams, Strategy
from .scheduler import DEFAULT_EPS, allocate_frame

PATH_LOSS_MODELS = ("literal", "log-distance", "pure-exponent")
STRATEGIES = (Strategy.NOCOOP, Strategy.FLEXROAM, Strategy.MERGER)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one OFDMA experiment.

    Per-operator tuples are indexed (operator 1, operator 2). When
    ``layout_file`` is set it replaces the synthesized layout.
    """

    region: Region = Region()
    layout_file: str | None = None
    bs_counts: tuple[int, int] = (16, 13)
    layout_mode: str = "perturbed-grid"
    layout_seed: int = 0
    users_per_cell: tuple[float, float] = (100.0, 100.0)
    bandwidth: tuple[float, float] = (10e6, 10e6)
    subchannels: tuple[int, int] = (32, 32)
    slots: int = 60
    frames: int = 30
    runs: int = 5
    strategy: Strategy = Strategy.NOCOOP
    seed: int = 0
    radio: RadioParams = RadioParams()
    path_loss_model: str = "log-distance"
    shadowing_db: float = 8.0
    eps: float = DEFAULT_EPS
    min_distance: float = MIN_DISTANCE
    literal_interference: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        errors = []
        if self.frames < 1:
            errors.append("frames must be >= 1")
        if self.runs < 1:
            errors.append("runs must be >= 1")
        if self.slots < 1:
            errors.append("slots must be >= 1")
        if any(c < 0 for c in self.subchannels) or sum(self.subchannels) < 1:
            errors.append("subchannels must be >= 0 with a positive total")
        if any(w < 0 for w in self.bandwidth):
            errors.append("bandwidth must be >= 0")
        for w, c in zip(self.bandwidth, self.subchannels):
            if (w > 0) != (c > 0):
                errors.append("an operator has subchannels iff it has bandwidth")
        if any(n < 0 for n in self.bs_counts):
            errors.append("bs_counts must be >= 0")
        if any(u <= 0 for u in self.users_per_cell):
            errors.append("users_per_cell must be > 0")
        if self.shadowing_db < 0:
            errors.append("shadowing_db must be >= 0")
        if self.eps <= 0:
            errors.append("eps must be > 0")
        if self.layout_mode not in ("uniform", "perturbed-grid"):
            errors.append(f"unknown layout_mode {self.layout_mode!r}")
        if self.path_loss_model not in PATH_LOSS_MODELS:
            errors.append(f"unknown path_loss_model {self.path_loss_model!r}")
        if errors:
            raise ValueError("; ".join(errors))

    def with_strategy(self, strategy) -> "ScenarioConfig":
        return replace(self, strategy=Strategy.parse(strategy))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def pathloss(self) -> PathLossModel:
        return PathLossModel.by_name(self.path_loss_model, self.radio.path_loss_exponent)

    def load_layout(self) -> list[BaseStation]:
        if self.layout_file is not None:
            from .ingest import load_bs_csv

            return load_bs_csv(self.layout_file, self.region)
        return synthesize_layout(self.bs_counts, self.region, self.layout_seed, self.layout_mode)

    def operator_params(self) -> tuple[OperatorParams, OperatorParams]:
        """Densities of this scenario for the analytic model."""
        layout = self.load_layout()
        out = []
        for op in (1, 2):
            n = sum(1 for bs in layout if bs.operator == op)
            lam = n / self.region.area
            out.append(OperatorParams(lam, self.bandwidth[op - 1], self.users_per_cell[op - 1] * lam))
        return tuple(out)


@dataclass
class ThroughputReport:
    """Per-user throughputs of one strategy, pooled over runs.

    ``throughput`` (bit/s), ``operator`` (subscription) and ``run`` are
    aligned arrays; every mean is the plain mean of the matching entries.
    """

    strategy: Strategy
    throughput: np.ndarray
    operator: np.ndarray
    run: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.throughput))

    def operator_mean(self, op: int) -> float:
        sel = self.operator == op
        return float(np.mean(self.throughput[sel])) if sel.any() else math.nan

    def run_means(self) -> list[float]:
        return [float(np.mean(self.throughput[self.run == r])) for r in np.unique(self.run)]

    def median(self, run: int | None = None) -> float:
        values = self.throughput if run is None else self.throughput[self.run == run]
        return float(np.median(values))

    def summary(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "n_users": int(self.throughput.size),
            "mean_bps": self.mean,
            "median_bps": self.median(),
            "operator_mean_bps": {str(op): self.operator_mean(op) for op in (1, 2)},
            "run_mean_bps": self.run_means(),
            "metadata": self.metadata,
        }


def emit_cdf(report: ThroughputReport | np.ndarray, n_points: int = 100) -> list[tuple[float, float]]:
    """Empirical CDF sampled at ``n_points`` quantile-spaced throughputs.

    Abscissae are the order statistics at levels k/n_points; ordinates are
    the fraction of users at or below each abscissa.
    """
    values = report.throughput if isinstance(report, ThroughputReport) else np.asarray(report)
    if values.size == 0:
        raise ValueError("cannot build a CDF from an empty report")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    ordered = np.sort(values)
    n = ordered.size
    levels = np.arange(1, n_points + 1) / n_points
    idx = np.clip(np.ceil(levels * n).astype(int) - 1, 0, n - 1)
    xs = np.unique(ordered[idx])
    ys = np.searchsorted(ordered, xs, side="right") / n
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def run_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([int(seed), 7, int(run)]).generate_state(1, np.uint64)[0])


@dataclass
class _RunSetup:
    bs_xy: np.ndarray
    bs_op: np.ndarray
    user_op: np.ndarray
    avg_gain: np.ndarray
    seed: int


def _setup_run(config: ScenarioConfig, layout: Sequence[BaseStation], run: int) -> _RunSetup:
    seed = run_seed(config.seed, run)
    bs_xy, bs_op = layout_arrays(layout)
    users = []
    for op in (1, 2):
        # the other operator's target is irrelevant to its own drop
        target = config.users_per_cell[op - 1]
        drop = deploy_users(target, layout, config.region, seed)
        users.extend(u for u in drop if u.operator == op)
    user_xy, user_op = user_arrays(users)
    dist = link_distances(bs_xy, user_xy, config.min_distance)
    shadow = draw_shadowing(len(layout), len(users), config.shadowing_db, seed)
    avg_gain = path_loss(dist, config.pathloss()) * shadow
    return _RunSetup(bs_xy, bs_op, user_op, np.atleast_2d(avg_gain).reshape(len(layout), len(users)), seed)


def _bands(config: ScenarioConfig):
    c1, c2 = config.subchannels
    return {1: np.arange(0, c1), 2: np.arange(c1, c1 + c2)}


def _grouped(users: np.ndarray, serving: np.ndarray) -> np.ndarray:
    # users of the same BS side by side, ascending within a BS, which is the
    # layout the allocator works in
    return users[np.argsort(serving[users], kind="stable")]


def _passes(config: ScenarioConfig, strategy: Strategy, setup: _RunSetup, serving: np.ndarray):
    """Scheduler passes of a strategy: (BS indices, user indices, subchannels, widths)."""
    bands = _bands(config)
    widths = {op: (config.bandwidth[op - 1] / config.subchannels[op - 1]
                   if config.subchannels[op - 1] else 0.0) for op in (1, 2)}
    if strategy is Strategy.MERGER:
        subs = np.concatenate([bands[1], bands[2]])
        w = np.concatenate([np.full(bands[1].size, widths[1]), np.full(bands[2].size, widths[2])])
        bs = np.arange(setup.bs_op.size)
        users = _grouped(np.arange(serving.size), serving)
        return [(bs, users, subs, w)] if bs.size and users.size else []
    out = []
    for op in (1, 2):
        bs = np.flatnonzero(setup.bs_op == op)
        users = _grouped(np.flatnonzero(np.isin(serving, bs)), serving)
        if bs.size and users.size and bands[op].size:
            out.append((bs, users, bands[op], np.full(bands[op].size, widths[op])))
    return out


def _simulate_run(config: ScenarioConfig, layout, strategies: Sequence[Strategy], run: int):
    setup = _setup_run(config, layout, run)
    n_sub = sum(config.subchannels)
    n_bs, n_users = setup.avg_gain.shape
    stats = {s: {"evaluations": 0, "tiles": 0} for s in strategies}
    plans = {}
    for s in strategies:
        serving = association_indices(setup.avg_gain, setup.bs_op, setup.user_op, s)
        plans[s] = (serving, _passes(config, s, setup, serving))
    totals = {s: np.zeros(n_users) for s in strategies}
    for frame in range(config.frames):
        fading = draw_fading(frame, n_sub, n_bs, n_users, setup.seed)
        for s in strategies:
            serving, passes = plans[s]
            for bs, users, subs, widths in passes:
                local = np.searchsorted(bs, serving[users])
                gain = fading[np.ix_(subs, bs, users)] * setup.avg_gain[np.ix_(bs, users)][None]
                state = allocate_frame(gain, local, config.slots, config.radio.tx_power,
                                       config.radio.noise_density, widths, eps=config.eps,
                                       literal_interference=config.literal_interference)
                totals[s][users] += state.user_rate_sum() / config.slots
                stats[s]["evaluations"] += state.n_evaluations
                stats[s]["tiles"] += int((state.assignment >= 0).sum())
    return {s: totals[s] / config.frames for s in strategies}, setup.user_op, stats


def _simulate(config: ScenarioConfig, strategies: Sequence[Strategy], workers: int = 1):
    """Per-run, per-strategy user throughputs with common random numbers.

    Runs are independent and may go to a thread pool; results are gathered
    in run order, so they do not depend on ``workers``.
    """
    layout = config.load_layout()
    job = lambda run: _simulate_run(config, layout, strategies, run)
    if workers > 1 and config.runs > 1:
        with ThreadPoolExecutor(min(workers, config.runs)) as pool:
            results = list(pool.map(job, range(config.runs)))
    else:
        results = [job(run) for run in range(config.runs)]
    out = {s: [r[0][s] for r in results] for s in strategies}
    user_ops = [r[1] for r in results]
    stats = {s: {key: sum(r[2][s][key] for r in results) for key in ("evaluations", "tiles")}
             for s in strategies}
    return out, user_ops, stats


def _report(config, strategy, per_run, user_ops, stats, wall) -> ThroughputReport:
    runs = np.concatenate([np.full(v.size, r) for r, v in enumerate(per_run)])
    meta = {
        "config_hash": config.with_strategy(strategy).digest(),
        "seed": config.seed,
        "run_seeds": [run_seed(config.seed, r) for r in range(config.runs)],
        "layout": config.layout_file or f"synthetic:{config.layout_mode}:{config.bs_counts}:{config.layout_seed}",
        "path_loss_model": config.path_loss_model,
        "wall_time_s": wall,
        **stats,
    }
    return ThroughputReport(strategy, np.concatenate(per_run), np.concatenate(user_ops), runs, meta)


def run_scenario(config: ScenarioConfig, workers: int = 1) -> ThroughputReport:
    """Simulate ``config.strategy``: fresh users and shadowing per run, fresh
    fading per frame, one scheduler pass per band (a single pooled pass
    under MERGER)."""
    start = time.perf_counter()
    per_run, user_ops, stats = _simulate(config, [config.strategy], workers)
    return _report(config, config.strategy, per_run[config.strategy], user_ops,
                   stats[config.strategy], time.perf_counter() - start)


@dataclass(frozen=True)
class ComparisonRow:
    strategy: Strategy
    operator: str  # "1", "2" or "all"
    mean_bps: float
    gain_vs_nocoop: float
    median_bps: float
    median_gain_vs_nocoop: float


def compare_strategies(config: ScenarioConfig, workers: int = 1) -> tuple[list[ComparisonRow], dict[Strategy, ThroughputReport]]:
    """All three strategies on identical users, shadowing and fading."""
    start = time.perf_counter()
    per_run, user_ops, stats = _simulate(config, STRATEGIES, workers)
    wall = time.perf_counter() - start
    reports = {s: _report(config, s, per_run[s], user_ops, stats[s], wall) for s in STRATEGIES}
    base = reports[Strategy.NOCOOP]
    rows = []
    for s in STRATEGIES:
        rep = reports[s]
        for op in ("1", "2", "all"):
            sel = slice(None) if op == "all" else rep.operator == int(op)
            values, ref = rep.throughput[sel], base.throughput[sel]
            if values.size == 0:
                continue
            mean, ref_mean = float(np.mean(values)), float(np.mean(ref))
            med, ref_med = float(np.median(values)), float(np.median(ref))
            rows.append(ComparisonRow(s, op, mean, mean / ref_mean - 1 if ref_mean else math.nan,
                                      med, med / ref_med - 1 if ref_med else math.nan))
    return rows, reports
