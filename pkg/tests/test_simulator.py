import math

import numpy as np
import pytest
from scipy import special

from cellpool.channel import PathLossModel, link_distances, path_loss
from cellpool.deployment import deploy_users, layout_arrays, user_arrays
from cellpool.params import Strategy
from cellpool.simulator import (STRATEGIES, ScenarioConfig, ThroughputReport, _bands, _passes,
                                _setup_run, compare_strategies, emit_cdf, run_scenario, run_seed)

SMALL = ScenarioConfig(bs_counts=(4, 3), users_per_cell=(5, 5), subchannels=(6, 6), slots=8,
                       frames=2, runs=2)


def test_deterministic_reports():
    a, b = run_scenario(SMALL), run_scenario(SMALL)
    np.testing.assert_array_equal(a.throughput, b.throughput)
    assert a.metadata["config_hash"] == b.metadata["config_hash"]
    c = run_scenario(ScenarioConfig(**{**SMALL.__dict__, "seed": 1}))
    assert not np.array_equal(a.throughput, c.throughput)


def test_thread_count_does_not_change_results():
    a = run_scenario(SMALL.with_strategy("merger"))
    b = run_scenario(SMALL.with_strategy("merger"), workers=2)
    np.testing.assert_array_equal(a.throughput, b.throughput)


def test_compare_uses_common_random_numbers():
    _, reports = compare_strategies(SMALL)
    for s in STRATEGIES:
        alone = run_scenario(SMALL.with_strategy(s))
        np.testing.assert_array_equal(reports[s].throughput, alone.throughput)
        np.testing.assert_array_equal(reports[s].operator, alone.operator)


def test_report_means_are_plain_means():
    rep = run_scenario(SMALL)
    assert rep.mean == pytest.approx(float(np.mean(rep.throughput)), rel=0, abs=0)
    for op in (1, 2):
        assert rep.operator_mean(op) == float(np.mean(rep.throughput[rep.operator == op]))
    assert rep.throughput.size == 2 * (20 + 15)
    summary = rep.summary()
    assert summary["n_users"] == 70 and set(summary["operator_mean_bps"]) == {"1", "2"}


def test_metadata_provenance():
    meta = run_scenario(SMALL).metadata
    assert meta["seed"] == 0 and meta["run_seeds"] == [run_seed(0, 0), run_seed(0, 1)]
    assert meta["path_loss_model"] == "log-distance"
    assert meta["evaluations"] > 0 and meta["tiles"] > 0


def test_single_link_matches_fading_expectation():
    """One BS, one user, no shadowing: every tile goes to the user, so its
    throughput is the bandwidth times E[log2(1 + snr h)], h ~ Exp(1)."""
    config = ScenarioConfig(bs_counts=(1, 0), users_per_cell=(1, 1), bandwidth=(10e6, 0.0),
                            subchannels=(32, 0), slots=4, frames=200, runs=1, shadowing_db=0.0,
                            layout_mode="uniform", seed=3)
    rep = run_scenario(config)
    layout = config.load_layout()
    users = deploy_users(1, layout, config.region, run_seed(config.seed, 0))
    d = link_distances(layout_arrays(layout)[0], user_arrays(users)[0])[0, 0]
    w = 10e6 / 32
    snr = config.radio.tx_power / 32 * path_loss(d, PathLossModel.log_distance()) / (
        config.radio.noise_density * w)
    # E[ln(1 + s h)] = e^(1/s) E1(1/s)
    expected = 10e6 * math.exp(1 / snr) * special.exp1(1 / snr) / math.log(2)
    # 6400 independent fades; relative spread of log2(1 + s h) is well under 1
    assert rep.throughput[0] == pytest.approx(expected, rel=4 / math.sqrt(6400))


def test_second_operator_absent_all_strategies_equal():
    config = ScenarioConfig(bs_counts=(5, 0), users_per_cell=(8, 8), bandwidth=(10e6, 0.0),
                            subchannels=(8, 0), slots=6, frames=2, runs=2)
    _, reports = compare_strategies(config)
    base = reports[Strategy.NOCOOP].throughput
    assert np.all(reports[Strategy.NOCOOP].operator == 1)
    for s in (Strategy.FLEXROAM, Strategy.MERGER):
        np.testing.assert_array_equal(reports[s].throughput, base)


def test_band_isolation_and_merger_pass():
    config = ScenarioConfig(bs_counts=(4, 3), users_per_cell=(5, 5))
    layout = config.load_layout()
    setup = _setup_run(config, layout, 0)
    bands = _bands(config)
    assert list(bands[1]) == list(range(32)) and list(bands[2]) == list(range(32, 64))
    from cellpool.deployment import association_indices
    for s in (Strategy.NOCOOP, Strategy.FLEXROAM):
        serving = association_indices(setup.avg_gain, setup.bs_op, setup.user_op, s)
        for bs, users, subs, widths in _passes(config, s, setup, serving):
            ops = set(setup.bs_op[bs])
            assert len(ops) == 1
            assert list(subs) == list(bands[ops.pop()])
            assert np.all(np.isin(serving[users], bs))
    serving = association_indices(setup.avg_gain, setup.bs_op, setup.user_op, "merger")
    (only,) = _passes(config, Strategy.MERGER, setup, serving)
    assert only[2].size == 64 and only[0].size == 7


def test_small_scenario_ordering():
    rows, _ = compare_strategies(SMALL)
    means = {r.strategy: r.mean_bps for r in rows if r.operator == "all"}
    assert means[Strategy.NOCOOP] < means[Strategy.FLEXROAM] < means[Strategy.MERGER]


def test_config_validation_lists_problems():
    with pytest.raises(ValueError) as info:
        ScenarioConfig(frames=0, runs=0, path_loss_model="hata")
    text = str(info.value)
    assert "frames" in text and "runs" in text and "path_loss_model" in text


def test_emit_cdf_single_user_step():
    assert emit_cdf(np.array([5.0]), 10) == [(5.0, 1.0)]


def test_emit_cdf_properties():
    values = np.random.default_rng(0).lognormal(12, 1, 1001)
    cdf = emit_cdf(values, 50)
    xs, ys = zip(*cdf)
    assert all(np.diff(xs) > 0) and all(np.diff(ys) >= 0)
    assert xs[-1] == values.max() and ys[-1] == 1.0
    ordered = np.sort(values)
    for x, y in cdf:
        # right-continuous ECDF at x
        assert y == np.mean(values <= x)
        # the y-quantile of the sample is x, within one order statistic
        k = math.ceil(y * values.size) - 1
        assert ordered[max(k - 1, 0)] <= x <= ordered[min(k + 1, values.size - 1)]


def test_emit_cdf_rejects_empty():
    with pytest.raises(ValueError):
        emit_cdf(np.array([]))
    with pytest.raises(ValueError):
        emit_cdf(np.array([1.0]), 0)


def test_report_from_arrays():
    rep = ThroughputReport(Strategy.NOCOOP, np.array([1.0, 3.0, 5.0]), np.array([1, 2, 2]),
                           np.array([0, 0, 1]))
    assert rep.run_means() == [2.0, 5.0]
    assert rep.median(run=0) == 2.0
    assert math.isnan(ThroughputReport(Strategy.NOCOOP, np.array([1.0]), np.array([1]),
                                       np.array([0])).operator_mean(2))
