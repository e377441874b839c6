import itertools
import math
import time

import numpy as np
import pytest

from cellpool.scheduler import (AllocationState, allocate_frame, marginal_utility, user_throughput,
                                users_by_bs, utility)

P, N0 = 40.0, 4e-21
W = 312_500.0


def random_instance(T, C, B, per_bs, seed=0, extent=2e4):
    rng = np.random.default_rng(seed)
    n = B * per_bs
    bs = rng.uniform(0, extent, (B, 2))
    users = rng.uniform(0, extent, (n, 2))
    d = np.maximum(np.hypot(*(bs[:, None] - users[None]).transpose(2, 0, 1)), 10.0)
    gain = 10 ** (-(17.39 + 37.6 * np.log10(d)) / 10) * rng.exponential(size=(C, B, n))
    return gain, np.repeat(np.arange(B), per_bs)


def reference_allocate(gain, serving, T, eps=1.0, trace=None):
    """Line-by-line Python version of the greedy allocator."""
    C, B, N = gain.shape
    p = P / C
    noise = N0 * W
    assignment = -np.ones((B, C, T), dtype=int)
    rates = np.zeros((B, C, T))
    R = [0.0] * N
    count = [0] * B
    U = lambda x: math.log(eps + x)

    def rate(user, server, active):
        interf = noise + sum(p * gain[c, a, user] for a in active if a != server)
        return W * math.log2(1 + p * gain[c, server, user] / interf)

    for t in range(T):
        for c in range(C):
            active = []
            for b in sorted(range(B), key=lambda b: (count[b], b)):
                members = [m for m in range(N) if serving[m] == b]
                if not members:
                    continue
                trial = active + [b]
                loss = sum(U(R[assignment[a, c, t]])
                           - U(R[assignment[a, c, t]] - rates[a, c, t]
                               + rate(assignment[a, c, t], a, trial)) for a in active)
                scores = [(U(R[m] + rate(m, b, trial)) - U(R[m]), -m) for m in members]
                best, neg_m = max(scores)
                m = -neg_m
                if best - loss > 0:
                    for a in active:
                        i = assignment[a, c, t]
                        new = rate(i, a, trial)
                        R[i] += new - rates[a, c, t]
                        rates[a, c, t] = new
                    r = rate(m, b, trial)
                    R[m] += r
                    rates[b, c, t] = r
                    assignment[b, c, t] = m
                    count[b] += 1
                    active = trial
                    if trace is not None:
                        trace.append(sum(U(x) for x in R))
    return assignment, rates


def run(gain, serving, T, **kw):
    return allocate_frame(gain, serving, T, P, N0, W, **kw)


def test_single_tile_single_user():
    state = run(np.full((1, 1, 1), 1e-10), np.array([0]), 1)
    assert state.assignment[0, 0, 0] == 0
    assert state.tile_rates[0, 0, 0] > 0


@pytest.mark.parametrize("seed", range(4))
def test_kernel_matches_reference(seed):
    gain, serving = random_instance(3, 4, 4, 3, seed=seed, extent=3000)
    state = run(gain, serving, 3)
    trace = []
    assignment, rates = reference_allocate(gain, serving, 3, trace=trace)
    np.testing.assert_array_equal(state.assignment, assignment)
    np.testing.assert_allclose(state.tile_rates, rates, rtol=1e-12)
    # total utility never drops across accepted assignments
    assert all(b >= a for a, b in zip(trace, trace[1:]))


def test_invariants_on_random_instance():
    gain, serving = random_instance(10, 8, 6, 15, seed=5)
    state = run(gain, serving, 10)
    X, Y = state.X, state.Y
    for b in range(6):
        members = np.flatnonzero(serving == b)
        # exclusivity: at most one of b's users on a tile, none of anyone else's
        served = state.assignment[b][state.assignment[b] >= 0]
        assert np.all(np.isin(served, members))
        assert np.all(X[members].sum(axis=0) == Y[b])
    assert X.sum() == Y.sum()
    assert np.all(state.R >= 0) and np.all(np.diff(state.R, axis=1) >= 0)
    assert np.all(state.tile_rates[~Y] == 0)
    np.testing.assert_allclose(state.R[:, -1], state.user_rate_sum(), rtol=1e-12)


def test_permissions_respected():
    gain, serving = random_instance(4, 6, 3, 5, seed=6)
    permitted = np.zeros((3, 6), dtype=bool)
    permitted[0, :3] = permitted[1, 3:] = permitted[2, ::2] = True
    state = run(gain, serving, 4, permitted=permitted)
    assert not np.any(state.Y & ~permitted[:, :, None])


def test_deterministic():
    gain, serving = random_instance(5, 5, 5, 8, seed=7)
    a, b = run(gain, serving, 5), run(gain, serving, 5)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    np.testing.assert_array_equal(a.tile_rates, b.tile_rates)


def test_visit_order_favours_fewest_assigned():
    # BS 1 would be blocked by BS 0 on every tile if it were always second
    gain = np.array([[[1e-9, 9e-10], [8e-10, 1e-9]]])  # (C=1, B=2, N=2): strong cross-gain
    state = run(np.repeat(gain, 1, axis=0), np.array([0, 1]), 4)
    on = state.Y[:, 0, :]
    assert on[0].sum() >= 1 and on[1].sum() >= 1


def test_far_apart_cells_are_independent():
    rng = np.random.default_rng(8)
    C, T, per_bs = 4, 6, 5
    gain = np.full((C, 2, 2 * per_bs), 1e-40)
    gain[:, 0, :per_bs] = rng.uniform(1e-10, 1e-9, (C, per_bs))
    gain[:, 1, per_bs:] = rng.uniform(1e-10, 1e-9, (C, per_bs))
    serving = np.repeat([0, 1], per_bs)
    joint = run(gain, serving, T)
    assert joint.Y.all()
    for b in (0, 1):
        users = np.flatnonzero(serving == b)
        alone = run(gain[:, [b]][:, :, users], np.zeros(per_bs, dtype=int), T)
        np.testing.assert_array_equal(users[alone.assignment[0]], joint.assignment[b])
        np.testing.assert_allclose(alone.tile_rates[0], joint.tile_rates[b], rtol=1e-12)


def _utilities(gain, pattern, eps=1.0):
    """Per-user utilities of a 2 BS x 2 user x 1 tile pattern (user b on BS b)."""
    p, noise = P, N0 * W
    out = []
    for b in (0, 1):
        if not pattern[b]:
            out.append(math.log(eps))
            continue
        interf = noise + sum(p * gain[0, a, b] for a in (0, 1) if a != b and pattern[a])
        out.append(math.log(eps + W * math.log2(1 + p * gain[0, b, b] / interf)))
    return out


@pytest.mark.parametrize("cross", [1e-16, 1e-12, 1e-11, 5e-11, 1e-10, 2e-10])
def test_tiny_instance_not_dominated(cross):
    gain = np.array([[[1e-10, cross], [cross, 1e-10]]])
    state = run(gain, np.array([0, 1]), 1)
    chosen = _utilities(gain, tuple(state.Y[:, 0, 0]))
    for pattern in itertools.product((False, True), repeat=2):
        other = _utilities(gain, pattern)
        dominates = all(o >= c for o, c in zip(other, chosen)) and any(
            o > c + 1e-12 for o, c in zip(other, chosen))
        assert not dominates, (pattern, other, chosen)


def test_colocated_strong_interference_one_transmitter():
    gain = np.full((1, 2, 2), 1e-9)
    state = run(gain, np.array([0, 1]), 1, eps=1e6)
    assert state.Y.sum() == 1


def test_marginal_utility_empty_tile_has_no_loss():
    gain, serving = random_instance(2, 2, 2, 2, seed=9)
    state = AllocationState(-np.ones((2, 2, 2), dtype=int), np.zeros((2, 2, 2)), np.zeros((4, 2)))
    delta = marginal_utility(0, 0, 0, 0, state, gain, P, N0, W)
    assert delta.loss == 0.0 and delta.gain > 0
    assert delta.net == delta.gain - delta.loss


def test_marginal_utility_hand_expanded():
    # BS 0 already serves user 0 on (c=0, t=0); evaluate BS 1 serving user 1
    g = np.array([[[2e-10, 3e-11], [5e-11, 4e-10]]])  # g[c, b, m]
    p, noise, eps = P, N0 * W, 1.0
    r0_before = W * math.log2(1 + p * 2e-10 / noise)
    R = np.array([[1e5 + r0_before], [2e5]])
    assignment = -np.ones((2, 1, 1), dtype=int)
    assignment[0, 0, 0] = 0
    rates = np.zeros((2, 1, 1))
    rates[0, 0, 0] = r0_before
    state = AllocationState(assignment, rates, R)
    delta = marginal_utility(1, 1, 0, 0, state, g, P, N0, W, eps)

    r1 = W * math.log2(1 + p * 4e-10 / (noise + p * 3e-11))
    r0_after = W * math.log2(1 + p * 2e-10 / (noise + p * 5e-11))
    gain = math.log(eps + 2e5 + r1) - math.log(eps + 2e5)
    loss = math.log(eps + R[0, 0]) - math.log(eps + R[0, 0] - r0_before + r0_after)
    assert delta.gain == pytest.approx(gain, rel=1e-12)
    assert delta.loss == pytest.approx(loss, rel=1e-12)
    with pytest.raises(ValueError):
        marginal_utility(0, 0, 0, 0, state, g, P, N0, W)


def test_gain_shrinks_with_prior_rate():
    gain, _ = random_instance(1, 1, 1, 1, seed=10)
    gains = []
    for prior in (0.0, 1e3, 1e5, 1e7):
        state = AllocationState(-np.ones((1, 1, 1), dtype=int), np.zeros((1, 1, 1)),
                                np.array([[prior]]))
        gains.append(marginal_utility(0, 0, 0, 0, state, gain, P, N0, W).gain)
    assert all(a > b for a, b in zip(gains, gains[1:]))


def test_user_throughput_time_share():
    full = AllocationState(np.zeros((1, 1, 4), dtype=int), np.full((1, 1, 4), 5e5), np.zeros((1, 4)))
    assert user_throughput([full])[0] == pytest.approx(5e5)
    half = AllocationState(np.array([[[0, -1, 0, -1]]]), np.array([[[5e5, 0, 5e5, 0]]]), np.zeros((1, 4)))
    assert user_throughput([half])[0] == pytest.approx(2.5e5)
    assert user_throughput([full, half])[0] == pytest.approx(3.75e5)


def test_proportional_fair_equal_time_split():
    # static channel, one strong and one weak user: log utility gives each
    # about half of the tiles
    C, T = 8, 60
    gain = np.empty((C, 1, 2))
    gain[:, 0, 0] = 1e-9
    gain[:, 0, 1] = 1e-12
    state = run(gain, np.array([0, 0]), T)
    tiles = np.bincount(state.assignment[0].ravel(), minlength=2)
    assert abs(tiles[0] - tiles[1]) <= 0.02 * tiles.sum()


def test_users_by_bs_csr():
    ptr, members = users_by_bs(np.array([2, 0, 2, 1, 0]), 4)
    assert list(ptr) == [0, 2, 3, 5, 5]
    assert list(members) == [1, 4, 3, 0, 2]


def test_utility_floor():
    assert utility(0.0) == 0.0
    assert utility(np.e - 1) == pytest.approx(1.0)


BASE = dict(T=48, C=16, B=8, per_bs=100)


def scaling_measurements(axis, factors=(1, 2, 3, 4), reps=11):
    """Best-of-``reps`` CPU time per size; sizes are interleaved so slow
    phases of a shared machine hit every size alike."""
    run(*random_instance(2, 2, 2, 2), 2)  # compile
    cases = []
    for f in factors:
        p = dict(BASE)
        p[axis] *= f
        gain, serving = random_instance(p["T"], p["C"], p["B"], p["per_bs"], seed=1)
        cases.append((gain, serving, p["T"]))
    times = np.full(len(factors), np.inf)
    evals = np.zeros(len(factors))
    for _ in range(reps):
        for i, (gain, serving, T) in enumerate(cases):
            start = time.process_time()
            state = run(gain, serving, T)
            times[i] = min(times[i], time.process_time() - start)
            evals[i] = state.n_evaluations
    return np.array(factors, float), times, evals


def linear_fit_deviation(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    return slope, float(np.max(np.abs(y - fit) / fit))


@pytest.mark.parametrize("axis", ["T", "C", "B", "per_bs"])
def test_operation_count_and_runtime_linear(axis):
    x, times, evals = scaling_measurements(axis)
    base = BASE["T"] * BASE["C"] * BASE["B"] * BASE["per_bs"]
    np.testing.assert_array_equal(evals, base * x)
    slope, deviation = linear_fit_deviation(x, times)
    assert slope > 0 and deviation <= 0.25
