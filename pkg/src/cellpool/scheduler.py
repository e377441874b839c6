"""Centralised greedy multi-cell tile allocation with log utility.

For every slot, subchannel and BS (fewest active tiles first) the scheduler
picks the BS's user with the largest utility gain, and switches the BS on
only if that gain beats the utility the already-scheduled users on the
same tile lose to the new interference.

Utilities are U(R) = ln(eps + R), with R a user's accumulated rate in the
current frame; eps keeps the first tile finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

DEFAULT_EPS = 1.0  # bit/s


@dataclass(frozen=True)
class UtilityDelta:
    gain: float
    loss: float

    @property
    def net(self) -> float:
        return self.gain - self.loss


@dataclass
class AllocationState:
    """Allocation of one frame.

    ``assignment[b, c, t]`` is the local index of the user BS ``b`` serves on
    tile (c, t), or -1 if the BS is silent; ``tile_rates`` holds the final
    rate of that tile (bit/s). ``R[m, t]`` is user m's accumulated rate up to
    and including slot t.
    """

    assignment: np.ndarray
    tile_rates: np.ndarray
    R: np.ndarray
    n_evaluations: int = 0

    @property
    def n_slots(self) -> int:
        return self.assignment.shape[2]

    @property
    def Y(self) -> np.ndarray:
        return self.assignment >= 0

    @property
    def X(self) -> np.ndarray:
        n_users = self.R.shape[0]
        _, n_sub, n_slots = self.assignment.shape
        X = np.zeros((n_users, n_sub, n_slots), dtype=bool)
        b, c, t = np.nonzero(self.assignment >= 0)
        X[self.assignment[b, c, t], c, t] = True
        return X

    def user_rate_sum(self) -> np.ndarray:
        """Sum of assigned tile rates per user over the frame."""
        out = np.zeros(self.R.shape[0])
        mask = self.assignment >= 0
        np.add.at(out, self.assignment[mask], self.tile_rates[mask])
        return out


def users_by_bs(serving: np.ndarray, n_bs: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR layout of the users of each BS, ascending user index."""
    serving = np.asarray(serving, dtype=np.int64)
    order = np.argsort(serving, kind="stable")
    counts = np.bincount(serving, minlength=n_bs)
    ptr = np.zeros(n_bs + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, order.astype(np.int64)


@numba.njit(cache=True, nogil=True)
def _allocate(gain, permitted, n_slots, signal_power, interferer_power, noise, bandwidth, eps, ptr):
    # users are grouped by serving BS: BS b serves users ptr[b] .. ptr[b + 1] - 1
    n_sub, n_bs, n_users = gain.shape
    assignment = -np.ones((n_bs, n_sub, n_slots), dtype=np.int64)
    tile_rates = np.zeros((n_bs, n_sub, n_slots))
    R_hist = np.zeros((n_users, n_slots))
    R = np.zeros(n_users)
    count = np.zeros(n_bs, dtype=np.int64)
    order = np.empty(n_bs, dtype=np.int64)
    active = np.empty(n_bs, dtype=np.int64)
    sched_user = np.empty(n_bs, dtype=np.int64)
    sched_rate = np.empty(n_bs)
    sched_interf = np.empty(n_bs)
    new_rate = np.empty(n_bs)
    new_interf = np.empty(n_bs)
    cand_interf = np.empty(n_users)
    n_evals = 0

    for t in range(n_slots):
        for c in range(n_sub):
            # Counts of BSs still waiting in this round do not change, so the
            # "fewest assigned tiles" order is fixed at the start of the round.
            for b in range(n_bs):
                order[b] = b
            for i in range(1, n_bs):
                b = order[i]
                j = i - 1
                while j >= 0 and count[order[j]] > count[b]:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = b

            n_active = 0
            for k in range(n_bs):
                b = order[k]
                if not permitted[b, c] or ptr[b + 1] == ptr[b]:
                    continue
                # loss of the users already on this tile
                loss = 0.0
                for q in range(n_active):
                    a = active[q]
                    i = sched_user[a]
                    interf = sched_interf[a] + interferer_power * gain[c, b, i]
                    r = bandwidth[c] * math.log2(1.0 + signal_power * gain[c, a, i] / interf)
                    new_interf[q] = interf
                    new_rate[q] = r
                    loss += math.log(eps + R[i]) - math.log(eps + R[i] - sched_rate[a] + r)
                # best candidate of b
                best = -np.inf
                best_m = -1
                best_r = 0.0
                best_i = 0.0
                lo, hi = ptr[b], ptr[b + 1]
                # interference on every candidate, accumulated one active BS
                # at a time (same summation order as a per-user loop)
                for m in range(lo, hi):
                    cand_interf[m] = noise[c]
                for q in range(n_active):
                    a = active[q]
                    for m in range(lo, hi):
                        cand_interf[m] += interferer_power * gain[c, a, m]
                for m in range(lo, hi):
                    interf = cand_interf[m]
                    r = bandwidth[c] * math.log2(1.0 + signal_power * gain[c, b, m] / interf)
                    g = math.log(eps + R[m] + r) - math.log(eps + R[m])
                    n_evals += 1
                    if g > best:
                        best = g
                        best_m = m
                        best_r = r
                        best_i = interf
                if best - loss > 0.0:
                    for q in range(n_active):
                        a = active[q]
                        i = sched_user[a]
                        R[i] += new_rate[q] - sched_rate[a]
                        sched_rate[a] = new_rate[q]
                        sched_interf[a] = new_interf[q]
                        tile_rates[a, c, t] = new_rate[q]
                    R[best_m] += best_r
                    sched_user[b] = best_m
                    sched_rate[b] = best_r
                    sched_interf[b] = best_i
                    active[n_active] = b
                    n_active += 1
                    assignment[b, c, t] = best_m
                    tile_rates[b, c, t] = best_r
                    count[b] += 1
        for m in range(n_users):
            R_hist[m, t] = R[m]
    return assignment, tile_rates, R_hist, n_evals


def allocate_frame(gain: np.ndarray, serving: np.ndarray, n_slots: int, tx_power: float,
                   noise_density: float, subchannel_bandwidth, permitted: np.ndarray | None = None,
                   eps: float = DEFAULT_EPS, literal_interference: bool = False) -> AllocationState:
    """Run the greedy allocator over one frame.

    Args:
        gain: (C, B, N) instantaneous link gains (path loss x shadowing x fading).
        serving: (N,) serving BS index of each user.
        n_slots: slots per frame.
        tx_power: BS transmit power in W, split evenly over the C subchannels.
        noise_density: W/Hz.
        subchannel_bandwidth: Hz, scalar or one value per subchannel.
        permitted: optional (B, C) mask of subchannels each BS may use.
        eps: utility floor in bit/s.
        literal_interference: drop the per-subchannel power from the
            interference terms (printed form of the rate expression).
    """
    gain = np.ascontiguousarray(gain, dtype=np.float64)
    n_sub, n_bs, n_users = gain.shape
    if n_slots < 1 or n_sub < 1:
        raise ValueError("need at least one slot and one subchannel")
    serving = np.asarray(serving, dtype=np.int64)
    if serving.shape != (n_users,):
        raise ValueError("serving must have one entry per user")
    if n_users and (serving.min() < 0 or serving.max() >= n_bs):
        raise ValueError("serving BS index out of range")
    bw = np.broadcast_to(np.asarray(subchannel_bandwidth, dtype=np.float64), (n_sub,)).copy()
    if permitted is None:
        permitted = np.ones((n_bs, n_sub), dtype=np.bool_)
    permitted = np.ascontiguousarray(permitted, dtype=np.bool_)
    ptr, members = users_by_bs(serving, n_bs)
    power = tx_power / n_sub
    # the kernel wants each BS's users contiguous; the stable order keeps
    # the lowest-index tie break, and callers that already group users by
    # BS skip the copy
    grouped = bool(np.all(members == np.arange(n_users)))
    assignment, tile_rates, R, n_evals = _allocate(
        gain if grouped else np.ascontiguousarray(gain[:, :, members]), permitted, int(n_slots),
        power, 1.0 if literal_interference else power, noise_density * bw, bw, float(eps), ptr)
    if not grouped:
        on = assignment >= 0
        assignment[on] = members[assignment[on]]
        R_grouped, R = R, np.empty_like(R)
        R[members] = R_grouped
    return AllocationState(assignment, tile_rates, R, int(n_evals))


def utility(R, eps: float = DEFAULT_EPS):
    return np.log(eps + np.asarray(R, dtype=float))


def marginal_utility(m: int, b: int, c: int, t: int, state: AllocationState, gain: np.ndarray,
                     tx_power: float, noise_density: float, subchannel_bandwidth: float,
                     eps: float = DEFAULT_EPS) -> UtilityDelta:
    """Gain of serving user ``m`` from BS ``b`` on tile (c, t) and the loss
    inflicted on users already scheduled there, both from ``state``.

    Reference implementation for a partially built state; the allocator
    inlines the same arithmetic.
    """
    if state.assignment[b, c, t] >= 0:
        raise ValueError(f"BS {b} is already active on tile ({c}, {t})")
    n_sub = gain.shape[0]
    power = tx_power / n_sub
    noise = noise_density * subchannel_bandwidth
    Y = state.assignment[:, c, t] >= 0
    Yp = Y.copy()
    Yp[b] = True

    def rate(user, server, pattern):
        others = pattern.copy()
        others[server] = False
        interf = noise + power * gain[c, others, user].sum()
        return subchannel_bandwidth * math.log2(1 + power * gain[c, server, user] / interf)

    R = state.R[:, t]
    u = lambda x: math.log(eps + x)
    gain_m = u(R[m] + rate(m, b, Yp)) - u(R[m])
    loss = 0.0
    for a in np.flatnonzero(Y):
        i = state.assignment[a, c, t]
        loss += u(R[i]) - u(R[i] - rate(i, a, Y) + rate(i, a, Yp))
    return UtilityDelta(gain_m, loss)


def user_throughput(states, n_users: int | None = None) -> np.ndarray:
    """Per-user throughput (bit/s) averaged over frames.

    Each frame contributes (sum of the user's tile rates) / T: a tile held
    for one of T slots delivers its rate for 1/T of the frame.
    """
    states = list(states)
    if not states:
        raise ValueError("need at least one frame")
    n = states[0].R.shape[0] if n_users is None else n_users
    total = np.zeros(n)
    for s in states:
        total += s.user_rate_sum() / s.n_slots
    return total / len(states)
