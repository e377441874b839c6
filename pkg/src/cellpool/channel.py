"""Link models for the OFDMA simulator: path loss, shadowing, Rayleigh fading."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .params import RadioParams

MIN_DISTANCE = 10.0
# antenna gain + cable/penetration loss + noise figure, net 0 dB
MISC_GAIN = 1.0

_SHADOW = 101
_FADE = 102


@dataclass(frozen=True)
class PathLossModel:
    """L(d) [dB] = intercept_db + slope_db * log10(d / 1 m)."""

    name: str
    intercept_db: float
    slope_db: float

    @classmethod
    def literal(cls) -> "PathLossModel":
        """17.39 + 3.76 log10(d): the slope taken at face value, 3.76 dB/decade."""
        return cls("literal", 17.39, 3.76)

    @classmethod
    def pure_exponent(cls, alpha: float = 3.76) -> "PathLossModel":
        """d^-alpha, the law used by the stochastic-geometry model."""
        return cls("pure-exponent", 0.0, 10.0 * alpha)

    @classmethod
    def log_distance(cls, alpha: float = 3.76) -> "PathLossModel":
        """17.39 dB at 1 m with a 10 * alpha dB/decade slope."""
        return cls("log-distance", 17.39, 10.0 * alpha)

    @classmethod
    def by_name(cls, name: str, alpha: float = 3.76) -> "PathLossModel":
        if name == "literal":
            return cls.literal()
        if name == "pure-exponent":
            return cls.pure_exponent(alpha)
        if name == "log-distance":
            return cls.log_distance(alpha)
        raise ValueError(f"unknown path-loss model {name!r}")

    def loss_db(self, d):
        return self.intercept_db + self.slope_db * np.log10(d)


def path_loss(d, model: PathLossModel):
    """Linear power gain 10^(-L(d)/10). Distances must already be > 0."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("path loss needs distances > 0 (clamp upstream)")
    out = 10.0 ** (-model.loss_db(d) / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinkGain:
    path_loss_linear: float
    shadow_linear: float
    fast_fade_linear: float

    def __post_init__(self):
        if min(self.path_loss_linear, self.shadow_linear, self.fast_fade_linear) <= 0:
            raise ValueError("link gain components must be > 0")

    @property
    def combined(self) -> float:
        return self.path_loss_linear * self.shadow_linear * self.fast_fade_linear * MISC_GAIN


def link_distances(bs_xy: np.ndarray, user_xy: np.ndarray, min_distance: float = MIN_DISTANCE):
    """(B, N) BS-user distances clamped below at ``min_distance``."""
    diff = bs_xy[:, None, :] - user_xy[None, :, :]
    return np.maximum(np.hypot(diff[..., 0], diff[..., 1]), min_distance)


def draw_shadowing(n_bs: int, n_users: int, sigma_db: float, seed: int) -> np.ndarray:
    """(B, N) log-normal shadowing, linear. Row b comes from its own substream,
    so a BS-user value does not depend on how many BSs there are."""
    out = np.empty((n_bs, n_users))
    for b in range(n_bs):
        out[b] = substream(seed, _SHADOW, b).standard_normal(n_users)
    return 10.0 ** (sigma_db * out / 10.0)


def draw_fading(frame_index: int, n_subchannels: int, n_bs: int, n_users: int,
                seed: int) -> np.ndarray:
    """(C, B, N) unit-mean exponential power fades, block-constant over a frame."""
    out = np.empty((n_subchannels, n_bs, n_users))
    for c in range(n_subchannels):
        out[c] = substream(seed, _FADE, frame_index, c).standard_exponential((n_bs, n_users))
    return out


@dataclass(frozen=True)
class ChannelRealization:
    """Channel state of one frame.

    ``distance`` and ``shadow`` are (B, N) and stay fixed over a scenario
    run; ``fading`` is (C, B, N) and is redrawn every frame.
    """

    distance: np.ndarray
    shadow: np.ndarray
    fading: np.ndarray
    path_loss_gain: np.ndarray
    frame_index: int

    @property
    def average_gain(self) -> np.ndarray:
        """(B, N) long-term gain: path loss x shadowing, no fast fading."""
        return self.path_loss_gain * self.shadow * MISC_GAIN

    def gain(self) -> np.ndarray:
        """(C, B, N) instantaneous link gains."""
        return self.fading * self.average_gain[None]

    def link(self, b: int, m: int, c: int) -> LinkGain:
        return LinkGain(float(self.path_loss_gain[b, m]), float(self.shadow[b, m]),
                        float(self.fading[c, b, m]))


def draw_channel(frame_index: int, bs_xy: np.ndarray, user_xy: np.ndarray, sigma_db: float,
                 seed: int, n_subchannels: int,
                 model: PathLossModel = PathLossModel.log_distance(),
                 min_distance: float = MIN_DISTANCE) -> ChannelRealization:
    """Realization for ``frame_index``; a pure function of its arguments."""
    distance = link_distances(np.asarray(bs_xy, float), np.asarray(user_xy, float), min_distance)
    n_bs, n_users = distance.shape
    shadow = draw_shadowing(n_bs, n_users, sigma_db, seed)
    fading = draw_fading(frame_index, n_subchannels, n_bs, n_users, seed)
    return ChannelRealization(distance, shadow, fading, path_loss(distance, model), frame_index)


def tile_rate(user: int, subchannel: int, serving_bs: int, active, realization: ChannelRealization,
              radio: RadioParams, n_subchannels: int, subchannel_bandwidth: float,
              literal_interference: bool = False) -> float:
    """Shannon rate (bit/s) of ``user`` on one tile.

    ``active`` is the boolean BS activity on this (subchannel, slot); the
    serving BS is treated as transmitting whatever its flag says. Every BS
    splits its power equally over its ``n_subchannels``. With
    ``literal_interference`` the interferer terms carry no transmit power,
    matching the printed form of the rate expression.
    """
    power = radio.tx_power / n_subchannels
    g = realization.gain()[subchannel, :, user]
    others = np.asarray(active, dtype=bool).copy()
    others[serving_bs] = False
    interferer_power = 1.0 if literal_interference else power
    denom = radio.noise_density * subchannel_bandwidth + interferer_power * math.fsum(g[others])
    return subchannel_bandwidth * math.log2(1.0 + power * g[serving_bs] / denom)
