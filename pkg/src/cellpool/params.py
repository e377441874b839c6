"""Shared parameter types and unit conversions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


class Strategy(str, enum.Enum):
    """Cooperation level between the two operators."""

    NOCOOP = "nocoop"
    FLEXROAM = "flexroam"
    MERGER = "merger"

    @classmethod
    def parse(cls, value: "Strategy | str") -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class OperatorParams:
    """One operator's deployment.

    Attributes:
        bs_density: base stations per m^2.
        bandwidth: licensed band in Hz.
        user_density: subscribers per m^2.

    A zero density/bandwidth operator is allowed so that the cooperative
    strategies can be probed in their single-operator limit; the
    non-cooperative rate rejects it.
    """

    bs_density: float
    bandwidth: float
    user_density: float

    def __post_init__(self):
        for name in ("bs_density", "bandwidth", "user_density"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if self.user_density < self.bs_density:
            raise ValueError(
                f"user_density ({self.user_density:g}) must be >= bs_density ({self.bs_density:g})"
            )

    @property
    def users_per_cell(self) -> float:
        return self.user_density / self.bs_density

    def scaled_users(self, factor: float) -> "OperatorParams":
        return OperatorParams(self.bs_density, self.bandwidth, self.user_density * factor)


@dataclass(frozen=True)
class RadioParams:
    """Link budget shared by every base station (linear SI units)."""

    tx_power: float = dbm_to_watt(46.0)
    noise_density: float = dbm_to_watt(-174.0)
    path_loss_exponent: float = 3.76

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ValueError(f"tx_power must be > 0 W, got {self.tx_power!r}")
        if not self.noise_density >= 0:
            raise ValueError(f"noise_density must be >= 0 W/Hz, got {self.noise_density!r}")
        if not self.path_loss_exponent > 2:
            raise ValueError(
                f"path_loss_exponent must be > 2, got {self.path_loss_exponent!r}"
            )

    @classmethod
    def from_dbm(cls, tx_power_dbm: float = 46.0, noise_dbm_per_hz: float = -174.0,
                 path_loss_exponent: float = 3.76) -> "RadioParams":
        return cls(dbm_to_watt(tx_power_dbm), dbm_to_watt(noise_dbm_per_hz), path_loss_exponent)


# Operating point of the analytic study: 16 BSs on 20 x 20 km, 10 MHz each,
# 100 subscribers per cell.
BASELINE_BS_DENSITY = 16 / 400e6
BASELINE_BANDWIDTH = 10e6
BASELINE_USERS_PER_CELL = 100.0


def baseline_operator(bs_density: float = BASELINE_BS_DENSITY,
                      bandwidth: float = BASELINE_BANDWIDTH,
                      users_per_cell: float = BASELINE_USERS_PER_CELL) -> OperatorParams:
    return OperatorParams(bs_density, bandwidth, users_per_cell * bs_density)
