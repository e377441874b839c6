"""Base-station layouts, user drops and user-BS association."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._rng import substream
from .params import Strategy

_LAYOUT = 201
_USERS = 202


@dataclass(frozen=True)
class Region:
    width: float = 20_000.0
    height: float = 20_000.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("region dimensions must be > 0")

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x, y) -> bool:
        return 0 <= x <= self.width and 0 <= y <= self.height


@dataclass(frozen=True)
class BaseStation:
    id: int
    operator: int
    x: float
    y: float
    subchannels: frozenset[int] | None = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class User:
    id: int
    operator: int
    x: float
    y: float
    serving_bs: int | None = None


def layout_arrays(layout: Sequence[BaseStation]) -> tuple[np.ndarray, np.ndarray]:
    """(B, 2) positions and (B,) operators, ordered by BS id."""
    ids = [bs.id for bs in layout]
    if ids != list(range(len(layout))):
        raise ValueError("base station ids must be 0..B-1 in order")
    xy = np.array([[bs.x, bs.y] for bs in layout], dtype=float).reshape(-1, 2)
    return xy, np.array([bs.operator for bs in layout], dtype=np.int64)


def user_arrays(users: Sequence[User]) -> tuple[np.ndarray, np.ndarray]:
    xy = np.array([[u.x, u.y] for u in users], dtype=float).reshape(-1, 2)
    return xy, np.array([u.operator for u in users], dtype=np.int64)


def _grid_points(n: int, region: Region, rng) -> np.ndarray:
    """``n`` points on a jittered grid whose cell aspect follows the region's."""
    if n == 0:
        return np.empty((0, 2))
    cols = max(1, round(math.sqrt(n * region.width / region.height)))
    rows = math.ceil(n / cols)
    cells = rng.permutation(rows * cols)[:n]
    dx, dy = region.width / cols, region.height / rows
    cx = (cells % cols + 0.5) * dx
    cy = (cells // cols + 0.5) * dy
    # jitter within the middle 80% of each cell
    jx = rng.uniform(-0.4, 0.4, n) * dx
    jy = rng.uniform(-0.4, 0.4, n) * dy
    return np.column_stack([cx + jx, cy + jy])


def synthesize_layout(counts: tuple[int, int], region: Region = Region(), seed: int = 0,
                      mode: str = "uniform") -> list[BaseStation]:
    """Synthetic layout with ``counts[i]`` BSs for operator i + 1.

    ``uniform`` drops each operator's BSs independently and uniformly
    (a binomial point process); ``perturbed-grid`` puts each operator on its
    own jittered grid, which is closer to planned networks.
    """
    if mode not in ("uniform", "perturbed-grid"):
        raise ValueError(f"unknown layout mode {mode!r}")
    if any(int(n) < 0 for n in counts) or sum(counts) < 1:
        raise ValueError("need non-negative counts with at least one base station")
    out = []
    for op, n in enumerate(counts, start=1):
        rng = substream(seed, _LAYOUT, op)
        if mode == "uniform":
            pts = np.column_stack([rng.uniform(0, region.width, n), rng.uniform(0, region.height, n)])
        else:
            pts = _grid_points(int(n), region, rng)
        base = len(out)
        out.extend(BaseStation(base + j, op, float(x), float(y)) for j, (x, y) in enumerate(pts))
    return out


def deploy_users(per_cell_target: float, layout: Sequence[BaseStation], region: Region = Region(),
                 seed: int = 0) -> list[User]:
    """Uniform user drop: ceil(per_cell_target * n_i) subscribers of operator i."""
    if not per_cell_target > 0:
        raise ValueError("per_cell_target must be > 0")
    users = []
    for op in (1, 2):
        n_bs = sum(1 for bs in layout if bs.operator == op)
        n = math.ceil(per_cell_target * n_bs - 1e-9)
        rng = substream(seed, _USERS, op)
        xs = rng.uniform(0, region.width, n)
        ys = rng.uniform(0, region.height, n)
        base = len(users)
        users.extend(User(base + j, op, float(x), float(y)) for j, (x, y) in enumerate(zip(xs, ys)))
    return users


class AssociationError(ValueError):
    pass


def association_indices(avg_power: np.ndarray, bs_operator: np.ndarray,
                        user_operator: np.ndarray, strategy: Strategy | str) -> np.ndarray:
    """Serving BS index per user from (B, N) long-term received power.

    NOCOOP restricts candidates to the subscriber's operator; FLEXROAM and
    MERGER take the strongest BS overall. argmax returns the first maximum,
    so ties go to the lower BS id.
    """
    strategy = Strategy.parse(strategy)
    power = np.asarray(avg_power, dtype=float)
    if strategy is Strategy.NOCOOP:
        allowed = bs_operator[:, None] == user_operator[None, :]
        lonely = ~allowed.any(axis=0)
        if lonely.any():
            raise AssociationError(
                f"{int(lonely.sum())} users have no base station of their own operator "
                f"(first: user {int(np.flatnonzero(lonely)[0])})")
        power = np.where(allowed, power, -np.inf)
    elif power.shape[0] == 0:
        raise AssociationError("no base stations to associate with")
    return np.argmax(power, axis=0)


def associate(users: Sequence[User], layout: Sequence[BaseStation], strategy: Strategy | str,
              avg_power: np.ndarray) -> list[User]:
    """Return copies of ``users`` with ``serving_bs`` set for ``strategy``."""
    _, bs_op = layout_arrays(layout)
    _, user_op = user_arrays(users)
    serving = association_indices(avg_power, bs_op, user_op, strategy)
    return [replace(u, serving_bs=int(layout[s].id)) for u, s in zip(users, serving)]
