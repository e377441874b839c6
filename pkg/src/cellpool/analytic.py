"""Average ergodic rate and per-user throughput of a Poisson cellular downlink.

Base stations of each operator form independent Poisson point processes; the
typical user sits at the origin and every link sees unit-mean Rayleigh
fading. Three sharing strategies are covered:

* ``NOCOOP``   each operator serves its own users on its own band;
* ``FLEXROAM`` users attach to the nearest BS of either operator, each BS
  keeps its own band (so interference only comes from the serving
  operator's BSs);
* ``MERGER``   every BS transmits over the pooled band, which is the same as
  a single operator with summed density and bandwidth.

All rates are evaluated by nested adaptive Gauss-Kronrod quadrature
(QUADPACK through :func:`scipy.integrate.quad`) after mapping every
semi-infinite range onto a finite one.
"""

from __future__ import annotations

import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .params import OperatorParams, RadioParams, Strategy

LN2 = math.log(2.0)


class QuadratureError(RuntimeError):
    """Raised when an integral does not reach the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether it is usable anyway.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


_MIN_REL_TOL = 1e-13


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-7
    abs_tol: float = 0.0
    max_subdivisions: int = 200
    use_table: bool = True

    def __post_init__(self):
        if not self.rel_tol >= _MIN_REL_TOL:
            raise ValueError(f"rel_tol must be >= {_MIN_REL_TOL:g}, got {self.rel_tol!r}")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class RateResult:
    """Outcome of one rate/throughput evaluation.

    ``spectral_rate_nats`` is E[ln(1 + SINR)] in nats/s/Hz; ``throughput_bps``
    converts it to bit/s over the serving band (and, for :func:`throughput`,
    divides by the cell load). ``error_estimate`` is the absolute error bound
    on ``spectral_rate_nats``.
    """

    spectral_rate_nats: float
    throughput_bps: float
    error_estimate: float


def _quad(func, a, b, quad: QuadratureConfig, what: str, epsrel=None):
    # QUADPACK refuses relative targets below 50 machine epsilons
    epsrel = max(quad.rel_tol if epsrel is None else epsrel, _MIN_REL_TOL)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err, info = integrate.quad(
            func, a, b,
            epsabs=quad.abs_tol,
            epsrel=epsrel,
            limit=int(quad.max_subdivisions),
            full_output=1,
        )[:3]
    target = max(quad.abs_tol, epsrel * abs(value))
    # QUADPACK flags roundoff-limited but accurate results too; only the
    # achieved bound decides.
    if not math.isfinite(value) or err > 10 * target and err > 1e-14:
        raise QuadratureError(
            f"{what}: integral did not converge (estimate {value:.10g}, error {err:.3g})",
            value, err,
        )
    return value, err


# -- interference factor -----------------------------------------------------

_TIGHT = QuadratureConfig(rel_tol=1e-13, abs_tol=0.0, max_subdivisions=200, use_table=False)


def _check_alpha(alpha: float):
    if not alpha > 2:
        raise ValueError(f"path-loss exponent must be > 2 (interference diverges), got {alpha!r}")


def _tail_integral(a: float, alpha: float) -> float:
    """Integral of 1/(1 + x^(alpha/2)) over [a, inf)."""
    half = alpha / 2.0
    total = 0.0
    if a < 1.0:
        total += _quad(lambda x: 1.0 / (1.0 + x**half), a, 1.0, _TIGHT, "interference")[0]
    # x = y^(-g) with g = 2/(alpha-2) turns the tail into a bounded integrand
    # on a finite range.
    g = 2.0 / (alpha - 2.0)
    beta = alpha / (alpha - 2.0)
    upper = max(a, 1.0) ** (-1.0 / g)
    total += g * _quad(lambda y: 1.0 / (1.0 + y**beta), 0.0, upper, _TIGHT, "interference")[0]
    return total


def interference_integral(t: float, alpha: float) -> float:
    """Interference factor rho(t, alpha) = T^(2/a) * int_{T^(-2/a)}^inf dx / (1 + x^(a/2)).

    Here ``T = e^t - 1`` is the SINR threshold that makes ln(1 + SINR) exceed
    ``t``. The Laplace transform of the interference field at serving
    distance r is ``exp(-pi * lambda * r^2 * rho)``.
    """
    _check_alpha(alpha)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    if t == 0:
        return 0.0
    log_T = t + math.log(-math.expm1(-t))
    a = math.exp(-2.0 / alpha * log_T)
    return math.exp(2.0 / alpha * log_T) * _tail_integral(a, alpha)


class InterferenceTable:
    """Cubic-spline cache of ``log1p(rho(t, alpha))`` on a uniform t grid.

    The grid is doubled until the spline reproduces freshly computed
    midpoints to within ``tol`` in ``log1p(rho)``, i.e. to ``tol`` relative
    in ``1 + rho``. Arguments beyond ``t_max`` fall back to direct
    evaluation.
    """

    def __init__(self, alpha: float, tol: float, t_max: float = 80.0, n_start: int = 512):
        _check_alpha(alpha)
        self.alpha = alpha
        self.t_max = t_max
        n = n_start
        grid = np.linspace(0.0, t_max, n + 1)
        values = np.log1p([interference_integral(t, alpha) for t in grid])
        while True:
            spline = CubicSpline(grid, values)
            mid = 0.5 * (grid[1:] + grid[:-1])
            exact = np.log1p([interference_integral(t, alpha) for t in mid])
            err = float(np.max(np.abs(spline(mid) - exact)))
            merged = np.empty(2 * n + 1)
            merged[0::2] = values
            merged[1::2] = exact
            grid = np.linspace(0.0, t_max, 2 * n + 1)
            values = merged
            n *= 2
            if err < tol:
                break
        self.spline = CubicSpline(grid, values)
        self.n_points = grid.size
        self.max_error = err

    def __call__(self, t: float) -> float:
        if t > self.t_max:
            return interference_integral(t, self.alpha)
        return math.expm1(float(self.spline(t)))


_table_lock = threading.Lock()


@lru_cache(maxsize=32)
def _cached_table(alpha: float, tol: float) -> InterferenceTable:
    return InterferenceTable(alpha, tol)


def interference_table(alpha: float, rel_tol: float) -> InterferenceTable:
    with _table_lock:
        return _cached_table(float(alpha), float(rel_tol) / 10.0)


# -- ergodic rates -------------------------------------------------------------

@lru_cache(maxsize=4096)
def _band_rate(bandwidth: float, serving_density: float, interferer_density: float,
               radio: RadioParams, quad: QuadratureConfig) -> tuple[float, float]:
    """E[ln(1+SINR)] for a user whose nearest BS (density ``serving_density``)
    serves it on ``bandwidth`` while interferers of density
    ``interferer_density`` lie beyond the serving distance.

    With s = pi * serving_density * r^2 the radial integral becomes
    int_0^inf exp(-s (1 + k rho) - c T s^(a/2)) ds, where k is the density
    ratio and c the noise term. v = s (1 + k rho) and v = -ln(1 - w) map it
    onto [0, 1); t = -(a/2) ln(1 - u) does the same for the outer range.
    """
    alpha = radio.path_loss_exponent
    half = alpha / 2.0
    ratio = interferer_density / serving_density
    noise = (radio.noise_density * bandwidth
             / (radio.tx_power * (math.pi * serving_density) ** half))
    rho = interference_table(alpha, quad.rel_tol) if quad.use_table else (
        lambda t: interference_integral(t, alpha))
    inner_err = [0.0]

    def radial(t: float) -> float:
        A = 1.0 + ratio * rho(t)
        if noise == 0.0:
            return 1.0 / A
        cT = noise * math.expm1(t) if t < 700 else math.inf
        if cT == math.inf:
            return 0.0

        def f(w):
            v = -math.log1p(-w)
            return math.exp(-cT * (v / A) ** half)

        value, err = _quad(f, 0.0, 1.0, quad, "radial integral", epsrel=quad.rel_tol / 10)
        inner_err[0] = max(inner_err[0], err / A)
        return value / A

    def outer(u: float) -> float:
        one_minus = 1.0 - u
        if one_minus <= 0.0:
            return 0.0
        t = -half * math.log(one_minus)
        return radial(t) * half / one_minus

    value, err = _quad(outer, 0.0, 1.0, quad, "rate integral")
    # Inner errors enter once per unit of t; integrand decays like e^(-2t/a).
    return value, err + inner_err[0] * half * 4.0


def _require_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")


def rate_nocoop(w: float, lam: float, radio: RadioParams = RadioParams(),
                quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """Ergodic rate of a stand-alone operator with bandwidth ``w`` and BS density ``lam``.

    ``throughput_bps`` is the link rate over the whole band, ``w * R / ln 2``.
    """
    _require_positive("bandwidth", w)
    _require_positive("bs_density", lam)
    value, err = _band_rate(float(w), float(lam), float(lam), radio, quad)
    return RateResult(value, w * value / LN2, err)


def flexroam_components(op1: OperatorParams, op2: OperatorParams,
                        radio: RadioParams = RadioParams(),
                        quad: QuadratureConfig = QuadratureConfig()) -> list[tuple[float, float, float]]:
    """Per-operator terms ``(association probability, R_i, error)`` under FLEXROAM."""
    total = op1.bs_density + op2.bs_density
    _require_positive("combined bs_density", total)
    out = []
    for op in (op1, op2):
        if op.bs_density == 0:
            out.append((0.0, 0.0, 0.0))
            continue
        _require_positive("bandwidth of an operator with base stations", op.bandwidth)
        value, err = _band_rate(float(op.bandwidth), float(total), float(op.bs_density), radio, quad)
        out.append((op.bs_density / total, value, err))
    return out


def rate_flexroam(op1: OperatorParams, op2: OperatorParams, radio: RadioParams = RadioParams(),
                  quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """Ergodic rate when users roam onto the nearest BS of either operator.

    Mixture of the two per-band rates weighted by the association
    probabilities lambda_i / (lambda_1 + lambda_2); ``throughput_bps`` weights
    each term by its own band.
    """
    parts = flexroam_components(op1, op2, radio, quad)
    rate = math.fsum(p * r for p, r, _ in parts)
    bps = math.fsum(p * r * op.bandwidth for (p, r, _), op in zip(parts, (op1, op2))) / LN2
    err = math.fsum(p * e for p, _, e in parts)
    return RateResult(rate, bps, err)


def rate_merger(op1: OperatorParams, op2: OperatorParams, radio: RadioParams = RadioParams(),
                quad: QuadratureConfig = QuadratureConfig()) -> RateResult:
    """Pooled BSs and spectrum: a single operator with summed density and band."""
    return rate_nocoop(op1.bandwidth + op2.bandwidth, op1.bs_density + op2.bs_density, radio, quad)


def strategy_rate(strategy: Strategy | str, op1: OperatorParams, op2: OperatorParams,
                  radio: RadioParams = RadioParams(), quad: QuadratureConfig = QuadratureConfig(),
                  for_operator: int = 1) -> RateResult:
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.NOCOOP:
        op = _pick(op1, op2, for_operator)
        return rate_nocoop(op.bandwidth, op.bs_density, radio, quad)
    if strategy is Strategy.FLEXROAM:
        return rate_flexroam(op1, op2, radio, quad)
    return rate_merger(op1, op2, radio, quad)


def _pick(op1, op2, for_operator):
    if for_operator not in (1, 2):
        raise ValueError(f"for_operator must be 1 or 2, got {for_operator!r}")
    return op1 if for_operator == 1 else op2


def throughput(strategy: Strategy | str, op1: OperatorParams, op2: OperatorParams,
               radio: RadioParams = RadioParams(), quad: QuadratureConfig = QuadratureConfig(),
               for_operator: int = 1) -> RateResult:
    """Average per-user throughput under proportional-fair sharing of the cell.

    NOCOOP divides the operator's rate by its own users per cell; the
    cooperative strategies share a single cell load
    (eta_1 + eta_2) / (lambda_1 + lambda_2) across both operators.
    """
    strategy = Strategy.parse(strategy)
    rate = strategy_rate(strategy, op1, op2, radio, quad, for_operator)
    if strategy is Strategy.NOCOOP:
        op = _pick(op1, op2, for_operator)
        share = op.bs_density / op.user_density
    else:
        _pick(op1, op2, for_operator)
        share = (op1.bs_density + op2.bs_density) / (op1.user_density + op2.user_density)
    return RateResult(rate.spectral_rate_nats, rate.throughput_bps * share, rate.error_estimate)


# -- parameter sweeps ----------------------------------------------------------

SWEEP_AXES = ("bs_density", "user_density", "bandwidth")


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    strategy: Strategy
    operator: int
    throughput_bps: float
    spectral_rate_nats: float
    error: str | None = None


def scaled_pair(op1: OperatorParams, op2: OperatorParams, axis: str,
                ratio: float) -> tuple[OperatorParams, OperatorParams]:
    """Return (op1, op2') with op2's swept quantity set to ``ratio`` times op1's.

    On the BS-density axis op2 keeps its users-per-cell, so the cell load
    stays equal while the density changes.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if not (ratio > 0 and math.isfinite(ratio)):
        raise ValueError(f"sweep ratio must be > 0, got {ratio!r}")
    if axis == "bs_density":
        lam = ratio * op1.bs_density
        op2 = OperatorParams(lam, op2.bandwidth, op2.users_per_cell * lam)
    elif axis == "user_density":
        op2 = OperatorParams(op2.bs_density, op2.bandwidth, ratio * op1.user_density)
    else:
        op2 = OperatorParams(op2.bs_density, ratio * op1.bandwidth, op2.user_density)
    return op1, op2


def sweep(strategies: Iterable[Strategy | str], op1: OperatorParams, op2: OperatorParams,
          axis: str, ratios: Sequence[float], radio: RadioParams = RadioParams(),
          quad: QuadratureConfig = QuadratureConfig(), workers: int = 1) -> list[SweepRow]:
    """Throughput of both operators over a grid of op2/op1 ratios.

    One row per (ratio, strategy, operator). A grid point that fails
    (invalid ratio, quadrature failure) yields rows with ``error`` set and
    NaN values; the rest of the grid is still computed.
    """
    strategies = [Strategy.parse(s) for s in strategies]
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")

    def point(job):
        ratio, strategy = job
        try:
            a, b = scaled_pair(op1, op2, axis, ratio)
            results = [throughput(strategy, a, b, radio, quad, k) for k in (1, 2)]
        except (ValueError, QuadratureError) as exc:
            error = f"{type(exc).__name__}: {exc}"
            return [SweepRow(ratio, strategy, k, math.nan, math.nan, error) for k in (1, 2)]
        return [SweepRow(ratio, strategy, k, r.throughput_bps, r.spectral_rate_nats)
                for k, r in zip((1, 2), results)]

    jobs = [(ratio, s) for ratio in ratios for s in strategies]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(point, jobs))
    else:
        chunks = [point(job) for job in jobs]
    return [row for rows in chunks for row in rows]


def gain_over_nocoop(strategy: Strategy | str, op1: OperatorParams, op2: OperatorParams,
                     for_operator: int, radio: RadioParams = RadioParams(),
                     quad: QuadratureConfig = QuadratureConfig()) -> float:
    """Relative throughput gain of ``strategy`` over NOCOOP for one operator."""
    coop = throughput(strategy, op1, op2, radio, quad, for_operator).throughput_bps
    alone = throughput(Strategy.NOCOOP, op1, op2, radio, quad, for_operator).throughput_bps
    return coop / alone - 1.0


def breakeven_ratio(strategy: Strategy | str, op1: OperatorParams, op2: OperatorParams,
                    axis: str, for_operator: int, bracket: tuple[float, float],
                    radio: RadioParams = RadioParams(),
                    quad: QuadratureConfig = QuadratureConfig(), xtol: float = 1e-6) -> float:
    """Ratio on ``axis`` at which ``for_operator`` neither gains nor loses by cooperating.

    Solved with Brent's method; the gain must change sign over ``bracket``.
    """
    from scipy.optimize import brentq

    def f(ratio):
        a, b = scaled_pair(op1, op2, axis, ratio)
        return gain_over_nocoop(strategy, a, b, for_operator, radio, quad)

    lo, hi = bracket
    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise ValueError(f"OP{for_operator} gain has the same sign at both ends of the bracket "
                         f"[{lo:g}, {hi:g}] ({f_lo:+.4f}, {f_hi:+.4f})")
    return brentq(f, lo, hi, xtol=xtol)
