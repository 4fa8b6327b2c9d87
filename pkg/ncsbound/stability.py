"""Small-gain stability test of a feedback loop under bounded time-varying delay.

The loop stays stable for any delay up to ``ubd`` when
|T(jw)| < 1 / (ubd * w) for every w, T = PC / (1 + PC) being the complementary
sensitivity. The test is evaluated on a logarithmic frequency grid and the edges
of violating bands are refined by bisection.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from ncsbound.errors import NominallyUnstable, UnitMismatch
from ncsbound.lti import (
    RationalTransferFunction,
    complementary_sensitivity,
    frequency_response,
    is_hurwitz,
    robust_weight,
)
from ncsbound.units import TimeUnit

logger = logging.getLogger(__name__)

EDGE_RTOL = 1e-4
DELAY_RTOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Logarithmic frequency grid, rad per time unit."""

    omega_min: float = 1e-3
    omega_max: float = 1e3
    points_per_decade: int = 200

    def __post_init__(self) -> None:
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError("grid requires 0 < omega_min < omega_max")
        if self.points_per_decade < 1:
            raise ValueError("points_per_decade must be >= 1")

    def omegas(self) -> np.ndarray:
        """Grid points; doubling points_per_decade keeps every existing point."""
        lo, hi = math.log10(self.omega_min), math.log10(self.omega_max)
        count = int(round((hi - lo) * self.points_per_decade)) + 1
        return np.logspace(lo, hi, count)


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of the small-gain test."""

    holds: bool
    violating_bands: tuple[tuple[float, float], ...]
    margin: float
    grid: GridSpec
    ubd: float
    time_unit: TimeUnit = TimeUnit.SECONDS


@dataclass(frozen=True)
class SweepResult:
    """|T(jw)| and the delay limit 1/(ubd*w) over a grid."""

    omegas: np.ndarray
    magnitude: np.ndarray
    limit: np.ndarray
    ubd: float
    time_unit: TimeUnit = TimeUnit.SECONDS

    @property
    def violating(self) -> np.ndarray:
        """Grid points where the criterion fails; equality counts as failure."""
        return self.magnitude >= self.limit


@dataclass(frozen=True)
class MaxDelayResult:
    """Largest delay passing the test on a grid."""

    ubd: float
    grid_limited: bool
    peak_omega: float


def _ubd_value(ubd: float | tuple[float, TimeUnit | None], unit: TimeUnit) -> float:
    if isinstance(ubd, tuple):
        value, ubd_unit = ubd
        if ubd_unit is not None and TimeUnit(ubd_unit) is not unit:
            raise UnitMismatch(f"ubd given in {TimeUnit(ubd_unit).value}, loop uses {unit.value}")
        return float(value)
    return float(ubd)


def _closed_loop(
    plant: RationalTransferFunction, controller: RationalTransferFunction
) -> RationalTransferFunction:
    t = complementary_sensitivity(plant, controller)
    if not is_hurwitz(t.den):
        logger.error(f"Closed loop denominator {t.den} is not Hurwitz")
        raise NominallyUnstable(f"closed loop is unstable without delay: {t.den}")
    return t


def _excess(t: RationalTransferFunction, ubd: float, omega: float) -> float:
    """|T(jw)| * ubd * w - 1; non-negative where the criterion fails."""
    return float(abs(frequency_response(t, [omega])[0]) * ubd * omega - 1.0)


def _refine(t: RationalTransferFunction, ubd: float, lo: float, hi: float) -> float:
    return float(optimize.bisect(lambda w: _excess(t, ubd, w), lo, hi, rtol=EDGE_RTOL, xtol=1e-300))


def _bands(
    t: RationalTransferFunction, ubd: float, omegas: np.ndarray, violating: np.ndarray
) -> list[tuple[float, float]]:
    bands = []
    n = len(omegas)
    k = 0
    while k < n:
        if not violating[k]:
            k += 1
            continue
        start = k
        while k + 1 < n and violating[k + 1]:
            k += 1
        end = k
        low = omegas[start] if start == 0 else _refine(t, ubd, omegas[start - 1], omegas[start])
        high = omegas[end] if end == n - 1 else _refine(t, ubd, omegas[end], omegas[end + 1])
        bands.append((float(low), float(high)))
        k += 1
    return bands


def sweep(
    plant: RationalTransferFunction,
    controller: RationalTransferFunction,
    ubd: float,
    grid: GridSpec | None = None,
) -> SweepResult:
    """Evaluate both sides of the criterion over the grid, without the Hurwitz precondition."""
    grid = grid or GridSpec()
    t = complementary_sensitivity(plant, controller)
    omegas = grid.omegas()
    magnitude = np.abs(frequency_response(t, omegas))
    with np.errstate(divide="ignore"):
        limit = np.full_like(omegas, np.inf) if ubd == 0 else 1.0 / (ubd * omegas)
    return SweepResult(omegas, magnitude, limit, ubd, t.time_unit)


def check(
    plant: RationalTransferFunction,
    controller: RationalTransferFunction,
    ubd: float | tuple[float, TimeUnit | None],
    grid: GridSpec | None = None,
) -> StabilityVerdict:
    """Small-gain stability test of the loop with delay bounded by ``ubd``.

    Args:
        plant: Process transfer function P
        controller: Controller transfer function C
        ubd: Upper-bound delay in the loop's time unit, or a (value, unit) pair
        grid: Frequency grid; defaults to [1e-3, 1e3] at 200 points per decade

    Returns:
        StabilityVerdict with the violating bands, refined to 1e-4 relative

    Raises:
        NominallyUnstable: closed loop unstable at zero delay
        UnitMismatch: ubd unit differs from the loop's
    """
    grid = grid or GridSpec()
    t = _closed_loop(plant, controller)
    value = _ubd_value(ubd, t.time_unit)
    if value < 0:
        raise ValueError("ubd must be >= 0")
    if value == 0:
        return StabilityVerdict(True, (), math.inf, grid, 0.0, t.time_unit)

    result = sweep(plant, controller, value, grid)
    bands = _bands(t, value, result.omegas, result.violating)
    margin = float(np.min(result.limit - result.magnitude))
    verdict = StabilityVerdict(not bands, tuple(bands), margin, grid, value, t.time_unit)
    if bands:
        listed = ", ".join(f"[{lo:.4g}, {hi:.4g}]" for lo, hi in bands)
        logger.info(f"Stability violated for ubd {value:g} {t.time_unit.value}: {listed}")
    else:
        logger.info(f"Stability holds for ubd {value:g} {t.time_unit.value}, margin {margin:.4g}")
    return verdict


def max_tolerable_delay(
    plant: RationalTransferFunction,
    controller: RationalTransferFunction,
    grid: GridSpec | None = None,
) -> MaxDelayResult:
    """Largest ubd for which :func:`check` holds on the grid.

    On a grid the test holds iff ubd < 1 / max(|T(jw)| * w); the result is
    bisected to 1e-6 relative below that limit. ``grid_limited`` flags a peak
    sitting at the top of the grid, where a wider grid would give a smaller value.

    Raises:
        NominallyUnstable: closed loop unstable at zero delay
    """
    grid = grid or GridSpec()
    t = _closed_loop(plant, controller)
    omegas = grid.omegas()
    magnitude = np.abs(frequency_response(t, omegas))
    weighted = magnitude * omegas
    peak = int(np.argmax(weighted))
    if weighted[peak] == 0:
        return MaxDelayResult(math.inf, False, float(omegas[peak]))

    limit = 1.0 / float(weighted[peak])
    lo, hi = 0.0, limit
    while hi - lo > DELAY_RTOL * limit:
        mid = 0.5 * (lo + hi)
        # same comparison as check(), so the result passes it
        if np.all(magnitude < 1.0 / (mid * omegas)):
            lo = mid
        else:
            hi = mid
    grid_limited = peak == len(omegas) - 1
    if grid_limited:
        logger.warning("Maximum tolerable delay is limited by the top of the frequency grid")
    logger.debug(f"Maximum tolerable delay {lo:.6g} {t.time_unit.value} at w={omegas[peak]:.4g}")
    return MaxDelayResult(lo, grid_limited, float(omegas[peak]))


def robust_margin(
    plant: RationalTransferFunction,
    controller: RationalTransferFunction,
    ubd: float,
    grid: GridSpec | None = None,
) -> float:
    """Minimum over the grid of 1 - |T(jw) w_h(jw)|; positive means robustly stable."""
    grid = grid or GridSpec()
    t = _closed_loop(plant, controller)
    omegas = grid.omegas()
    weighted = frequency_response(t, omegas) * frequency_response(
        robust_weight(ubd, t.time_unit), omegas
    )
    return float(np.min(1.0 - np.abs(weighted)))


SWEEP_CSV_HEADER = ["omega", "abs_T", "limit", "violating"]


def write_sweep_csv(result: SweepResult, path: str | Path) -> Path:
    """Export the sweep as omega, |T(jw)|, 1/(ubd*w), violating flag."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for w, mag, lim, bad in zip(
            result.omegas, result.magnitude, result.limit, result.violating, strict=True
        ):
            writer.writerow([repr(float(w)), repr(float(mag)), repr(float(lim)), int(bool(bad))])
    return path
