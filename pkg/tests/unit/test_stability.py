"""Unit tests for the small-gain delay stability test."""

import csv
import math

import numpy as np
import pytest

from ncsbound.errors import NominallyUnstable, UnitMismatch
from ncsbound.lti import Polynomial, RationalTransferFunction, complementary_sensitivity, evaluate
from ncsbound.stability import (
    SWEEP_CSV_HEADER,
    GridSpec,
    check,
    max_tolerable_delay,
    robust_margin,
    sweep,
    write_sweep_csv,
)
from ncsbound.units import TimeUnit


def excess(plant, controller, ubd: float, omega: float) -> float:
    t = complementary_sensitivity(plant, controller)
    return abs(evaluate(t, omega)) * ubd * omega - 1.0


class TestGridSpec:
    """Test the logarithmic grid."""

    def test_point_count(self) -> None:
        """Test six decades at 200 points per decade."""
        omegas = GridSpec().omegas()
        assert len(omegas) == 1201
        assert omegas[0] == pytest.approx(1e-3)
        assert omegas[-1] == pytest.approx(1e3)

    def test_refinement_keeps_points(self) -> None:
        """Test doubling the density keeps every existing point."""
        coarse = GridSpec(points_per_decade=50).omegas()
        fine = GridSpec(points_per_decade=100).omegas()
        assert fine[::2] == pytest.approx(coarse)

    def test_invalid(self) -> None:
        """Test bounds and density are checked."""
        with pytest.raises(ValueError):
            GridSpec(omega_min=1.0, omega_max=1.0)
        with pytest.raises(ValueError):
            GridSpec(points_per_decade=0)


class TestCheck:
    """Test the stability verdict."""

    def test_reference_loop_violated(self, plant, controller) -> None:
        """Test a 3.5 ms bound breaks the criterion in one band."""
        verdict = check(plant, controller, 3.5)
        assert not verdict.holds
        assert len(verdict.violating_bands) == 1
        low, high = verdict.violating_bands[0]
        assert 0.1 <= low <= 0.4
        assert high == pytest.approx(1.21, rel=0.02)
        assert verdict.margin < 0
        assert verdict.time_unit is TimeUnit.MILLISECONDS

    def test_band_edges_are_crossings(self, plant, controller) -> None:
        """Test the criterion changes sign across every refined edge."""
        verdict = check(plant, controller, 3.5)
        for low, high in verdict.violating_bands:
            assert excess(plant, controller, 3.5, low * (1 - 1e-3)) < 0
            assert excess(plant, controller, 3.5, low * (1 + 1e-3)) > 0
            assert excess(plant, controller, 3.5, high * (1 - 1e-3)) > 0
            assert excess(plant, controller, 3.5, high * (1 + 1e-3)) < 0

    def test_small_delay_holds(self, plant, controller) -> None:
        """Test a short bound passes with a positive margin."""
        verdict = check(plant, controller, 1e-4)
        assert verdict.holds
        assert verdict.violating_bands == ()
        assert verdict.margin > 0

    def test_zero_delay(self, plant, controller) -> None:
        """Test no delay always holds."""
        verdict = check(plant, controller, 0.0)
        assert verdict.holds
        assert math.isinf(verdict.margin)

    def test_finer_grid_never_passes(self, plant, controller) -> None:
        """Test refining the grid cannot turn a violation into a pass."""
        assert not check(plant, controller, 3.5, GridSpec(points_per_decade=400)).holds

    def test_unit_pair(self, plant, controller) -> None:
        """Test a bound carried with its unit."""
        assert not check(plant, controller, (3.5, TimeUnit.MILLISECONDS)).holds
        with pytest.raises(UnitMismatch):
            check(plant, controller, (3.5, TimeUnit.SECONDS))

    def test_nominally_unstable(self) -> None:
        """Test a loop that is unstable without delay."""
        plant = RationalTransferFunction(Polynomial((1.0,)), Polynomial((-1.0, 1.0)))
        controller = RationalTransferFunction.constant(0.5)
        with pytest.raises(NominallyUnstable):
            check(plant, controller, 1.0)

    def test_negative_delay(self, plant, controller) -> None:
        """Test the bound must be non-negative."""
        with pytest.raises(ValueError):
            check(plant, controller, -1.0)


class TestMaxTolerableDelay:
    """Test the largest delay passing the criterion."""

    def test_monotone_in_delay(self, plant, controller) -> None:
        """Test the limit passes, anything 1 % above fails, anything below passes."""
        limit = max_tolerable_delay(plant, controller)
        assert 0 < limit.ubd < 3.5
        assert not limit.grid_limited
        assert check(plant, controller, limit.ubd).holds
        assert check(plant, controller, limit.ubd / 2).holds
        assert not check(plant, controller, limit.ubd * 1.01).holds

    def test_grid_limited(self) -> None:
        """Test a loop whose |T| w keeps growing is flagged."""
        integrator = RationalTransferFunction(Polynomial((1.0,)), Polynomial((0.0, 1.0)))
        unity = RationalTransferFunction.constant(1.0)
        limit = max_tolerable_delay(integrator, unity)
        assert limit.grid_limited
        assert limit.peak_omega == pytest.approx(1e3)
        assert limit.ubd == pytest.approx(1.0, rel=1e-3)


class TestSweep:
    """Test the frequency sweep and its export."""

    def test_violating_flags(self, plant, controller) -> None:
        """Test flags match the verdict."""
        result = sweep(plant, controller, 3.5)
        flagged = result.omegas[result.violating]
        low, high = check(plant, controller, 3.5).violating_bands[0]
        assert flagged.min() >= low
        assert flagged.max() <= high

    def test_zero_delay_limit(self, plant, controller) -> None:
        """Test the limit is infinite without delay."""
        result = sweep(plant, controller, 0.0)
        assert np.all(np.isinf(result.limit))
        assert not result.violating.any()

    def test_csv(self, plant, controller, tmp_path) -> None:
        """Test one row per grid point."""
        path = write_sweep_csv(sweep(plant, controller, 3.5), tmp_path / "sweep.csv")
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == SWEEP_CSV_HEADER
        assert len(rows) == 1 + 1201
        assert {r[3] for r in rows[1:]} == {"0", "1"}


class TestRobustMargin:
    """Test the delay-error weighted margin."""

    def test_shrinks_with_delay(self, plant, controller) -> None:
        """Test a longer bound leaves less margin."""
        short = robust_margin(plant, controller, 0.1)
        long = robust_margin(plant, controller, 3.5)
        assert short > 0
        assert long < short
