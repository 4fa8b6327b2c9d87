"""Unit tests for the networked loop simulation with and without a Smith predictor."""

import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from ncsbound.errors import UnitMismatch
from ncsbound.lti import Polynomial, RationalTransferFunction
from ncsbound.smith_sim import (
    METRICS_CSV_HEADER,
    ComparisonReport,
    DelayModelKind,
    DelayProcess,
    LoopConfig,
    Setpoint,
    SimMode,
    SimTrace,
    acompare,
    compare,
    run,
    run_smith,
    run_uncompensated,
    write_metrics_csv,
)
from ncsbound.units import TimeUnit


@pytest.fixture
def step_loop(plant, controller) -> LoopConfig:
    """Step response over 60 ms without network delay."""
    return LoopConfig(plant=plant, controller=controller, setpoint=Setpoint.step(), horizon=60.0)


class TestDelayProcess:
    """Test realized network delays."""

    def test_constant(self) -> None:
        """Test a constant delay is the same at every sample."""
        times = np.arange(100) * 0.01
        values = DelayProcess.constant(0.5).realize(times, np.random.default_rng(0))
        assert np.all(values == 0.5)

    def test_uniform_piecewise(self) -> None:
        """Test uniform delays stay in range and only change at redraw instants."""
        times = np.arange(5001) * 0.01
        values = DelayProcess.uniform(3.5, 10.0).realize(times, np.random.default_rng(1))
        assert values.min() >= 0.0
        assert values.max() <= 3.5
        periods = np.floor(times / 10.0 + 1e-9).astype(int)
        for p in np.unique(periods):
            assert len(set(values[periods == p])) == 1

    def test_invalid(self) -> None:
        """Test negative delays and periods."""
        with pytest.raises(ValueError):
            DelayProcess.constant(-1.0)
        with pytest.raises(ValueError):
            DelayProcess.uniform(1.0, 0.0)


class TestSetpoint:
    """Test reference signals."""

    def test_square(self) -> None:
        """Test the square wave is high for the first half period."""
        values = Setpoint.square(100.0).values(np.array([0.0, 49.99, 50.0, 99.99, 100.0]))
        assert list(values) == [1.0, 1.0, 0.0, 0.0, 1.0]

    def test_samples(self) -> None:
        """Test held samples, zero before the first one."""
        sp = Setpoint.from_samples([(10.0, 2.0), (0.0, 1.0)])
        assert list(sp.values(np.array([-1.0, 0.0, 5.0, 10.0, 20.0]))) == [0.0, 1.0, 1.0, 2.0, 2.0]

    def test_step(self) -> None:
        """Test a constant reference."""
        assert list(Setpoint.step(2.0).values(np.zeros(3))) == [2.0, 2.0, 2.0]


class TestLoopConfig:
    """Test loop configuration checks."""

    def test_defaults_model_to_plant(self, step_loop, plant) -> None:
        """Test the predictor model defaults to the plant."""
        assert step_loop.model == plant
        assert step_loop.time_unit is TimeUnit.MILLISECONDS

    def test_invalid_horizon(self, step_loop) -> None:
        """Test a zero horizon."""
        with pytest.raises(ValueError, match="horizon"):
            replace(step_loop, horizon=0.0)

    def test_horizon_too_short(self, step_loop) -> None:
        """Test the horizon must cover ten slowest time constants."""
        with pytest.raises(ValueError, match="slowest time constant"):
            replace(step_loop, horizon=40.0)

    def test_step_versus_redraw(self, step_loop) -> None:
        """Test the step must resolve the delay redraws."""
        with pytest.raises(ValueError, match="redraw_period"):
            replace(step_loop, step=0.5, sensor_delay=DelayProcess.uniform(1.0, 2.0))

    def test_improper_plant(self, step_loop, controller) -> None:
        """Test the plant must be strictly proper."""
        with pytest.raises(ValueError, match="strictly proper"):
            replace(step_loop, plant=controller, model_plant=None)

    def test_unit_mismatch(self, step_loop) -> None:
        """Test plant and controller must share a unit."""
        seconds = RationalTransferFunction.constant(1.0, TimeUnit.SECONDS)
        with pytest.raises(UnitMismatch):
            replace(step_loop, controller=seconds)

    def test_times(self, step_loop) -> None:
        """Test the sample grid covers the horizon inclusively."""
        times = step_loop.times()
        assert len(times) == 6001
        assert times[-1] == pytest.approx(60.0)


class TestRuns:
    """Test single simulation runs."""

    def test_settles_without_delay(self, step_loop) -> None:
        """Test the integral action removes the steady-state error."""
        trace = run_uncompensated(step_loop)
        assert not trace.diverged
        assert trace.output[-1] == pytest.approx(1.0, abs=1e-3)
        assert trace.output[0] == 0.0

    def test_zero_plant(self, step_loop, plant) -> None:
        """Test a zero plant never moves."""
        zero = RationalTransferFunction(Polynomial(), plant.den, plant.time_unit)
        trace = run_uncompensated(replace(step_loop, plant=zero, model_plant=None))
        assert np.all(trace.output == 0.0)

    def test_predictor_without_delay_is_transparent(self, step_loop) -> None:
        """Test the predictor changes nothing when every delay is zero."""
        plain = run_uncompensated(step_loop)
        smith = run_smith(step_loop)
        assert np.max(np.abs(plain.output - smith.output)) < 1e-9

    def test_predictor_removes_constant_delay(self, step_loop) -> None:
        """Test with an exact model the output is the undelayed response shifted by the actuator delay."""
        ideal = run_uncompensated(step_loop)
        delayed = replace(
            step_loop,
            sensor_delay=DelayProcess.constant(0.5),
            actuator_delay=DelayProcess.constant(1.0),
            model_delay=1.5,
        )
        smith = run_smith(delayed)
        shift = 100
        assert np.all(smith.output[:shift] == 0.0)
        assert np.max(np.abs(smith.output[shift:] - ideal.output[:-shift])) < 1e-6

    def test_rational_model_delay(self, reference_loop) -> None:
        """Test the all-pass model delay runs to a finite result."""
        cfg = replace(reference_loop, model_delay_kind=DelayModelKind.RATIONAL_APPROX)
        trace = run_smith(cfg)
        assert len(trace) > 0
        assert np.all(np.isfinite(trace.output))

    def test_deterministic(self, reference_loop) -> None:
        """Test the same seed reproduces the same trace."""
        a = run_smith(reference_loop)
        b = run_smith(reference_loop)
        assert np.array_equal(a.output, b.output)
        assert np.array_equal(a.sensor_delay, b.sensor_delay)

    def test_seeds_differ(self, reference_loop) -> None:
        """Test another seed draws other delays."""
        a = run_smith(reference_loop)
        b = run_smith(reference_loop.with_seed(1))
        assert not np.array_equal(a.sensor_delay, b.sensor_delay)

    def test_run_mode(self, step_loop) -> None:
        """Test dispatch by mode name."""
        assert run(step_loop, "smith").mode is SimMode.SMITH
        with pytest.raises(ValueError):
            run(step_loop, SimMode.BOTH)

    def test_divergence_truncates(self) -> None:
        """Test an unstable loop stops early and is flagged."""
        plant = RationalTransferFunction(Polynomial((1.0,)), Polynomial((-1.0, 1.0)))
        controller = RationalTransferFunction.constant(0.1)
        cfg = LoopConfig(plant=plant, controller=controller, setpoint=Setpoint.step(), step=0.01, horizon=100.0)
        trace = run_uncompensated(cfg)
        assert trace.diverged
        assert len(trace) < len(cfg.times())

    def test_error_growth_flags_divergence(self) -> None:
        """Test a growing error is flagged long before the output limit, with infinite ISE."""
        plant = RationalTransferFunction(Polynomial((1.0,)), Polynomial((-1.0, 1.0)))
        controller = RationalTransferFunction.constant(0.1)
        cfg = LoopConfig(plant=plant, controller=controller, setpoint=Setpoint.step(), step=0.01, horizon=100.0)
        trace = run_uncompensated(cfg)
        assert trace.diverged
        assert float(np.max(np.abs(trace.output))) < 2e3
        assert trace.metrics.ise == math.inf

    def test_stable_loop_not_flagged(self, reference_loop) -> None:
        """Test the predictor on the reference loop runs the whole horizon with finite ISE."""
        trace = run_smith(reference_loop)
        assert not trace.diverged
        assert len(trace) == len(reference_loop.times())
        assert math.isfinite(trace.metrics.ise)


class TestMetrics:
    """Test trace metrics."""

    def test_ise_of_known_trace(self) -> None:
        """Test ISE, overshoot and settling on a hand-made trace."""
        time = np.arange(5) * 1.0
        output = np.array([0.0, 1.2, 1.0, 1.0, 1.0])
        trace = SimTrace(
            SimMode.PLAIN, time, np.ones(5), 1.0 - output, np.zeros(5), np.zeros(5), np.zeros(5), output, 1.0
        )
        m = trace.metrics
        assert m.ise == pytest.approx(1.0 + 0.04)
        assert m.overshoot == pytest.approx(20.0)
        assert m.settling_time == 2.0

    def test_csv_columns(self, step_loop, tmp_path) -> None:
        """Test one column per signal."""
        trace = run_uncompensated(step_loop)
        path = trace.to_csv(tmp_path / "trace.csv")
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(SimTrace.COLUMNS)
        assert len(rows) == 1 + len(trace)


class TestCompare:
    """Test batches of runs."""

    def test_both_modes(self, step_loop, tmp_path) -> None:
        """Test one plain and one predictor run per config."""
        report = compare([step_loop, step_loop.with_seed(1)])
        assert len(report) == 4
        assert [t.seed for t in report.by_mode("smith")] == [0, 1]
        assert report.ise_ratios() == pytest.approx([1.0, 1.0], rel=1e-6)
        path = write_metrics_csv(report, tmp_path / "metrics.csv")
        assert path.read_text().splitlines()[0] == ",".join(METRICS_CSV_HEADER)

    def test_diverged_plain_ratio(self) -> None:
        """Test a diverged plain run against a bounded predictor run gives ratio 0."""
        time = np.arange(3) * 1.0
        ones = np.ones(3)
        zeros = np.zeros(3)
        plain = SimTrace(SimMode.PLAIN, time, ones, ones, zeros, zeros, zeros, zeros, 1.0, diverged=True)
        smith = SimTrace(SimMode.SMITH, time, ones, zeros, zeros, zeros, zeros, ones * 0.5, 1.0)
        report = ComparisonReport([plain, smith])
        assert plain.metrics.ise == math.inf
        assert smith.metrics.ise == pytest.approx(0.75)
        assert report.ise_ratios() == [0.0]

    def test_identical_configs_identical_metrics(self, reference_loop) -> None:
        """Test repeated configs give repeated metrics."""
        report = compare([reference_loop, reference_loop], SimMode.PLAIN)
        a, b = report.traces
        assert a.metrics.ise == b.metrics.ise
        assert np.array_equal(a.output, b.output)

    def test_empty(self) -> None:
        """Test no configs gives an empty report."""
        assert len(compare([])) == 0

    @pytest.mark.asyncio
    async def test_async(self, step_loop) -> None:
        """Test the async variant."""
        report = await acompare([step_loop], SimMode.SMITH)
        assert [t.mode for t in report.traces] == [SimMode.SMITH]
