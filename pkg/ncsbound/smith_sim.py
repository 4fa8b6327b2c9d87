"""Fixed-step simulation of a networked feedback loop with and without a Smith predictor.

The plant output reaches the controller through a sensor-side network delay and the
control signal reaches the plant through an actuator-side delay. Both delays may
vary with time; they act as transport buffers read with linear interpolation.

With the predictor the controller sees the corrected error
``r - y_delayed + y*_delayed - y*_non_delayed`` where ``y*`` is the output of the
plant model driven by the undelayed control signal.
"""

import asyncio
import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from ncsbound.errors import UnitMismatch
from ncsbound.lti import (
    DiscreteStateSpace,
    RationalTransferFunction,
    delay_rational_approx,
    discretize,
    series,
    to_state_space,
)
from ncsbound.units import TimeUnit

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9
# tracking error beyond this multiple of the largest setpoint magnitude marks a diverging loop
DIVERGENCE_GROWTH = 1e3
SETTLING_BAND = 0.02


class SimMode(str, Enum):
    PLAIN = "plain"
    SMITH = "smith"
    BOTH = "both"

    def modes(self) -> list["SimMode"]:
        """Concrete loop variants run for this mode."""
        if self is SimMode.BOTH:
            return [SimMode.PLAIN, SimMode.SMITH]
        return [self]


class DelayModelKind(str, Enum):
    """How the predictor realizes its internal delay."""

    EXACT_BUFFER = "exact-buffer"
    RATIONAL_APPROX = "rational-approx"


class DelayKind(str, Enum):
    CONSTANT = "constant"
    UNIFORM = "uniform"


class SetpointKind(str, Enum):
    STEP = "step"
    SQUARE = "square"
    SAMPLES = "samples"


@dataclass(frozen=True)
class DelayProcess:
    """Network delay of one direction: constant, or uniform in [0, upper] redrawn periodically."""

    kind: DelayKind = DelayKind.CONSTANT
    value: float = 0.0
    redraw_period: float = 10.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DelayKind(self.kind))
        if self.value < 0:
            raise ValueError("delay must be >= 0")
        if not self.redraw_period > 0:
            raise ValueError("redraw_period must be > 0")

    @classmethod
    def constant(cls, tau: float) -> "DelayProcess":
        return cls(DelayKind.CONSTANT, tau)

    @classmethod
    def uniform(cls, upper: float, redraw_period: float = 10.0) -> "DelayProcess":
        return cls(DelayKind.UNIFORM, upper, redraw_period)

    @property
    def upper(self) -> float:
        return self.value

    def realize(self, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Delay applied at every sample time, constant within each redraw period."""
        if self.kind is DelayKind.CONSTANT or self.value == 0:
            return np.full(len(times), self.value)
        periods = np.floor(times / self.redraw_period + 1e-9).astype(int)
        draws = rng.uniform(0.0, self.value, int(periods[-1]) + 1 if len(times) else 0)
        return draws[periods]


@dataclass(frozen=True)
class Setpoint:
    """Reference signal: step, square wave between amplitude and 0, or held samples."""

    kind: SetpointKind = SetpointKind.SQUARE
    amplitude: float = 1.0
    period: float = 100.0
    samples: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SetpointKind(self.kind))
        if self.kind is SetpointKind.SQUARE and not self.period > 0:
            raise ValueError("square setpoint needs period > 0")
        if self.kind is SetpointKind.SAMPLES and not self.samples:
            raise ValueError("samples setpoint needs at least one sample")

    @classmethod
    def step(cls, amplitude: float = 1.0) -> "Setpoint":
        return cls(SetpointKind.STEP, amplitude)

    @classmethod
    def square(cls, period: float = 100.0, amplitude: float = 1.0) -> "Setpoint":
        return cls(SetpointKind.SQUARE, amplitude, period)

    @classmethod
    def from_samples(cls, samples: Sequence[tuple[float, float]]) -> "Setpoint":
        return cls(SetpointKind.SAMPLES, samples=tuple(sorted((float(t), float(v)) for t, v in samples)))

    def values(self, times: np.ndarray) -> np.ndarray:
        if self.kind is SetpointKind.STEP:
            return np.full(len(times), self.amplitude)
        if self.kind is SetpointKind.SQUARE:
            phase = np.mod(times, self.period)
            return np.where(phase < self.period / 2, self.amplitude, 0.0)
        ts = np.array([t for t, _ in self.samples])
        vs = np.array([v for _, v in self.samples])
        idx = np.searchsorted(ts, times, side="right") - 1
        return np.where(idx >= 0, vs[np.clip(idx, 0, None)], 0.0)


@dataclass(frozen=True)
class LoopConfig:
    """Networked loop: plant, controller, predictor model and both network delays.

    Times are expressed in the plant's time unit.
    """

    plant: RationalTransferFunction
    controller: RationalTransferFunction
    model_plant: RationalTransferFunction | None = None
    model_delay: float = 0.0
    model_delay_kind: DelayModelKind = DelayModelKind.EXACT_BUFFER
    sensor_delay: DelayProcess = field(default_factory=DelayProcess)
    actuator_delay: DelayProcess = field(default_factory=DelayProcess)
    setpoint: Setpoint = field(default_factory=Setpoint)
    step: float = 0.01
    horizon: float = 200.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_delay_kind", DelayModelKind(self.model_delay_kind))
        if self.model_plant is None:
            object.__setattr__(self, "model_plant", self.plant)
        units = {self.plant.time_unit, self.controller.time_unit, self.model.time_unit}
        if len(units) > 1:
            raise UnitMismatch("plant, controller and model use different time units")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.model_delay < 0:
            raise ValueError("model_delay must be >= 0")
        for name, process in (("sensor_delay", self.sensor_delay), ("actuator_delay", self.actuator_delay)):
            if process.kind is DelayKind.UNIFORM and self.step > process.redraw_period / 10:
                raise ValueError(f"{name}: step must be <= redraw_period / 10")
        for name, tf in (("plant", self.plant), ("model_plant", self.model)):
            if not tf.is_strictly_proper:
                raise ValueError(f"{name} must be strictly proper")
        slowest = _slowest_time_constant(self.plant)
        if self.horizon < 10 * slowest:
            raise ValueError(
                f"horizon {self.horizon:g} shorter than 10 x slowest time constant {slowest:g}"
            )

    @property
    def model(self) -> RationalTransferFunction:
        assert self.model_plant is not None
        return self.model_plant

    @property
    def time_unit(self) -> TimeUnit:
        return self.plant.time_unit

    def with_seed(self, seed: int) -> "LoopConfig":
        return replace(self, seed=seed)

    def times(self) -> np.ndarray:
        return np.arange(int(round(self.horizon / self.step)) + 1) * self.step


def _slowest_time_constant(tf: RationalTransferFunction) -> float:
    real = [-p.real for p in tf.poles() if p.real < 0]
    return 1.0 / min(real) if real else 0.0


@dataclass(frozen=True)
class Metrics:
    ise: float
    overshoot: float
    settling_time: float


@dataclass(eq=False)
class SimTrace:
    """Sampled signals of one run; all columns have the same length."""

    mode: SimMode
    time: np.ndarray
    setpoint: np.ndarray
    error: np.ndarray
    control: np.ndarray
    actuator_delay: np.ndarray
    sensor_delay: np.ndarray
    output: np.ndarray
    step: float
    seed: int = 0
    diverged: bool = False
    time_unit: TimeUnit = TimeUnit.SECONDS

    def __len__(self) -> int:
        return len(self.time)

    @property
    def metrics(self) -> Metrics:
        return trace_metrics(self)

    COLUMNS = ("time", "setpoint", "error", "control", "actuator_delay", "sensor_delay", "output")

    def to_csv(self, path: str | Path) -> Path:
        """One column per signal, one row per sample."""
        path = Path(path)
        columns = [getattr(self, name) for name in self.COLUMNS]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.COLUMNS)
            for row in zip(*columns, strict=True):
                writer.writerow([repr(float(v)) for v in row])
        return path


def trace_metrics(trace: SimTrace) -> Metrics:
    """ISE over the whole trace; overshoot and 2 % settling time on the first setpoint segment.

    A diverged run has unbounded error, so its ISE is infinite.
    """
    if len(trace) == 0:
        return Metrics(math.inf if trace.diverged else 0.0, 0.0, math.nan)
    err = trace.setpoint - trace.output
    ise = math.inf if trace.diverged else float(np.sum(err * err) * trace.step)

    r = trace.setpoint
    changes = np.flatnonzero(r != r[0])
    end = int(changes[0]) if changes.size else len(r)
    target = float(r[0])
    y = trace.output[:end]
    if target == 0:
        return Metrics(ise, 0.0, math.nan)
    overshoot = max(0.0, (float(np.max(y * np.sign(target))) - abs(target)) / abs(target) * 100.0)
    outside = np.flatnonzero(np.abs(y - target) > SETTLING_BAND * abs(target))
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] + 1 < len(y):
        settling = float(trace.time[outside[-1] + 1] - trace.time[0])
    else:
        settling = math.nan
    return Metrics(ise, overshoot, settling)


def _read(history: np.ndarray, position: float) -> float:
    """Transport-buffer read at a fractional sample index; zero before the start."""
    if position < 0:
        return 0.0
    i = int(position)
    frac = position - i
    if frac == 0.0:
        return float(history[i])
    return float(history[i]) * (1.0 - frac) + float(history[i + 1]) * frac


class _Discrete:
    """Discretized SISO system with its state."""

    def __init__(self, tf: RationalTransferFunction, step: float):
        sys: DiscreteStateSpace = discretize(to_state_space(tf), step)
        self.a = sys.a
        self.b = sys.b[:, 0] if sys.order else np.zeros(0)
        self.c = sys.c[0, :] if sys.order else np.zeros(0)
        self.d = float(sys.d[0, 0])
        self.x = np.zeros(sys.order)

    def output(self, u: float = 0.0) -> float:
        return float(self.c @ self.x) + self.d * u

    def advance(self, u: float) -> None:
        if self.x.size:
            self.x = self.a @ self.x + self.b * u


def _run(cfg: LoopConfig, mode: SimMode) -> SimTrace:
    h = cfg.step
    times = cfg.times()
    n = len(times)
    sensor_rng, actuator_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(cfg.seed).spawn(2)
    )
    tau_s = cfg.sensor_delay.realize(times, sensor_rng)
    tau_a = cfg.actuator_delay.realize(times, actuator_rng)
    r = cfg.setpoint.values(times)
    scale = float(np.max(np.abs(r))) if n else 0.0
    err_limit = DIVERGENCE_GROWTH * scale if scale > 0 else math.inf

    plant = _Discrete(cfg.plant, h)
    controller = _Discrete(cfg.controller, h)
    smith = mode is SimMode.SMITH
    model = _Discrete(cfg.model, h)
    delayed_model = None
    if smith and cfg.model_delay_kind is DelayModelKind.RATIONAL_APPROX:
        approx = delay_rational_approx(cfg.model_delay, cfg.time_unit)
        delayed_model = _Discrete(series(approx, cfg.model), h)
    model_shift = cfg.model_delay / h

    y = np.zeros(n)
    y_model = np.zeros(n)
    u = np.zeros(n)
    err = np.zeros(n)
    diverged = False
    last = n
    for k in range(n):
        y[k] = plant.output()
        y_delayed = _read(y, k - tau_s[k] / h)
        if smith:
            y_model[k] = model.output()
            if delayed_model is None:
                model_delayed = _read(y_model, k - model_shift)
            else:
                model_delayed = delayed_model.output()
            err[k] = r[k] - y_delayed + model_delayed - y_model[k]
        else:
            err[k] = r[k] - y_delayed
        u[k] = controller.output(err[k])
        u_applied = _read(u, k - tau_a[k] / h)

        if not math.isfinite(y[k]) or abs(y[k]) > DIVERGENCE_LIMIT or abs(r[k] - y[k]) > err_limit:
            diverged = True
            last = k
            logger.warning(
                f"{mode.value} loop diverged at t={times[k]:g} {cfg.time_unit.value} (seed {cfg.seed})"
            )
            break

        plant.advance(u_applied)
        controller.advance(err[k])
        if smith:
            model.advance(u[k])
            if delayed_model is not None:
                delayed_model.advance(u[k])

    trace = SimTrace(
        mode=mode,
        time=times[:last],
        setpoint=r[:last],
        error=err[:last],
        control=u[:last],
        actuator_delay=tau_a[:last],
        sensor_delay=tau_s[:last],
        output=y[:last],
        step=h,
        seed=cfg.seed,
        diverged=diverged,
        time_unit=cfg.time_unit,
    )
    logger.debug(f"{mode.value} run seed {cfg.seed}: ISE {trace.metrics.ise:.6g}")
    return trace


def run_uncompensated(cfg: LoopConfig) -> SimTrace:
    """Unity feedback through the network: the controller sees r - y_delayed.

    Instability is a result here: once the output leaves the finite range or the
    tracking error grows past ``DIVERGENCE_GROWTH`` times the largest setpoint, the
    trace is truncated, ``diverged`` is set and the ISE is infinite.
    """
    return _run(cfg, SimMode.PLAIN)


def run_smith(cfg: LoopConfig) -> SimTrace:
    """Same loop with the Smith predictor minor loops around the controller."""
    return _run(cfg, SimMode.SMITH)


def run(cfg: LoopConfig, mode: SimMode | str) -> SimTrace:
    mode = SimMode(mode)
    if mode is SimMode.BOTH:
        raise ValueError("run a concrete mode, not both")
    return _run(cfg, mode)


@dataclass
class ComparisonReport:
    """Metrics of every (config, mode) run plus the traces for plotting."""

    traces: list[SimTrace] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.traces)

    def by_mode(self, mode: SimMode | str) -> list[SimTrace]:
        mode = SimMode(mode)
        return [t for t in self.traces if t.mode is mode]

    def ise_ratios(self) -> list[float]:
        """ISE(smith) / ISE(plain) for each config run in both modes, in order.

        A diverged plain run against a bounded predictor run gives 0.
        """
        plain, smith = self.by_mode(SimMode.PLAIN), self.by_mode(SimMode.SMITH)
        return [
            s.metrics.ise / p.metrics.ise if p.metrics.ise > 0 else math.inf
            for p, s in zip(plain, smith, strict=False)
        ]

    def rows(self) -> list[list[Any]]:
        out = []
        for t in self.traces:
            m = t.metrics
            out.append([t.mode.value, t.seed, m.ise, m.overshoot, m.settling_time, int(t.diverged)])
        return out


METRICS_CSV_HEADER = ["mode", "seed", "ise", "overshoot_pct", "settling_time", "diverged"]


def write_metrics_csv(report: ComparisonReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_CSV_HEADER)
        writer.writerows(report.rows())
    return path


async def acompare(
    cfgs: Sequence[LoopConfig], mode: SimMode | str = SimMode.BOTH
) -> ComparisonReport:
    """Run every config in the requested modes concurrently.

    Args:
        cfgs: Loop configurations, typically one per seed
        mode: plain, smith or both

    Returns:
        ComparisonReport with traces ordered by config, then mode
    """
    modes = SimMode(mode).modes()
    traces = await asyncio.gather(
        *(asyncio.to_thread(_run, cfg, m) for cfg in cfgs for m in modes)
    )
    return ComparisonReport(list(traces))


def compare(cfgs: Sequence[LoopConfig], mode: SimMode | str = SimMode.BOTH) -> ComparisonReport:
    """Sync wrapper for acompare."""
    return asyncio.run(acompare(cfgs, mode))
