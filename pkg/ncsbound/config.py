"""Pipeline configuration loaded from one TOML file.

Sections: ``[network]`` and ``[[stream]]`` (see :mod:`ncsbound.net_model`),
``[control]``, ``[simulation]`` and ``[output]``. Each section can be built on its own
with ``from_mapping``.
"""

import logging
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ncsbound.errors import ConfigError
from ncsbound.lti import RationalTransferFunction
from ncsbound.net_model import NetworkModel, load_toml
from ncsbound.smith_sim import (
    DelayKind,
    DelayModelKind,
    DelayProcess,
    LoopConfig,
    Setpoint,
    SetpointKind,
)
from ncsbound.stability import GridSpec
from ncsbound.units import TimeUnit, parse_duration

logger = logging.getLogger(__name__)

OUT_ENV = "NCSBOUND_OUT"
DEFAULT_OUT = "ncsbound-out"


def _table(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError("must be a table", field=key)
    return value


def _time(value: Any, unit: TimeUnit, field: str) -> float:
    """A duration in ``unit``; bare numbers are already in ``unit``."""
    if isinstance(value, bool):
        raise ConfigError("expected a duration", field=field)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return unit.from_seconds(parse_duration(value, field=field))
    raise ConfigError("expected a duration", field=field)


def _coefficients(value: Any, field: str) -> tuple[float, ...]:
    if not isinstance(value, Sequence) or isinstance(value, str) or not value:
        raise ConfigError("expected a non-empty list of coefficients", field=field)
    try:
        return tuple(float(c) for c in value)
    except (TypeError, ValueError) as e:
        raise ConfigError("coefficients must be numbers", field=field) from e


def _tf(section: Mapping[str, Any], prefix: str, unit: TimeUnit) -> RationalTransferFunction:
    num = _coefficients(section.get(f"{prefix}_num"), f"control.{prefix}_num")
    den = _coefficients(section.get(f"{prefix}_den", [1.0]), f"control.{prefix}_den")
    try:
        return RationalTransferFunction(num, den, unit)
    except ValueError as e:
        raise ConfigError(str(e), field=f"control.{prefix}_den") from e


@dataclass(frozen=True)
class ControlConfig:
    """Process and controller transfer functions (ascending coefficients) and the stability grid."""

    plant: RationalTransferFunction
    controller: RationalTransferFunction
    model_plant: RationalTransferFunction | None = None
    grid: GridSpec = field(default_factory=GridSpec)
    sensor_stream: str | None = None
    actuator_stream: str | None = None

    @property
    def time_unit(self) -> TimeUnit:
        return self.plant.time_unit

    @classmethod
    def from_mapping(cls, section: Mapping[str, Any]) -> "ControlConfig":
        """Build from the ``[control]`` table.

        Args:
            section: Mapping with ``time_unit``, ``plant_num``/``plant_den``,
                ``controller_num``/``controller_den``, optional ``model_num``/``model_den``,
                ``sensor_stream``, ``actuator_stream`` and a ``[control.grid]`` table

        Returns:
            ControlConfig instance
        """
        try:
            unit = TimeUnit(section.get("time_unit", "s"))
        except ValueError as e:
            raise ConfigError(f"unknown time unit {section.get('time_unit')!r}", field="control.time_unit") from e
        plant = _tf(section, "plant", unit)
        controller = _tf(section, "controller", unit)
        model = _tf(section, "model", unit) if "model_num" in section else None

        grid_raw = section.get("grid", {})
        try:
            grid = GridSpec(
                omega_min=float(grid_raw.get("omega_min", 1e-3)),
                omega_max=float(grid_raw.get("omega_max", 1e3)),
                points_per_decade=int(grid_raw.get("points_per_decade", 200)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), field="control.grid") from e

        def stream_ref(key: str) -> str | None:
            value = section.get(key)
            return None if value is None else str(value)

        return cls(
            plant,
            controller,
            model,
            grid,
            stream_ref("sensor_stream"),
            stream_ref("actuator_stream"),
        )


@dataclass(frozen=True)
class SimulationConfig:
    """Simulation settings; times in the control section's time unit.

    ``model_delay`` and ``ubd`` left as ``None`` are taken from the network bounds.
    """

    step: float = 0.01
    horizon: float = 200.0
    redraw_period: float = 10.0
    setpoint: Setpoint = field(default_factory=Setpoint)
    delay_kind: DelayKind = DelayKind.UNIFORM
    model_delay: float | None = None
    model_delay_kind: DelayModelKind = DelayModelKind.EXACT_BUFFER
    ubd: float | None = None
    runs: int = 1

    @classmethod
    def from_mapping(cls, section: Mapping[str, Any], unit: TimeUnit) -> "SimulationConfig":
        def t(key: str, default: float) -> float:
            return _time(section.get(key, default), unit, f"simulation.{key}")

        def optional(key: str) -> float | None:
            value = section.get(key)
            if value is None or value == "ubd":
                return None
            return _time(value, unit, f"simulation.{key}")

        try:
            kind = SetpointKind(section.get("setpoint", "square"))
            if kind is SetpointKind.STEP:
                setpoint = Setpoint.step(float(section.get("amplitude", 1.0)))
            elif kind is SetpointKind.SQUARE:
                setpoint = Setpoint.square(t("setpoint_period", 100.0), float(section.get("amplitude", 1.0)))
            else:
                setpoint = Setpoint.from_samples(
                    [(_time(ts, unit, "simulation.samples"), float(v)) for ts, v in section.get("samples", [])]
                )
            return cls(
                step=t("step", 0.01),
                horizon=t("horizon", 200.0),
                redraw_period=t("redraw_period", 10.0),
                setpoint=setpoint,
                delay_kind=DelayKind(section.get("delay", "uniform")),
                model_delay=optional("model_delay"),
                model_delay_kind=DelayModelKind(section.get("model_delay_kind", "exact-buffer")),
                ubd=optional("ubd"),
                runs=int(section.get("runs", 1)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), field="simulation") from e

    def loop_configs(
        self, control: ControlConfig, sensor_ubd: float, actuator_ubd: float, seed: int = 0
    ) -> list[LoopConfig]:
        """One loop configuration per run, seeds ``seed``, ``seed + 1``, ..."""
        if self.delay_kind is DelayKind.UNIFORM:
            sensor = DelayProcess.uniform(sensor_ubd, self.redraw_period)
            actuator = DelayProcess.uniform(actuator_ubd, self.redraw_period)
        else:
            sensor = DelayProcess.constant(sensor_ubd)
            actuator = DelayProcess.constant(actuator_ubd)
        model_delay = sensor_ubd if self.model_delay is None else self.model_delay
        return [
            LoopConfig(
                plant=control.plant,
                controller=control.controller,
                model_plant=control.model_plant,
                model_delay=model_delay,
                model_delay_kind=self.model_delay_kind,
                sensor_delay=sensor,
                actuator_delay=actuator,
                setpoint=self.setpoint,
                step=self.step,
                horizon=self.horizon,
                seed=seed + n,
            )
            for n in range(max(self.runs, 1))
        ]


@dataclass(frozen=True)
class OutputConfig:
    directory: Path = Path(DEFAULT_OUT)
    formats: frozenset[str] = frozenset({"csv"})

    @classmethod
    def from_mapping(cls, section: Mapping[str, Any]) -> "OutputConfig":
        formats = frozenset(str(f) for f in section.get("formats", ["csv"])) | {"csv"}
        unknown = formats - {"csv", "svg", "json"}
        if unknown:
            raise ConfigError(f"unknown formats {sorted(unknown)}", field="output.formats")
        return cls(Path(section.get("dir", DEFAULT_OUT)), formats)

    def resolve(self, cli_out: str | None = None) -> Path:
        """Output directory: $NCSBOUND_OUT, then --out, then the configured one."""
        return Path(os.environ.get(OUT_ENV) or cli_out or self.directory)


@dataclass(frozen=True)
class PipelineConfig:
    """Whole pipeline: network, control loop, simulation and outputs."""

    network: NetworkModel
    control: ControlConfig | None = None
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        """Load and cross-check a pipeline TOML file.

        Raises:
            ConfigError: syntax error, missing key or dangling stream reference
        """
        config = cls.from_mapping(load_toml(path), source=Path(path))
        logger.info(f"Loaded {path}: {len(config.network.streams)} stream(s)")
        return config

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], *, source: Path | None = None) -> "PipelineConfig":
        network = NetworkModel.from_mapping(data)
        control = None
        simulation = SimulationConfig()
        if "control" in data:
            control = ControlConfig.from_mapping(_table(data, "control"))
            simulation = SimulationConfig.from_mapping(_table(data, "simulation"), control.time_unit)
            stream_ids = {s.id for s in network.streams}
            for key in ("sensor_stream", "actuator_stream"):
                ref = getattr(control, key)
                if ref is not None and ref not in stream_ids:
                    raise ConfigError(f"unknown stream {ref!r}", field=f"control.{key}")
        output = OutputConfig.from_mapping(_table(data, "output"))
        return cls(network, control, simulation, output, source)

    def require_control(self) -> ControlConfig:
        if self.control is None:
            raise ConfigError("missing [control] section", field="control")
        return self.control
