"""Pytest configuration and shared fixtures."""

from pathlib import Path

import pytest

from ncsbound.calculus import MuxInput
from ncsbound.config import PipelineConfig
from ncsbound.lti import Polynomial, RationalTransferFunction
from ncsbound.net_model import Link, NetworkModel, Stream, SwitchSpec, TrafficEnvelope
from ncsbound.smith_sim import DelayProcess, LoopConfig, Setpoint
from ncsbound.units import TimeUnit

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def duplex(a: str, b: str, capacity: float) -> list[Link]:
    """Both directions of a cable."""
    return [Link(a, b, capacity), Link(b, a, capacity)]


@pytest.fixture(scope="session")
def case_study_path() -> Path:
    """Four stations on one switch, six streams, control loop in ms."""
    return CONFIG_DIR / "paper_case_study.toml"


@pytest.fixture(scope="session")
def case_study_config(case_study_path: Path) -> PipelineConfig:
    return PipelineConfig.from_file(case_study_path)


@pytest.fixture(scope="session")
def case_study_model(case_study_config: PipelineConfig) -> NetworkModel:
    return case_study_config.network


@pytest.fixture
def two_inputs() -> list[MuxInput]:
    """Two-input multiplexer used throughout the bound examples."""
    return [
        MuxInput(TrafficEnvelope(1000.0, 1e5), 1e6, 100.0, "a"),
        MuxInput(TrafficEnvelope(500.0, 1e5), 1e6, 100.0, "b"),
    ]


@pytest.fixture
def single_switch_model() -> NetworkModel:
    """One stream through one idle switch, every capacity 1.25e6 bytes/s."""
    return NetworkModel(
        stations=("a", "b"),
        switches=(SwitchSpec("s", 2, backplane_capacity=1.25e6),),
        links=tuple(duplex("a", "s", 1.25e6) + duplex("s", "b", 1.25e6)),
        streams=(Stream("1", "a", "b", TrafficEnvelope(72.0, 7200.0), 72.0, ("s",)),),
    )


@pytest.fixture
def chain_model() -> NetworkModel:
    """Two switches in a row, two streams crossing both."""
    links = (
        duplex("a1", "sw1", 1.25e6)
        + duplex("a2", "sw1", 1.25e6)
        + duplex("sw1", "sw2", 1.25e6)
        + duplex("sw2", "b1", 1.25e6)
        + duplex("sw2", "b2", 1.25e6)
    )
    return NetworkModel(
        stations=("a1", "a2", "b1", "b2"),
        switches=(SwitchSpec("sw1", 3), SwitchSpec("sw2", 3)),
        links=tuple(links),
        streams=(
            Stream("1", "a1", "b1", TrafficEnvelope(72.0, 7200.0), 72.0, ("sw1", "sw2")),
            Stream("2", "a2", "b2", TrafficEnvelope(1526.0, 305200.0), 1526.0, ("sw1", "sw2")),
        ),
    )


@pytest.fixture(scope="session")
def plant() -> RationalTransferFunction:
    """P(s) = 2 / ((s + 5)(s + 0.2)), time in ms."""
    return RationalTransferFunction(
        Polynomial((2.0,)), Polynomial((1.0, 5.2, 1.0)), TimeUnit.MILLISECONDS
    )


@pytest.fixture(scope="session")
def controller() -> RationalTransferFunction:
    """PI controller C(s) = 0.5 + 0.5/s, time in ms."""
    return RationalTransferFunction(
        Polynomial((0.5, 0.5)), Polynomial((0.0, 1.0)), TimeUnit.MILLISECONDS
    )


@pytest.fixture
def reference_loop(
    plant: RationalTransferFunction, controller: RationalTransferFunction
) -> LoopConfig:
    """Both delays uniform in [0, 3.5 ms] redrawn every 10 ms, square setpoint."""
    return LoopConfig(
        plant=plant,
        controller=controller,
        model_delay=3.5,
        sensor_delay=DelayProcess.uniform(3.5, 10.0),
        actuator_delay=DelayProcess.uniform(3.5, 10.0),
        setpoint=Setpoint.square(100.0),
        step=0.01,
        horizon=200.0,
    )
