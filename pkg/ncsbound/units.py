"""Unit parsing for capacities and durations.

Internally data is counted in bytes, rates in bytes/second and time in seconds.
Conversions happen here and nowhere else.
"""

import re
from enum import Enum

from ncsbound.errors import ConfigError


class TimeUnit(str, Enum):
    """Time unit annotation carried by transfer functions and delays."""

    SECONDS = "s"
    MILLISECONDS = "ms"

    def seconds(self) -> float:
        """Length of one unit in seconds."""
        return {"s": 1.0, "ms": 1e-3}[self.value]

    def from_seconds(self, value: float) -> float:
        """Express a duration given in seconds in this unit."""
        return value / self.seconds()


_CAPACITY_FACTORS = {
    "bps": 1 / 8,
    "kbps": 1e3 / 8,
    "Mbps": 1e6 / 8,
    "Gbps": 1e9 / 8,
    "Bps": 1.0,
    "kBps": 1e3,
    "MBps": 1e6,
    "GBps": 1e9,
}

_DURATION_FACTORS = {"s": 1.0, "ms": 1e-3, "us": 1e-6}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


def _split(text: str, field: str) -> tuple[float, str]:
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise ConfigError(f"cannot parse quantity {text!r}", field=field)
    return float(match.group(1)), match.group(2)


def parse_capacity(value: float | int | str, *, field: str = "capacity") -> float:
    """Parse a capacity into bytes/second.

    Bare numbers are bytes/second. Strings accept ``bps|kbps|Mbps|Gbps`` (bits)
    and ``Bps|kBps|MBps|GBps`` (bytes).

    Args:
        value: Number or string such as ``"10Mbps"``
        field: Configuration key, used in diagnostics

    Returns:
        Capacity in bytes/second
    """
    if isinstance(value, bool):
        raise ConfigError("capacity must be a number or string", field=field)
    if isinstance(value, (int, float)):
        return float(value)
    number, suffix = _split(value, field)
    if not suffix:
        return number
    if suffix not in _CAPACITY_FACTORS:
        raise ConfigError(f"unknown capacity unit {suffix!r}", field=field)
    return number * _CAPACITY_FACTORS[suffix]


def parse_duration(value: float | int | str, *, field: str = "duration") -> float:
    """Parse a duration into seconds. Bare numbers are seconds."""
    if isinstance(value, bool):
        raise ConfigError("duration must be a number or string", field=field)
    if isinstance(value, (int, float)):
        return float(value)
    number, suffix = _split(value, field)
    if not suffix:
        return number
    if suffix not in _DURATION_FACTORS:
        raise ConfigError(f"unknown duration unit {suffix!r}", field=field)
    return number * _DURATION_FACTORS[suffix]


def parse_time_value(text: str, *, field: str = "time") -> tuple[float, TimeUnit | None]:
    """Split ``"3.5ms"`` into ``(3.5, TimeUnit.MILLISECONDS)``.

    A bare number returns ``None`` as unit, meaning "in the unit of the context".
    """
    number, suffix = _split(text, field)
    if not suffix:
        return number, None
    try:
        return number, TimeUnit(suffix)
    except ValueError as e:
        raise ConfigError(f"unknown time unit {suffix!r}", field=field) from e
