"""SVG figures: the stability sweep and the closed-loop traces."""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from ncsbound.smith_sim import ComparisonReport, SimMode  # noqa: E402
from ncsbound.stability import StabilityVerdict, SweepResult  # noqa: E402

logger = logging.getLogger(__name__)


def plot_stability(
    sweep: SweepResult, path: str | Path, verdict: StabilityVerdict | None = None
) -> Path:
    """|T(jw)| against 1/(ubd*w) on log-log axes, violating bands shaded."""
    path = Path(path)
    unit = sweep.time_unit.value
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        ax.loglog(sweep.omegas, sweep.magnitude, label="|T(jw)|")
        if sweep.ubd > 0:
            ax.loglog(sweep.omegas, sweep.limit, "--", label=f"1/(UBD w), UBD={sweep.ubd:g} {unit}")
        if verdict is not None:
            for low, high in verdict.violating_bands:
                ax.axvspan(low, high, color="tab:red", alpha=0.15)
        ax.set_xlabel(f"w [rad/{unit}]")
        ax.set_ylabel("magnitude")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    logger.debug(f"Wrote {path}")
    return path


def plot_traces(report: ComparisonReport, path: str | Path) -> Path:
    """Setpoint and plant output of the first run of each mode."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    try:
        drawn_setpoint = False
        for mode in (SimMode.PLAIN, SimMode.SMITH):
            runs = report.by_mode(mode)
            if not runs:
                continue
            trace = runs[0]
            if not drawn_setpoint:
                ax.plot(trace.time, trace.setpoint, "k:", label="setpoint")
                drawn_setpoint = True
            label = "with delay compensation" if mode is SimMode.SMITH else "no delay compensation"
            ax.plot(trace.time, trace.output, label=label)
            ax.set_xlabel(f"t [{trace.time_unit.value}]")
        ax.set_ylabel("output")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    logger.debug(f"Wrote {path}")
    return path
