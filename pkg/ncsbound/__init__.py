"""Delay bounds of switched Ethernet networks and stability of the control loops they carry."""

from ncsbound.calculus import (
    BoundResult,
    BurstinessSystem,
    DelayAnalysis,
    MuxInput,
    aggregate,
    analyze,
    assemble_system,
    backlog_at,
    bursty_period,
    capacity_sweep,
    end_to_end_delay,
    link_backlog_bound,
    mux_backlog_bound,
    mux_delay_bound,
    propagate_envelope,
    queue_delay_bound,
    solve_burstiness,
    switch_delay_bound,
    write_delay_csv,
)
from ncsbound.config import ControlConfig, PipelineConfig, SimulationConfig
from ncsbound.des_oracle import (
    BoundCheck,
    CampaignReport,
    FrameEvent,
    FrameRecord,
    ObservedStats,
    Workload,
    WorkloadSpec,
    acheck_bound,
    arun_campaign,
    check_bound,
    run_campaign,
    simulate,
    write_frame_trace_csv,
)
from ncsbound.errors import (
    ConfigError,
    EnvelopeViolation,
    ImproperTransferFunction,
    ModelError,
    NcsBoundError,
    NominallyUnstable,
    NonConvergent,
    PoleOnAxis,
    UnitMismatch,
    UnstableInput,
)
from ncsbound.lti import (
    Polynomial,
    RationalTransferFunction,
    StateSpace,
    complementary_sensitivity,
    delay_rational_approx,
    delay_uncertainty_weight,
    discretize,
    evaluate,
    feedback,
    frequency_response,
    is_hurwitz,
    parallel,
    reduce,
    robust_weight,
    series,
    to_state_space,
)
from ncsbound.net_model import (
    ComponentKind,
    Link,
    NetworkModel,
    Stream,
    SwitchSpec,
    TrafficEnvelope,
    ValidationReport,
    components_on_route,
    random_model,
    tree_routes,
    validate,
)
from ncsbound.smith_sim import (
    ComparisonReport,
    DelayModelKind,
    DelayProcess,
    LoopConfig,
    Setpoint,
    SetpointKind,
    SimMode,
    SimTrace,
    acompare,
    compare,
    run_smith,
    run_uncompensated,
)
from ncsbound.stability import (
    GridSpec,
    MaxDelayResult,
    StabilityVerdict,
    check,
    max_tolerable_delay,
    robust_margin,
    sweep,
    write_sweep_csv,
)
from ncsbound.units import TimeUnit, parse_capacity, parse_duration

__version__ = "0.1.0"

__all__ = [
    "BoundCheck",
    "BoundResult",
    "BurstinessSystem",
    "CampaignReport",
    "ComparisonReport",
    "ComponentKind",
    "ConfigError",
    "ControlConfig",
    "DelayAnalysis",
    "DelayModelKind",
    "DelayProcess",
    "EnvelopeViolation",
    "FrameEvent",
    "FrameRecord",
    "GridSpec",
    "ImproperTransferFunction",
    "Link",
    "LoopConfig",
    "MaxDelayResult",
    "ModelError",
    "MuxInput",
    "NcsBoundError",
    "NetworkModel",
    "NominallyUnstable",
    "NonConvergent",
    "ObservedStats",
    "PipelineConfig",
    "PoleOnAxis",
    "Polynomial",
    "RationalTransferFunction",
    "Setpoint",
    "SetpointKind",
    "SimMode",
    "SimTrace",
    "SimulationConfig",
    "StabilityVerdict",
    "StateSpace",
    "Stream",
    "SwitchSpec",
    "TimeUnit",
    "TrafficEnvelope",
    "UnitMismatch",
    "UnstableInput",
    "ValidationReport",
    "Workload",
    "WorkloadSpec",
    "acheck_bound",
    "acompare",
    "aggregate",
    "analyze",
    "arun_campaign",
    "assemble_system",
    "backlog_at",
    "bursty_period",
    "capacity_sweep",
    "check",
    "check_bound",
    "compare",
    "complementary_sensitivity",
    "components_on_route",
    "delay_rational_approx",
    "delay_uncertainty_weight",
    "discretize",
    "end_to_end_delay",
    "evaluate",
    "feedback",
    "frequency_response",
    "is_hurwitz",
    "link_backlog_bound",
    "max_tolerable_delay",
    "mux_backlog_bound",
    "mux_delay_bound",
    "parallel",
    "parse_capacity",
    "parse_duration",
    "propagate_envelope",
    "queue_delay_bound",
    "random_model",
    "reduce",
    "robust_margin",
    "robust_weight",
    "run_campaign",
    "run_smith",
    "run_uncompensated",
    "series",
    "simulate",
    "solve_burstiness",
    "switch_delay_bound",
    "sweep",
    "to_state_space",
    "tree_routes",
    "validate",
    "write_delay_csv",
    "write_frame_trace_csv",
    "write_sweep_csv",
]
