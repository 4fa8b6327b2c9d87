"""Command line entry point: ``ncsbound delay|stability|simulate|validate``.

Exit codes: 0 success, 1 configuration or unit error, 2 criterion violated,
3 burstiness equations not solvable, 4 closed loop unstable without delay.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from ncsbound import __version__
from ncsbound.calculus import (
    DelayAnalysis,
    analyze,
    capacity_sweep,
    write_capacity_sweep_csv,
    write_delay_csv,
    write_delay_json,
)
from ncsbound.config import OutputConfig, PipelineConfig
from ncsbound.des_oracle import (
    CAMPAIGN_HORIZON,
    Workload,
    run_campaign,
    simulate,
    write_campaign_csv,
    write_frame_trace_csv,
)
from ncsbound.errors import ConfigError, ModelError, NominallyUnstable, NonConvergent, UnitMismatch
from ncsbound.net_model import NetworkModel, validate
from ncsbound.smith_sim import SimMode, compare, write_metrics_csv
from ncsbound.stability import check, max_tolerable_delay, robust_margin, sweep, write_sweep_csv
from ncsbound.units import TimeUnit, parse_time_value

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATED = 2
EXIT_NONCONVERGENT = 3
EXIT_NOMINALLY_UNSTABLE = 4

SWEEP_CAPACITIES = (6.25e5, 1.25e6, 1.25e7)


def _out_dir(args: argparse.Namespace, config: PipelineConfig | None) -> Path:
    output = config.output if config is not None else OutputConfig()
    out = output.resolve(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _wants(args: argparse.Namespace, config: PipelineConfig | None, fmt: str) -> bool:
    flag = {"svg": args.plot, "json": args.json}[fmt]
    return flag or (config is not None and fmt in config.output.formats)


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _load(args: argparse.Namespace) -> PipelineConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    return PipelineConfig.from_file(args.config)


def _analyze(model: NetworkModel) -> DelayAnalysis:
    report = validate(model)
    hard = [v for v in report if v.kind != "utilization ≥ 1"]
    if hard:
        raise ModelError("; ".join(str(v) for v in hard))
    return analyze(model)


def cmd_delay(args: argparse.Namespace) -> int:
    config = _load(args)
    analysis = _analyze(config.network)
    out = _out_dir(args, config)

    for sid, result in analysis.streams.items():
        print(f"stream {sid}: UBD {result.ubd * 1e3:.6f} ms")
    write_delay_csv(analysis, out / "delays.csv")

    table = capacity_sweep(config.network, SWEEP_CAPACITIES)
    write_capacity_sweep_csv(table, out / "capacity_sweep.csv")
    for capacity, ubds in table.items():
        listed = ", ".join(f"{sid}={ubd * 1e3:.4g}ms" for sid, ubd in ubds.items())
        print(f"capacity {capacity * 8 / 1e6:g} Mb/s: {listed}")

    if _wants(args, config, "json"):
        write_delay_json(
            analysis,
            out / "delays.json",
            capacity_sweep={repr(c): u for c, u in table.items()},
        )
    return EXIT_OK


def _ubd(args: argparse.Namespace, config: PipelineConfig, unit: TimeUnit) -> tuple[float, TimeUnit | None]:
    """The delay bound to use, as (value, unit); unit None means the loop's own."""
    control = config.require_control()
    text = args.ubd
    if text is None:
        if config.simulation.ubd is not None:
            return config.simulation.ubd, None
        text = "from-network"
    if text != "from-network":
        return parse_time_value(text, field="--ubd")
    if control.sensor_stream is None:
        raise ConfigError("needs control.sensor_stream to take the delay from the network")
    seconds = _analyze(config.network).ubd(control.sensor_stream)
    logger.info(f"Sensor path UBD {seconds:g} s from stream {control.sensor_stream}")
    return unit.from_seconds(seconds), None


def cmd_stability(args: argparse.Namespace) -> int:
    config = _load(args)
    control = config.require_control()
    unit = control.time_unit
    ubd = _ubd(args, config, unit)
    verdict = check(control.plant, control.controller, ubd, control.grid)
    out = _out_dir(args, config)

    result = sweep(control.plant, control.controller, verdict.ubd, control.grid)
    write_sweep_csv(result, out / "sweep.csv")
    if _wants(args, config, "svg"):
        from ncsbound.plotting import plot_stability

        plot_stability(result, out / "stability.svg", verdict)

    if verdict.holds:
        print(f"stability holds for UBD {verdict.ubd:g} {unit.value} (margin {verdict.margin:.4g})")
    else:
        for low, high in verdict.violating_bands:
            print(f"violated between {low:.4g} and {high:.4g} rad/{unit.value}")

    if _wants(args, config, "json"):
        limit = max_tolerable_delay(control.plant, control.controller, control.grid)
        payload: dict[str, Any] = {
            "ubd": verdict.ubd,
            "time_unit": unit.value,
            "holds": verdict.holds,
            "violating_bands": [list(b) for b in verdict.violating_bands],
            "margin": verdict.margin,
            "max_tolerable_delay": limit.ubd,
            "grid_limited": limit.grid_limited,
        }
        if verdict.ubd > 0:
            payload["robust_margin"] = robust_margin(
                control.plant, control.controller, verdict.ubd, control.grid
            )
        _write_json(out / "stability.json", payload)
    return EXIT_OK if verdict.holds else EXIT_VIOLATED


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    control = config.require_control()
    unit = control.time_unit
    value, ubd_unit = _ubd(args, config, unit)
    if ubd_unit is not None and ubd_unit is not unit:
        raise UnitMismatch(f"ubd given in {ubd_unit.value}, loop uses {unit.value}")

    actuator = value
    if args.ubd is None and config.simulation.ubd is None and control.actuator_stream is not None:
        actuator = unit.from_seconds(_analyze(config.network).ubd(control.actuator_stream))
    cfgs = config.simulation.loop_configs(control, value, actuator, seed=args.seed)
    report = compare(cfgs, args.mode)
    out = _out_dir(args, config)

    for mode in SimMode(args.mode).modes():
        runs = report.by_mode(mode)
        runs[0].to_csv(out / f"trace_{mode.value}.csv")
        for trace in runs:
            m = trace.metrics
            flag = " (diverged)" if trace.diverged else ""
            print(f"{mode.value} seed {trace.seed}: ISE {m.ise:.6g}{flag}")
    write_metrics_csv(report, out / "metrics.csv")
    if _wants(args, config, "svg"):
        from ncsbound.plotting import plot_traces

        plot_traces(report, out / "traces.svg")
    if _wants(args, config, "json"):
        _write_json(
            out / "metrics.json",
            {
                "ubd": value,
                "time_unit": unit.value,
                "runs": [
                    dict(zip(("mode", "seed", "ise", "overshoot_pct", "settling_time", "diverged"), row, strict=True))
                    for row in report.rows()
                ],
            },
        )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = PipelineConfig.from_file(args.config) if args.config else None
    model = config.network if config is not None and config.network.streams else None
    if args.trace and model is None:
        raise ConfigError("--trace needs a --config whose network declares streams")
    report = run_campaign(model, args.cases, args.seed)
    out = _out_dir(args, config)
    write_campaign_csv(report, out / "campaign.csv")
    if args.trace and model is not None:
        stats = simulate(model, Workload.GREEDY, CAMPAIGN_HORIZON, keep_frames=True)
        write_frame_trace_csv(stats.frames, out / "frames.csv")
    print(
        f"{report.models} model(s), {len(report.results)} check(s), "
        f"{len(report.violations)} violation(s), {len(report.inconsistent)} inconsistency(ies)"
    )
    for r in report.violations:
        c = r.check
        print(f"case {r.case} stream {c.stream_id} {c.workload}: {c.observed:.9g} s > {c.bound:.9g} s")
    if _wants(args, config, "json"):
        _write_json(
            out / "campaign.json",
            {
                "models": report.models,
                "checks": len(report.results),
                "violations": len(report.violations),
                "inconsistent": [list(i) for i in report.inconsistent],
                "skipped": [list(s) for s in report.skipped],
            },
        )
    return EXIT_OK if report.ok else EXIT_VIOLATED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline TOML file")
    common.add_argument("--seed", type=int, default=0, help="seed of every random draw (default 0)")
    common.add_argument("--plot", action="store_true", help="also write SVG figures")
    common.add_argument("--json", action="store_true", help="also write a JSON summary")
    common.add_argument("--out", help="output directory (overridden by $NCSBOUND_OUT)")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log level on stderr",
    )

    parser = argparse.ArgumentParser(
        prog="ncsbound",
        description="Delay bounds of switched Ethernet and stability of the loops they close.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("delay", parents=[common], help="end-to-end delay bound of every stream")
    p.set_defaults(func=cmd_delay)

    p = sub.add_parser("stability", parents=[common], help="small-gain test under the delay bound")
    p.add_argument("--ubd", help="delay bound such as 3.5ms, or from-network")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("simulate", parents=[common], help="closed loop with and without compensation")
    p.add_argument("--mode", choices=[m.value for m in SimMode], default=SimMode.BOTH.value)
    p.add_argument("--ubd", help="delay bound such as 3.5ms, or from-network")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", parents=[common], help="check bounds against simulated networks")
    p.add_argument("--cases", type=int, default=100, help="number of randomized models")
    p.add_argument(
        "--trace", action="store_true", help="also write the greedy per-frame trace of the configured network"
    )
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return int(args.func(args))
    except NonConvergent as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except NominallyUnstable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOMINALLY_UNSTABLE
    except (ConfigError, UnitMismatch, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
