"""Discrete-event simulation of FIFO cut-through switches, used as an oracle for the bounds.

Every directed link crossed by a stream is an output port: a FIFO served at the link
capacity and shared by every stream sent over it, station uplinks included. Inside a
switch the shared-memory stage is one more FIFO served at the backplane capacity.
Forwarding is cut-through: a frame reaches the next stage as soon as its service
starts on the previous one.
"""

import asyncio
import csv
import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import simpy

from ncsbound.calculus import DelayAnalysis, analyze
from ncsbound.errors import EnvelopeViolation, NonConvergent
from ncsbound.net_model import NetworkModel, Stream, random_model

logger = logging.getLogger(__name__)

MIN_FRAME_LEN = 64.0
DEFAULT_HORIZON = 0.2
CAMPAIGN_HORIZON = 0.05
CAMPAIGN_SEEDS = 3


class Workload(str, Enum):
    """Traffic pattern generated by every source."""

    GREEDY = "greedy"
    RANDOM = "random"

    @property
    def randomized(self) -> bool:
        return self is Workload.RANDOM


@dataclass(frozen=True)
class WorkloadSpec:
    """A workload kind with the seed of its random draws."""

    kind: Workload = Workload.GREEDY
    seed: int = 0

    @classmethod
    def coerce(cls, workload: "WorkloadSpec | Workload | str") -> "WorkloadSpec":
        if isinstance(workload, WorkloadSpec):
            return workload
        return cls(Workload(workload))

    @property
    def label(self) -> str:
        return self.kind.value if self.kind is Workload.GREEDY else f"{self.kind.value}:{self.seed}"


@dataclass
class FrameRecord:
    """Life of one frame: emission, transmission start on every port, delivery."""

    stream_id: str
    seq: int
    emit_time: float
    length: float
    starts: list[float] = field(default_factory=list)
    delivery: float = math.nan

    @property
    def delay(self) -> float:
        """Delivery minus first-bit arrival at the first switch."""
        return self.delivery - self.starts[0]

    @property
    def hop_starts(self) -> list[float]:
        """Transmission starts on the switch egress ports."""
        # starts: uplink, then shared memory and egress port of every switch
        return self.starts[2::2]


# the emitted view of a frame, before it is transmitted
FrameEvent = FrameRecord


@dataclass
class ObservedStats:
    """Per-stream delays and per-port backlog observed in one simulation."""

    max_delay: dict[str, float] = field(default_factory=dict)
    mean_delay: dict[str, float] = field(default_factory=dict)
    frame_count: dict[str, int] = field(default_factory=dict)
    max_backlog: dict[str, float] = field(default_factory=dict)
    frames: list[FrameRecord] = field(default_factory=list)

    def delay_of(self, stream_id: str) -> float:
        return self.max_delay.get(str(stream_id), 0.0)

    @property
    def total_frames(self) -> int:
        return sum(self.frame_count.values())


class _EnvelopeAudit:
    """Token-bucket audit: emissions never exceed sigma + rho * t over any interval."""

    def __init__(self, stream: Stream):
        self.stream = stream
        self.credit = stream.envelope0.sigma
        self.last = 0.0

    def charge(self, now: float, size: float) -> None:
        env = self.stream.envelope0
        self.credit = min(env.sigma, self.credit + env.rho * (now - self.last))
        self.last = now
        slack = 1e-9 * max(env.sigma, 1.0)
        if size > self.credit + slack:
            raise EnvelopeViolation(
                f"stream {self.stream.id}: {size:g} bytes at t={now:.9g} exceed "
                f"{self.credit:g} bytes of credit",
                stream_id=self.stream.id,
                time=now,
            )
        self.credit -= size


class _Port:
    """FIFO server: an output port at its link's capacity, or a shared-memory stage."""

    def __init__(self, env: simpy.Environment, name: str, capacity: float):
        self.env = env
        self.name = name
        self.capacity = capacity
        self.queue = simpy.PriorityStore(env)
        self.backlog = 0.0
        self.max_backlog = 0.0
        env.process(self._serve())

    def put(
        self,
        frame: FrameRecord,
        stream_idx: int,
        route: list["_Port"],
        started: simpy.Event | None = None,
    ) -> None:
        self.backlog += frame.length
        self.max_backlog = max(self.max_backlog, self.backlog)
        # ties at equal arrival time: stream order, then sequence number
        key = (self.env.now, stream_idx, frame.seq)
        self.queue.put(simpy.PriorityItem(key, (frame, stream_idx, route, started)))

    def _serve(self) -> Iterator[simpy.Event]:
        while True:
            item = yield self.queue.get()
            frame, stream_idx, route, started = item.item
            frame.starts.append(self.env.now)
            if started is not None:
                started.succeed()
            duration = frame.length / self.capacity
            if route:
                route[0].put(frame, stream_idx, route[1:])
            else:
                frame.delivery = self.env.now + duration
            yield self.env.timeout(duration)
            self.backlog -= frame.length


def _source(
    env: simpy.Environment,
    stream: Stream,
    stream_idx: int,
    route: list[_Port],
    spec: WorkloadSpec,
    rng: np.random.Generator,
    horizon: float,
    frames: list[FrameRecord],
) -> Iterator[simpy.Event]:
    """Leaky-bucket source: bucket starts full, frames leave as soon as credit allows.

    Credit is charged when a frame starts on the station uplink, and the next frame
    waits for that, so the traffic entering the first switch keeps its envelope
    even when other streams of the station hold the uplink.
    """
    sigma, rho = stream.envelope0.sigma, stream.envelope0.rho
    if sigma <= 0:
        # no burst allowance: not even one frame fits the envelope
        return
    s_max = min(stream.max_frame_len, sigma)
    audit = _EnvelopeAudit(stream)
    tokens, last = sigma, 0.0
    seq = 0
    while True:
        if spec.kind.randomized:
            size = float(rng.uniform(min(MIN_FRAME_LEN, s_max), s_max))
            jitter = float(rng.uniform(0.0, size / rho))
        else:
            size, jitter = s_max, 0.0
        tokens = min(sigma, tokens + rho * (env.now - last))
        last = env.now
        wait = max(0.0, (size - tokens) / rho) + jitter
        if env.now + wait >= horizon:
            return
        if wait > 0:
            yield env.timeout(wait)
            tokens = max(size, min(sigma, tokens + rho * wait))
            last = env.now
        frame = FrameRecord(stream.id, seq, env.now, size)
        frames.append(frame)
        started = env.event()
        route[0].put(frame, stream_idx, route[1:], started)
        yield started
        tokens = min(sigma, tokens + rho * (env.now - last))
        last = env.now
        audit.charge(env.now, size)
        tokens -= size
        seq += 1


def simulate(
    model: NetworkModel,
    workload: WorkloadSpec | Workload | str = Workload.GREEDY,
    horizon: float = DEFAULT_HORIZON,
    *,
    keep_frames: bool = False,
) -> ObservedStats:
    """Simulate every stream of a model and measure observed delays.

    Sources emit until ``horizon``; the run then continues until every queued
    frame is delivered.

    Args:
        model: Validated network model
        workload: Greedy, or seeded random frame sizes and emission jitter
        horizon: Emission horizon in seconds
        keep_frames: Keep the per-frame records in the result

    Returns:
        ObservedStats

    Raises:
        EnvelopeViolation: a source broke its arrival curve
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    spec = WorkloadSpec.coerce(workload)
    env = simpy.Environment()
    ports: dict[str, _Port] = {}

    def port(a: str, b: str) -> _Port:
        key = f"{a}->{b}"
        if key not in ports:
            ports[key] = _Port(env, key, model.link(a, b).capacity)
        return ports[key]

    def shared_memory(switch_id: str) -> _Port:
        key = f"{switch_id}/backplane"
        if key not in ports:
            ports[key] = _Port(env, key, model.backplane(switch_id))
        return ports[key]

    rngs = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(spec.seed).spawn(max(len(model.streams), 1))
    ]
    frames: list[FrameRecord] = []
    for idx, s in enumerate(model.streams):
        path = s.path
        route = [port(path[0], path[1])]
        for a, b in zip(path[1:], path[2:], strict=False):
            route += [shared_memory(a), port(a, b)]
        env.process(_source(env, s, idx, route, spec, rngs[idx], horizon, frames))
    env.run()

    stats = ObservedStats(max_backlog={name: p.max_backlog for name, p in ports.items()})
    for s in model.streams:
        delays = [f.delay for f in frames if f.stream_id == s.id]
        stats.frame_count[s.id] = len(delays)
        stats.max_delay[s.id] = max(delays, default=0.0)
        stats.mean_delay[s.id] = math.fsum(delays) / len(delays) if delays else 0.0
    if keep_frames:
        stats.frames = frames
    logger.debug(f"Simulated {len(frames)} frame(s), workload {spec.label}, horizon {horizon:g} s")
    return stats


def frame_allowance(model: NetworkModel, stream: Stream) -> float:
    """Transmission time of one maximum frame on the slowest link of the path.

    Observed delays run to the last bit of a frame while the bounds cover the
    first bit, so observations are compared with UBD plus this allowance.
    """
    path = stream.path
    slowest = min(model.link(a, b).capacity for a, b in zip(path, path[1:], strict=False))
    return stream.max_frame_len / slowest


@dataclass(frozen=True)
class BoundCheck:
    """Observed worst case of one stream against its analytic bound."""

    stream_id: str
    bound: float
    observed: float
    workload: str = ""
    frame: FrameRecord | None = None

    @property
    def holds(self) -> bool:
        return self.frame is None

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "violated"


def _exceeds(observed: float, bound: float) -> bool:
    return observed > bound * (1 + 1e-9) + 1e-12


def _check_model(
    model: NetworkModel,
    analysis: DelayAnalysis,
    workloads: Sequence[WorkloadSpec],
    horizon: float,
    stream_ids: Sequence[str] | None = None,
) -> list[BoundCheck]:
    wanted = [model.stream(sid) for sid in stream_ids] if stream_ids else list(model.streams)
    bounds = {s.id: analysis.ubd(s.id) + frame_allowance(model, s) for s in wanted if s.route}
    checks = []
    for spec in workloads:
        stats = simulate(model, spec, horizon, keep_frames=True)
        for s in wanted:
            if s.id not in bounds:
                continue
            bound = bounds[s.id]
            first = next(
                (f for f in stats.frames if f.stream_id == s.id and _exceeds(f.delay, bound)), None
            )
            if first is not None:
                logger.error(
                    f"Stream {s.id}: frame {first.seq} delayed {first.delay:.9g} s "
                    f"beyond bound {bound:.9g} s under {spec.label}"
                )
            checks.append(BoundCheck(s.id, bound, stats.delay_of(s.id), spec.label, first))
    return checks


def _merge(stream_id: str, checks: Iterable[BoundCheck]) -> BoundCheck:
    checks = list(checks)
    if not checks:
        return BoundCheck(str(stream_id), 0.0, 0.0)
    violated = next((c for c in checks if not c.holds), None)
    if violated is not None:
        return violated
    return max(checks, key=lambda c: c.observed)


async def acheck_bound(
    model: NetworkModel,
    stream_id: str,
    workloads: Sequence[WorkloadSpec | Workload | str] = (Workload.GREEDY,),
    *,
    horizon: float = DEFAULT_HORIZON,
) -> BoundCheck:
    """Compare a stream's worst observed delay across workloads with its bound.

    Workloads are simulated concurrently in worker threads.

    Args:
        model: Validated network model
        stream_id: Stream to check
        workloads: Workloads to simulate
        horizon: Emission horizon in seconds

    Returns:
        BoundCheck carrying the first violating frame, or the worst observation when the bound holds
    """
    stream = model.stream(stream_id)
    analysis = analyze(model)
    specs = [WorkloadSpec.coerce(w) for w in workloads]
    results = await asyncio.gather(
        *(
            asyncio.to_thread(_check_model, model, analysis, [spec], horizon, [stream.id])
            for spec in specs
        )
    )
    if not stream.route:
        return BoundCheck(stream.id, 0.0, 0.0)
    return _merge(stream.id, (c for batch in results for c in batch))


def check_bound(
    model: NetworkModel,
    stream_id: str,
    workloads: Sequence[WorkloadSpec | Workload | str] = (Workload.GREEDY,),
    *,
    horizon: float = DEFAULT_HORIZON,
) -> BoundCheck:
    """Sync wrapper for acheck_bound."""
    return asyncio.run(acheck_bound(model, stream_id, workloads, horizon=horizon))


@dataclass(frozen=True)
class CaseResult:
    """One (model, workload, stream) cell of a validation campaign."""

    case: int
    check: BoundCheck


@dataclass
class CampaignReport:
    """Outcome of a validation campaign over several models and workloads."""

    results: list[CaseResult] = field(default_factory=list)
    inconsistent: list[tuple[int, str, float, float]] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)
    models: int = 0

    @property
    def violations(self) -> list[CaseResult]:
        return [r for r in self.results if not r.check.holds]

    @property
    def ok(self) -> bool:
        return not self.violations and not self.inconsistent

    def rows(self) -> list[list[Any]]:
        return [
            [
                r.case,
                r.check.workload,
                r.check.stream_id,
                r.check.bound,
                r.check.observed,
                r.check.verdict,
            ]
            for r in self.results
        ]


CAMPAIGN_CSV_HEADER = ["case", "workload", "stream", "bound_s", "observed_s", "verdict"]


def _consistency(case: int, analysis: DelayAnalysis) -> list[tuple[int, str, float, float]]:
    """Streams whose UBD differs from the sum of their per-switch bounds."""
    out = []
    for sid, r in analysis.streams.items():
        total = r.switch_sum
        if abs(r.ubd - total) > 1e-9 * max(abs(r.ubd), abs(total), 1e-300):
            out.append((case, sid, r.ubd, total))
    return out


def _run_case(
    case: int, model: NetworkModel, workloads: Sequence[WorkloadSpec], horizon: float
) -> tuple[int, list[BoundCheck], list[tuple[int, str, float, float]], str | None]:
    try:
        analysis = analyze(model)
    except NonConvergent as e:
        return case, [], [], str(e)
    return case, _check_model(model, analysis, workloads, horizon), _consistency(case, analysis), None


def campaign_workloads(seed: int) -> list[WorkloadSpec]:
    """Greedy and random workloads for three consecutive seeds."""
    return [
        WorkloadSpec(kind, seed + n) for n in range(CAMPAIGN_SEEDS) for kind in Workload
    ]


async def arun_campaign(
    model: NetworkModel | None = None,
    cases: int = 100,
    seed: int = 0,
    *,
    horizon: float = CAMPAIGN_HORIZON,
) -> CampaignReport:
    """Check bounds on a configured model plus randomized models.

    Case 0 is ``model`` when given; cases 1..N are :func:`random_model` draws
    seeded from ``seed``. Every case runs greedy and random workloads for three
    seeds and checks the per-switch consistency of its bounds.

    Args:
        model: Configured model, or None to check random models only
        cases: Number of randomized models
        seed: Campaign seed
        horizon: Emission horizon of every simulation, seconds

    Returns:
        CampaignReport
    """
    if cases < 0:
        raise ValueError("cases must be >= 0")
    rng = np.random.default_rng(seed)
    models: list[tuple[int, NetworkModel]] = []
    if model is not None:
        models.append((0, model))
    models += [(n, random_model(rng)) for n in range(1, cases + 1)]
    workloads = campaign_workloads(seed)

    outcomes = await asyncio.gather(
        *(asyncio.to_thread(_run_case, case, m, workloads, horizon) for case, m in models)
    )
    report = CampaignReport(models=len(models))
    for case, checks, inconsistent, skipped in outcomes:
        report.results += [CaseResult(case, c) for c in checks]
        report.inconsistent += inconsistent
        if skipped is not None:
            logger.warning(f"Campaign case {case} skipped: {skipped}")
            report.skipped.append((case, skipped))
    logger.info(
        f"Campaign seed {seed}: {len(models)} model(s), {len(report.results)} check(s), "
        f"{len(report.violations)} violation(s)"
    )
    return report


def run_campaign(
    model: NetworkModel | None = None,
    cases: int = 100,
    seed: int = 0,
    *,
    horizon: float = CAMPAIGN_HORIZON,
) -> CampaignReport:
    """Sync wrapper for arun_campaign."""
    return asyncio.run(arun_campaign(model, cases, seed, horizon=horizon))


FRAME_CSV_HEADER = ["stream", "seq", "emit_s", "length_bytes", "hop_starts_s", "delivery_s", "delay_s"]


def write_frame_trace_csv(frames: Iterable[FrameRecord], path: str | Path) -> Path:
    """Per-frame trace: emission, service start at every stage, delivery, delay."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FRAME_CSV_HEADER)
        for f in frames:
            writer.writerow(
                [
                    f.stream_id,
                    f.seq,
                    repr(f.emit_time),
                    repr(f.length),
                    ";".join(repr(t) for t in f.starts),
                    repr(f.delivery),
                    repr(f.delay),
                ]
            )
    return path


def write_campaign_csv(report: CampaignReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CAMPAIGN_CSV_HEADER)
        writer.writerows(report.rows())
    return path
