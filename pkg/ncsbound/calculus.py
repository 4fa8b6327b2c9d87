"""Network-calculus delay and backlog bounds for switched Ethernet.

Component bounds (multiplexer, FIFO queue, demultiplexer), burstiness propagation
along routes, and the end-to-end upper-bound delay (UBD) of every stream obtained by
solving the burstiness equations of the whole network.

The formulas are written once against a small numeric protocol (``+``, ``-``,
``* float``, ``/ float``) so the same code evaluates plain floats and the affine
forms used to assemble the linear system.
"""

import csv
import json
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from ncsbound.errors import ModelError, NonConvergent, UnstableInput
from ncsbound.net_model import (
    ComponentKind,
    NetworkModel,
    Stream,
    TrafficEnvelope,
    validate,
)

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-9
MAX_ITERATIONS = 10_000
MAX_SELECTION_ROUNDS = 64
LINK_RATE = "link-rate"


@dataclass(frozen=True)
class MuxInput:
    """One input link of a FIFO multiplexer."""

    envelope: TrafficEnvelope
    link_capacity: float
    max_frame_len: float
    stream_id: str

    def __post_init__(self) -> None:
        if self.envelope.rho >= self.link_capacity:
            raise UnstableInput(
                f"input {self.stream_id}: rho {self.envelope.rho:g} >= capacity "
                f"{self.link_capacity:g}"
            )


@dataclass(frozen=True)
class BoundResult:
    """Multiplexer bound for one stream."""

    delay_bound: float
    backlog_bound: float
    argmin_k: str


class _Affine:
    """Affine function of the burstiness unknowns plus its value at the current iterate."""

    __slots__ = ("const", "coef", "value")

    def __init__(self, const: float, coef: np.ndarray, value: float):
        self.const = const
        self.coef = coef
        self.value = value

    @classmethod
    def variable(cls, index: int, x: np.ndarray) -> "_Affine":
        coef = np.zeros(len(x))
        coef[index] = 1.0
        return cls(0.0, coef, float(x[index]))

    def __add__(self, other: "Number") -> "_Affine":
        if isinstance(other, _Affine):
            return _Affine(self.const + other.const, self.coef + other.coef, self.value + other.value)
        return _Affine(self.const + other, self.coef, self.value + other)

    __radd__ = __add__

    def __neg__(self) -> "_Affine":
        return _Affine(-self.const, -self.coef, -self.value)

    def __sub__(self, other: "Number") -> "_Affine":
        return self + (-other)

    def __rsub__(self, other: float) -> "_Affine":
        return (-self) + other

    def __mul__(self, factor: float) -> "_Affine":
        return _Affine(self.const * factor, self.coef * factor, self.value * factor)

    __rmul__ = __mul__

    def __truediv__(self, divisor: float) -> "_Affine":
        return _Affine(self.const / divisor, self.coef / divisor, self.value / divisor)


Number = Union[float, _Affine]


def _value(x: Number) -> float:
    return x.value if isinstance(x, _Affine) else float(x)


def _fsum(items: Iterable[Number]) -> Number:
    """Order-independent sum, so permuted but equal inputs give equal bounds."""
    items = list(items)
    if not any(isinstance(x, _Affine) for x in items):
        return math.fsum(items)
    n = next(len(x.coef) for x in items if isinstance(x, _Affine))
    coef = np.zeros(n)
    consts = []
    values = []
    for x in items:
        if isinstance(x, _Affine):
            consts.append(x.const)
            coef = coef + x.coef
            values.append(x.value)
        else:
            consts.append(float(x))
            values.append(float(x))
    return _Affine(math.fsum(consts), coef, math.fsum(values))


class _Selection:
    """Records the discrete choices (clamps, argmins) taken while evaluating bounds."""

    def __init__(self) -> None:
        self.choices: list[int] = []

    def clamp(self, x: Number) -> Number:
        negative = _value(x) < 0
        self.choices.append(int(negative))
        return 0.0 if negative else x

    def pick(self, candidates: Sequence[Number]) -> int:
        best = min(range(len(candidates)), key=lambda k: (_value(candidates[k]), k))
        self.choices.append(best)
        return best

    def signature(self) -> tuple[int, ...]:
        return tuple(self.choices)


def _check_rates(inputs: Sequence[MuxInput], out_capacity: float) -> None:
    total = math.fsum(inp.envelope.rho for inp in inputs)
    if total >= out_capacity:
        raise UnstableInput(f"aggregate rate {total:g} >= output capacity {out_capacity:g}")


def _bursty(
    sigma: Number, inp: MuxInput, dominant: bool, sel: _Selection
) -> Number:
    rho, capacity = inp.envelope.rho, inp.link_capacity
    if rho >= capacity:
        raise UnstableInput(f"input {inp.stream_id}: rho {rho:g} >= capacity {capacity:g}")
    u = sigma / (capacity - rho)
    if dominant:
        return u
    return sel.clamp(u - inp.max_frame_len / capacity)


def _mux_backlog(
    i: int,
    k: int,
    sigmas: Sequence[Number],
    inputs: Sequence[MuxInput],
    out_capacity: float,
    sel: _Selection,
) -> Number:
    inp_k = inputs[k]
    u = _bursty(sigmas[k], inp_k, k == i, sel)
    others = [z for z in range(len(inputs)) if z != k]
    terms: list[Number] = [
        sigmas[z] + inputs[z].envelope.rho * inputs[z].max_frame_len / inputs[z].link_capacity
        for z in others
    ]
    # growth over the bursty period of k; when the output outpaces input k plus the
    # others' rates the backlog peaks at the start of the period instead
    surplus = inp_k.link_capacity + math.fsum(inputs[z].envelope.rho for z in others) - out_capacity
    terms.append(sel.clamp(u * surplus))
    if k != i:
        inp_i = inputs[i]
        terms.append(-inp_i.envelope.rho * inp_i.max_frame_len / inp_i.link_capacity)
        terms.append(inp_k.max_frame_len)
    return sel.clamp(_fsum(terms))


def _link_backlog(
    i: int,
    sigmas: Sequence[Number],
    inputs: Sequence[MuxInput],
    out_capacity: float,
    sel: _Selection,
) -> Number:
    """Work queued ahead of a frame of input i when every input is also held to its link rate.

    Frames of input i ahead of the tagged one left their link before it, so input i
    contributes min(C_i t, sigma_i + rho_i t); any other input z may add one frame
    still arriving, min(L_z + C_z t, sigma_z + rho_z t). The sum minus C_out t is
    concave, so its supremum sits at t = 0 or where an input leaves its link rate.
    """

    def arrivals(z: int, t: Number) -> Number:
        inp = inputs[z]
        head = 0.0 if z == i else inp.max_frame_len
        at_link = head + t * inp.link_capacity
        at_envelope = sigmas[z] + t * inp.envelope.rho
        return (at_link, at_envelope)[sel.pick([at_link, at_envelope])]

    corners: list[Number] = [0.0]
    for z, inp in enumerate(inputs):
        head = 0.0 if z == i else inp.max_frame_len
        corners.append(sel.clamp((sigmas[z] - head) / (inp.link_capacity - inp.envelope.rho)))
    values = [
        _fsum([arrivals(z, t) for z in range(len(inputs))] + [-(t * out_capacity)])
        for t in corners
    ]
    return values[sel.pick([-v for v in values])]


def _mux_delay(
    i: int,
    sigmas: Sequence[Number],
    inputs: Sequence[MuxInput],
    out_capacity: float,
    sel: _Selection,
) -> tuple[Number, Number, int]:
    _check_rates(inputs, out_capacity)
    backlogs = [_mux_backlog(i, k, sigmas, inputs, out_capacity, sel) for k in range(len(inputs))]
    k = sel.pick(backlogs)
    return backlogs[k] / out_capacity, backlogs[k], k


def _switch_mux(
    i: int,
    sigmas: Sequence[Number],
    inputs: Sequence[MuxInput],
    out_capacity: float,
    sel: _Selection,
) -> tuple[Number, Number, str]:
    """Smaller of the bursty-period bound and the link-rate bound, with its label."""
    delay, backlog, k = _mux_delay(i, sigmas, inputs, out_capacity, sel)
    link = _link_backlog(i, sigmas, inputs, out_capacity, sel)
    if sel.pick([link, backlog]) == 0:
        return link / out_capacity, link, LINK_RATE
    return delay, backlog, inputs[k].stream_id


def _queue_delay(sigma: Number, rho: float, in_capacity: float, out_capacity: float) -> Number:
    if rho >= min(in_capacity, out_capacity):
        raise UnstableInput(
            f"queue input rate {rho:g} >= min(C_in={in_capacity:g}, C_out={out_capacity:g})"
        )
    if in_capacity <= out_capacity:
        return 0.0
    return sigma * ((in_capacity - out_capacity) / (in_capacity - rho) / out_capacity)


def backlog_at(
    t: float, inputs: Sequence[MuxInput], out_capacity: float, *, i: int = 0
) -> float:
    """Backlog of a FIFO multiplexer at time t of the worst-case scenario.

    Input ``i`` starts its burst at 0; every other input z is shifted by its frame
    transmission time L_z/C_z. The result is clamped at 0.

    Args:
        t: Time since the start of the busy period, seconds
        inputs: Multiplexer inputs
        out_capacity: Output link capacity, bytes/second
        i: Index of the unshifted input

    Returns:
        Backlog in bytes
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    arrivals = [
        inp.envelope.at(t if z == i else t + inp.max_frame_len / inp.link_capacity)
        for z, inp in enumerate(inputs)
    ]
    return max(0.0, math.fsum(arrivals) - out_capacity * t)


def bursty_period(inp: MuxInput, as_dominant: bool) -> float:
    """Length of the bursty period of an input.

    Dominant form sigma/(C - rho); non-dominant form subtracts L/C and is clamped at 0.
    """
    return float(_bursty(inp.envelope.sigma, inp, as_dominant, _Selection()))


def mux_backlog_bound(i: int, k: int, inputs: Sequence[MuxInput], out_capacity: float) -> float:
    """Backlog bound over the bursty period of input k, seen by input i (0-based).

    Raises:
        UnstableInput: an input or the aggregate reaches its capacity
    """
    _check_rates(inputs, out_capacity)
    sigmas = [inp.envelope.sigma for inp in inputs]
    return float(_mux_backlog(i, k, sigmas, inputs, out_capacity, _Selection()))


def mux_delay_bound(i: int, inputs: Sequence[MuxInput], out_capacity: float) -> BoundResult:
    """Delay bound of input i: the smallest backlog bound over all k, over C_out.

    Ties go to the smallest k.
    """
    sigmas = [inp.envelope.sigma for inp in inputs]
    delay, backlog, k = _mux_delay(i, sigmas, inputs, out_capacity, _Selection())
    return BoundResult(float(delay), float(backlog), inputs[k].stream_id)


def link_backlog_bound(i: int, inputs: Sequence[MuxInput], out_capacity: float) -> float:
    """Backlog ahead of a frame of input i with every input limited by its link rate.

    Never above the bursty-period bounds under cut-through forwarding; the switch
    analysis uses whichever is smaller.

    Raises:
        UnstableInput: the aggregate rate reaches the output capacity
    """
    _check_rates(inputs, out_capacity)
    sigmas = [inp.envelope.sigma for inp in inputs]
    return float(_link_backlog(i, sigmas, inputs, out_capacity, _Selection()))


def queue_delay_bound(
    envelope_in: TrafficEnvelope, in_capacity: float, out_capacity: float
) -> float:
    """Delay bound of a FIFO queue fed at C_in and drained at C_out.

    Zero when C_in <= C_out.

    Raises:
        UnstableInput: rho_in >= min(C_in, C_out)
    """
    return float(_queue_delay(envelope_in.sigma, envelope_in.rho, in_capacity, out_capacity))


def propagate_envelope(env: TrafficEnvelope, delay_bound: float) -> TrafficEnvelope:
    """Envelope at the output of an element with the given delay bound."""
    if delay_bound < 0:
        raise ValueError("delay_bound must be >= 0")
    return TrafficEnvelope(env.sigma + env.rho * delay_bound, env.rho)


def aggregate(envelopes: Iterable[TrafficEnvelope]) -> TrafficEnvelope:
    """Envelope of several flows sharing a port or a FIFO."""
    envelopes = list(envelopes)
    if not envelopes:
        raise ValueError("cannot aggregate zero envelopes")
    return TrafficEnvelope(
        math.fsum(e.sigma for e in envelopes), math.fsum(e.rho for e in envelopes)
    )


def ubd_from_burstiness(sigma_final: float, sigma_initial: float, rho: float) -> float:
    """End-to-end delay recovered from the burstiness growth along a route."""
    return (sigma_final - sigma_initial) / rho


@dataclass(frozen=True)
class ComponentBound:
    """Bound of one basic component crossed by a stream."""

    switch_id: str
    kind: ComponentKind
    backlog_bound: float
    delay_bound: float
    argmin_k: str = ""

    @property
    def name(self) -> str:
        return f"{self.switch_id}/{self.kind.value}"


@dataclass(frozen=True)
class SwitchBound:
    """Per-switch decomposition of a stream's delay."""

    switch_id: str
    hop: int
    envelope_in: TrafficEnvelope
    components: tuple[ComponentBound, ...]

    @property
    def delay_bound(self) -> float:
        return math.fsum(c.delay_bound for c in self.components)


@dataclass(frozen=True)
class StreamResult:
    """End-to-end result of one stream."""

    stream_id: str
    ubd: float
    sigmas: tuple[float, ...]
    switches: tuple[SwitchBound, ...]

    @property
    def switch_sum(self) -> float:
        return math.fsum(sw.delay_bound for sw in self.switches)


@dataclass(frozen=True)
class DelayAnalysis:
    """Outcome of the end-to-end algorithm for a whole network."""

    streams: dict[str, StreamResult]
    method: str
    iterations: int

    def ubd(self, stream_id: str) -> float:
        try:
            return self.streams[str(stream_id)].ubd
        except KeyError:
            raise ModelError(f"unknown stream {stream_id!r}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "streams": {
                sid: {
                    "ubd_s": r.ubd,
                    "sigmas": list(r.sigmas),
                    "switches": [
                        {
                            "switch": sw.switch_id,
                            "delay_s": sw.delay_bound,
                            "components": [
                                {
                                    "component": c.kind.value,
                                    "backlog_bytes": c.backlog_bound,
                                    "delay_s": c.delay_bound,
                                    "argmin_k": c.argmin_k,
                                }
                                for c in sw.components
                            ],
                        }
                        for sw in r.switches
                    ],
                }
                for sid, r in self.streams.items()
            },
        }


@dataclass
class BurstinessSystem:
    """Linear system A Psi = Phi over the output burstiness of every (stream, hop).

    The coefficients hold for the clamp and argmin choices made at ``point``;
    ``selection`` records those choices.
    """

    model: NetworkModel
    unknowns: list[tuple[str, int]]
    matrix: np.ndarray
    rhs: np.ndarray
    point: np.ndarray
    selection: tuple[int, ...] = field(default=())

    @property
    def dimension(self) -> int:
        return len(self.unknowns)


class _Layout:
    """Index of the unknown sigma_i^h (h = 1..route length) of every stream."""

    def __init__(self, model: NetworkModel):
        self.model = model
        self.unknowns: list[tuple[str, int]] = []
        self.index: dict[tuple[str, int], int] = {}
        for s in model.streams:
            for h in range(1, s.hops + 1):
                self.index[(s.id, h)] = len(self.unknowns)
                self.unknowns.append((s.id, h))

    def initial(self) -> np.ndarray:
        return np.array(
            [self.model.stream(sid).envelope0.sigma for sid, _ in self.unknowns], dtype=float
        )

    def sigma_in(self, stream: Stream, hop: int, x: np.ndarray, affine: bool) -> Number:
        """Burstiness of a stream entering its ``hop``-th switch (0-based)."""
        if hop == 0:
            return stream.envelope0.sigma
        j = self.index[(stream.id, hop)]
        return _Affine.variable(j, x) if affine else float(x[j])


def _switch_terms(
    model: NetworkModel,
    stream: Stream,
    hop: int,
    sigma_of: Callable[[Stream, int], Number],
    sel: _Selection,
) -> tuple[tuple[Number, Number, str], Number, Number]:
    """Mux, shared-queue and output-queue terms of ``stream`` at its ``hop``-th switch.

    The mux and the shared queue see the envelopes at the switch input. The output
    queue sees them after the shared-memory stage, each grown by the mux delay of
    its ingress port.
    """
    path = stream.path
    switch_id = path[hop + 1]
    ingress, egress = path[hop], path[hop + 2]
    crossing = model.crossings(switch_id)
    backplane = model.backplane(switch_id)

    # Multiplexer: one input per physical ingress port, streams on a port pre-summed.
    ports: dict[str, list[tuple[Stream, int]]] = {}
    for z, zhop in crossing:
        ports.setdefault(z.path[zhop], []).append((z, zhop))
    port_ids = [n for n in (link.source for link in model.links if link.target == switch_id) if n in ports]
    sigmas: list[Number] = []
    inputs: list[MuxInput] = []
    for port in port_ids:
        members = ports[port]
        sigma = _fsum(sigma_of(z, zhop) for z, zhop in members)
        rho = math.fsum(z.envelope0.rho for z, _ in members)
        sigmas.append(sigma)
        inputs.append(
            MuxInput(
                TrafficEnvelope(max(_value(sigma), 0.0), rho),
                model.link(port, switch_id).capacity,
                max(z.max_frame_len for z, _ in members),
                "+".join(z.id for z, _ in members),
            )
        )
    i = port_ids.index(ingress)
    muxes = {i: _switch_mux(i, sigmas, inputs, backplane, sel)}

    # Shared queue and output queue: the streams leaving through the same egress port.
    same_out = [(z, zhop) for z, zhop in crossing if z.path[zhop + 2] == egress]
    sigma_out = _fsum(sigma_of(z, zhop) for z, zhop in same_out)
    rho_out = math.fsum(z.envelope0.rho for z, _ in same_out)
    egress_capacity = model.link(switch_id, egress).capacity
    feeding = sorted({z.path[zhop] for z, zhop in same_out})
    feed_capacity = math.fsum(model.link(p, switch_id).capacity for p in feeding)
    for port in feeding:
        j = port_ids.index(port)
        if j not in muxes:
            muxes[j] = _switch_mux(j, sigmas, inputs, backplane, sel)
    sigma_served = _fsum(
        sigma_of(z, zhop) + muxes[port_ids.index(z.path[zhop])][0] * z.envelope0.rho
        for z, zhop in same_out
    )

    queue = _queue_delay(sigma_out, rho_out, feed_capacity, egress_capacity)
    output = _queue_delay(sigma_served, rho_out, backplane, egress_capacity)
    return muxes[i], queue, output


def _build(
    layout: _Layout, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Affine system at the iterate x."""
    model = layout.model
    n = len(layout.unknowns)
    matrix = np.eye(n)
    rhs = np.zeros(n)
    sel = _Selection()

    def sigma_of(z: Stream, zhop: int) -> Number:
        return layout.sigma_in(z, zhop, x, affine=True)

    for s in model.streams:
        for hop in range(s.hops):
            (mux_delay, _, _), queue, output = _switch_terms(model, s, hop, sigma_of, sel)
            d_switch = _fsum([mux_delay, queue, output])
            row = layout.sigma_in(s, hop, x, affine=True) + d_switch * s.envelope0.rho
            j = layout.index[(s.id, hop + 1)]
            if isinstance(row, _Affine):
                matrix[j] -= row.coef
                rhs[j] = row.const
            else:
                rhs[j] = row
    return matrix, rhs, sel.signature()


def _iterate(layout: _Layout, x: np.ndarray) -> np.ndarray:
    """One step of sigma <- sigma0 + rho * D(sigma) evaluated with plain floats."""
    model = layout.model
    out = np.empty_like(x)
    sel = _Selection()

    def sigma_of(z: Stream, zhop: int) -> Number:
        return layout.sigma_in(z, zhop, x, affine=False)

    for s in model.streams:
        for hop in range(s.hops):
            (mux_delay, _, _), queue, output = _switch_terms(model, s, hop, sigma_of, sel)
            d_switch = _fsum([mux_delay, queue, output])
            out[layout.index[(s.id, hop + 1)]] = _value(sigma_of(s, hop)) + s.envelope0.rho * _value(
                d_switch
            )
    return out


def _require_valid(model: NetworkModel) -> None:
    report = validate(model)
    if report.ok:
        return
    saturated = report.of_kind("utilization ≥ 1")
    if saturated:
        subject = saturated[0].subject
        logger.error(f"Network saturated at {subject}")
        raise NonConvergent(f"component {subject} is saturated: {saturated[0].message}", component=subject)
    logger.error(f"Invalid network model: {report.violations[0]}")
    raise ModelError(f"invalid model: {report.violations[0]}")


def assemble_system(model: NetworkModel, point: np.ndarray | None = None) -> BurstinessSystem:
    """Assemble the burstiness equations of the whole network.

    One unknown per (stream, crossed switch). Each row states
    sigma^h = sigma^(h-1) + rho * D_switch, with D_switch affine in the burstiness of
    the competing streams for the clamp/argmin choices made at ``point``.

    Args:
        model: Network model
        point: Iterate at which choices are resolved; defaults to every sigma^h = sigma^0

    Returns:
        BurstinessSystem

    Raises:
        ModelError: invalid model
        NonConvergent: a component is saturated
    """
    _require_valid(model)
    layout = _Layout(model)
    x = layout.initial() if point is None else np.asarray(point, dtype=float)
    matrix, rhs, signature = _build(layout, x)
    return BurstinessSystem(model, layout.unknowns, matrix, rhs, x, signature)


def _value_iteration(layout: _Layout, x0: np.ndarray) -> tuple[np.ndarray, int]:
    x = x0.copy()
    for n in range(1, MAX_ITERATIONS + 1):
        nxt = _iterate(layout, x)
        if not np.all(np.isfinite(nxt)) or np.any(nxt > 1e15):
            raise NonConvergent("burstiness diverges under value iteration")
        scale = np.maximum(np.abs(nxt), 1e-300)
        if np.all(np.abs(nxt - x) <= RELATIVE_TOLERANCE * scale):
            return nxt, n
        x = nxt
    raise NonConvergent(f"value iteration did not converge in {MAX_ITERATIONS} iterations")


def _solve(model: NetworkModel) -> tuple[_Layout, np.ndarray, str, int]:
    _require_valid(model)
    layout = _Layout(model)
    x0 = layout.initial()
    if not layout.unknowns:
        return layout, x0, "empty", 0

    x = x0
    seen: set[tuple[int, ...]] = set()
    for rounds in range(1, MAX_SELECTION_ROUNDS + 1):
        matrix, rhs, signature = _build(layout, x)
        if signature in seen:
            logger.warning("Argmin selections cycle; falling back to value iteration")
            break
        seen.add(signature)
        try:
            candidate = np.linalg.solve(matrix, rhs)
        except np.linalg.LinAlgError:
            logger.warning("Singular burstiness system; falling back to value iteration")
            break
        if not np.all(np.isfinite(candidate)) or np.any(candidate < x0 * (1 - RELATIVE_TOLERANCE)):
            logger.warning("Linear solve left the feasible region; falling back to value iteration")
            break
        _, _, again = _build(layout, candidate)
        if again == signature:
            logger.debug(f"Burstiness selections stable after {rounds} round(s)")
            return layout, candidate, "linear", rounds
        x = candidate
    solution, iterations = _value_iteration(layout, x0)
    return layout, solution, "value-iteration", iterations


def solve_burstiness(system: BurstinessSystem) -> list[tuple[str, int, float]]:
    """Solve the burstiness of every (stream, hop).

    Choices are re-resolved at each solution until they no longer change; if
    they cycle, plain fixed-point iteration from sigma^0 takes over.

    Returns:
        (stream_id, hop, sigma) triples, hop counted from 1

    Raises:
        NonConvergent: no finite solution within the iteration cap
    """
    layout, solution, method, _ = _solve(system.model)
    logger.debug(f"Burstiness solved by {method}")
    return [(sid, h, float(solution[layout.index[(sid, h)]])) for sid, h in layout.unknowns]


def switch_delay_bound(
    stream_id: str, switch_state: dict[str, TrafficEnvelope], model: NetworkModel, *, hop: int | None = None
) -> float:
    """Upper-bound delay of a stream across one switch.

    Args:
        stream_id: Stream identifier
        switch_state: Envelope at the switch input of every stream crossing it
        model: Network model
        hop: Which crossed switch (0-based); defaults to the first

    Returns:
        Sum of mux, shared-queue, demux (0) and output-queue bounds in seconds
    """
    return _switch_bound(model, model.stream(stream_id), hop or 0, switch_state).delay_bound


def _switch_bound(
    model: NetworkModel, stream: Stream, hop: int, switch_state: dict[str, TrafficEnvelope]
) -> SwitchBound:
    switch_id = stream.route[hop]

    def sigma_of(z: Stream, zhop: int) -> Number:
        try:
            return switch_state[z.id].sigma
        except KeyError:
            raise ModelError(f"no envelope for stream {z.id} at switch {switch_id}") from None

    (mux_delay, mux_backlog, argmin), queue, output = _switch_terms(
        model, stream, hop, sigma_of, _Selection()
    )
    egress_capacity = model.link(switch_id, stream.path[hop + 2]).capacity
    components = (
        ComponentBound(switch_id, ComponentKind.MUX, float(mux_backlog), float(mux_delay), argmin),
        ComponentBound(switch_id, ComponentKind.QUEUE, float(queue) * egress_capacity, float(queue)),
        ComponentBound(switch_id, ComponentKind.DEMUX, 0.0, 0.0),
        ComponentBound(switch_id, ComponentKind.OUTPUT, float(output) * egress_capacity, float(output)),
    )
    return SwitchBound(switch_id, hop, switch_state[stream.id], components)


def analyze(model: NetworkModel) -> DelayAnalysis:
    """Run the end-to-end algorithm for every stream of a network.

    Args:
        model: Network model

    Returns:
        DelayAnalysis with UBD and per-component breakdown of every stream

    Raises:
        ModelError: invalid model
        NonConvergent: saturated component or divergent burstiness
    """
    layout, solution, method, iterations = _solve(model)

    def envelope(z: Stream, zhop: int) -> TrafficEnvelope:
        return TrafficEnvelope(_value(layout.sigma_in(z, zhop, solution, affine=False)), z.envelope0.rho)

    results = {}
    for s in model.streams:
        sigmas = [s.envelope0.sigma] + [
            float(solution[layout.index[(s.id, h)]]) for h in range(1, s.hops + 1)
        ]
        switches = []
        for hop, sw in enumerate(s.route):
            state = {z.id: envelope(z, zhop) for z, zhop in model.crossings(sw)}
            switches.append(_switch_bound(model, s, hop, state))
        ubd = ubd_from_burstiness(sigmas[-1], sigmas[0], s.envelope0.rho)
        results[s.id] = StreamResult(s.id, ubd, tuple(sigmas), tuple(switches))
        logger.info(f"Stream {s.id}: UBD {ubd * 1e3:.6g} ms over {s.hops} switch(es)")
    return DelayAnalysis(results, method, iterations)


def end_to_end_delay(model: NetworkModel, stream_id: str) -> float:
    """Upper-bound end-to-end delay of one stream, in seconds."""
    stream = model.stream(stream_id)
    if not stream.route:
        return 0.0
    return analyze(model).ubd(stream.id)


def capacity_sweep(
    model: NetworkModel, capacities: Sequence[float] = (6.25e5, 1.25e6, 1.25e7)
) -> dict[float, dict[str, float]]:
    """UBD of every stream with all links set to each capacity (bytes/second).

    Capacities at which the network saturates map to ``inf`` for every stream.
    """
    sweep: dict[float, dict[str, float]] = {}
    for capacity in capacities:
        variant = model.with_link_capacity(capacity)
        try:
            analysis = analyze(variant)
            sweep[capacity] = {sid: r.ubd for sid, r in analysis.streams.items()}
        except NonConvergent as e:
            logger.warning(f"Capacity {capacity:g} B/s saturates the network: {e}")
            sweep[capacity] = {s.id: math.inf for s in model.streams}
    return sweep


DELAY_CSV_HEADER = ["stream", "switch", "component", "backlog_bytes", "delay_s", "argmin_k"]


def delay_rows(analysis: DelayAnalysis) -> list[list[Any]]:
    """Component rows followed by one end-to-end summary row per stream."""
    rows: list[list[Any]] = []
    for sid, result in analysis.streams.items():
        for sw in result.switches:
            for c in sw.components:
                rows.append([sid, sw.switch_id, c.kind.value, c.backlog_bound, c.delay_bound, c.argmin_k])
    for sid, result in analysis.streams.items():
        rows.append([sid, "", "end-to-end", "", result.ubd, ""])
    return rows


def write_delay_csv(analysis: DelayAnalysis, path: str | Path) -> Path:
    """Export component bounds and per-stream UBD as CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DELAY_CSV_HEADER)
        writer.writerows(delay_rows(analysis))
    return path


def write_delay_json(analysis: DelayAnalysis, path: str | Path, **extra: Any) -> Path:
    """Export the analysis summary as JSON."""
    path = Path(path)
    payload = analysis.to_dict()
    payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_capacity_sweep_csv(sweep: dict[float, dict[str, float]], path: str | Path) -> Path:
    """One row per (capacity, stream) of a :func:`capacity_sweep` table."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["capacity_bytes_s", "stream", "ubd_s"])
        for capacity, ubds in sweep.items():
            for sid, ubd in ubds.items():
                writer.writerow([capacity, sid, ubd])
    return path
