"""Declarative model of a switched Ethernet network, its streams and their routes.

Quantities are bytes, bytes/second and seconds. Every switch is analysed as the
chain input multiplexer -> shared FIFO queue -> demultiplexer -> output queue.
"""

import logging
import tomllib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np

from ncsbound.errors import ConfigError, ModelError
from ncsbound.units import parse_capacity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrafficEnvelope:
    """Affine arrival curve b(t) = sigma + rho * t."""

    sigma: float
    rho: float

    def __post_init__(self) -> None:
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")

    def at(self, t: float) -> float:
        """Maximum cumulative data over any interval of length t."""
        return self.sigma + self.rho * t

    def __add__(self, other: "TrafficEnvelope") -> "TrafficEnvelope":
        return TrafficEnvelope(self.sigma + other.sigma, self.rho + other.rho)


@dataclass(frozen=True)
class Stream:
    """Unidirectional flow from one station to another."""

    id: str
    source: str
    destination: str
    envelope0: TrafficEnvelope
    max_frame_len: float
    route: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.max_frame_len > 0:
            raise ValueError(f"stream {self.id}: max_frame_len must be > 0")
        if self.source == self.destination:
            raise ValueError(f"stream {self.id}: source and destination are the same station")

    @property
    def path(self) -> tuple[str, ...]:
        """Node sequence source, switches..., destination."""
        return (self.source, *self.route, self.destination)

    @property
    def hops(self) -> int:
        """Number of crossed switches."""
        return len(self.route)


@dataclass(frozen=True)
class Link:
    """One direction of a full-duplex cable."""

    source: str
    target: str
    capacity: float

    def __post_init__(self) -> None:
        if not self.capacity > 0:
            raise ValueError(f"link {self.source}->{self.target}: capacity must be > 0")

    @property
    def name(self) -> str:
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class SwitchSpec:
    """Shared-memory switch.

    ``backplane_capacity`` is the rate of the shared-memory stage. ``None`` means
    the non-blocking default of port_count x max attached link capacity.
    """

    id: str
    port_count: int
    backplane_capacity: float | None = None

    def __post_init__(self) -> None:
        if self.port_count < 2:
            raise ValueError(f"switch {self.id}: port_count must be >= 2")
        if self.backplane_capacity is not None and not self.backplane_capacity > 0:
            raise ValueError(f"switch {self.id}: backplane_capacity must be > 0")


class ComponentKind(str, Enum):
    """Basic components a frame crosses inside a switch, in order."""

    MUX = "mux"
    QUEUE = "queue"
    DEMUX = "demux"
    OUTPUT = "output"

    @property
    def zero_delay(self) -> bool:
        """Routing is instantaneous, so the demultiplexer adds no delay."""
        return self is ComponentKind.DEMUX


@dataclass(frozen=True)
class ComponentRef:
    """A basic component on a stream's route."""

    switch_id: str
    kind: ComponentKind
    hop: int
    ingress: str
    egress: str

    @property
    def zero_delay(self) -> bool:
        return self.kind.zero_delay

    @property
    def name(self) -> str:
        if self.kind is ComponentKind.MUX:
            return f"{self.switch_id}/mux"
        if self.kind is ComponentKind.DEMUX:
            return f"{self.switch_id}/demux"
        return f"{self.switch_id}/{self.kind.value}[{self.egress}]"


@dataclass(frozen=True)
class Violation:
    """A single problem found by :func:`validate`."""

    kind: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`; empty means the model can be analysed."""

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


@dataclass(frozen=True)
class NetworkModel:
    """Stations, switches, directed links and the streams crossing them."""

    stations: tuple[str, ...] = ()
    switches: tuple[SwitchSpec, ...] = ()
    links: tuple[Link, ...] = ()
    streams: tuple[Stream, ...] = ()
    _link_index: dict[tuple[str, str], Link] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "switches", tuple(self.switches))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "streams", tuple(self.streams))
        object.__setattr__(
            self, "_link_index", {(link.source, link.target): link for link in self.links}
        )

    @classmethod
    def from_toml(cls, path: str | Path) -> "NetworkModel":
        """Load the ``[network]`` and ``[[stream]]`` sections of a TOML file.

        Args:
            path: Configuration file

        Returns:
            NetworkModel instance (not yet validated)
        """
        return cls.from_mapping(load_toml(path))

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "NetworkModel":
        """Build a model from an already parsed configuration mapping.

        Each ``[[network.links]]`` entry declares a full-duplex cable and yields
        two directed links.
        """
        network = data.get("network", {})
        if not isinstance(network, Mapping):
            raise ConfigError("must be a table", field="network")

        stations = tuple(str(s) for s in network.get("stations", []))

        switches = []
        for n, raw in enumerate(network.get("switches", [])):
            where = f"network.switches[{n}]"
            try:
                backplane = raw.get("backplane_capacity")
                switches.append(
                    SwitchSpec(
                        id=str(raw["id"]),
                        port_count=int(raw["port_count"]),
                        backplane_capacity=(
                            None
                            if backplane is None
                            else parse_capacity(backplane, field=f"{where}.backplane_capacity")
                        ),
                    )
                )
            except KeyError as e:
                raise ConfigError(f"missing key {e.args[0]!r}", field=where) from e
            except (TypeError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(str(e), field=where) from e

        links = []
        for n, raw in enumerate(network.get("links", [])):
            where = f"network.links[{n}]"
            try:
                a, b = str(raw["from"]), str(raw["to"])
                capacity = parse_capacity(raw["capacity"], field=f"{where}.capacity")
                links.append(Link(a, b, capacity))
                if raw.get("duplex", True):
                    links.append(Link(b, a, capacity))
            except KeyError as e:
                raise ConfigError(f"missing key {e.args[0]!r}", field=where) from e
            except ValueError as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(str(e), field=where) from e

        streams = []
        needs_routes = False
        for n, raw in enumerate(data.get("stream", [])):
            where = f"stream[{n}]"
            try:
                streams.append(
                    Stream(
                        id=str(raw["id"]),
                        source=str(raw["source"]),
                        destination=str(raw["destination"]),
                        envelope0=TrafficEnvelope(
                            float(raw["sigma"]), parse_capacity(raw["rho"], field=f"{where}.rho")
                        ),
                        max_frame_len=float(raw["max_frame_len"]),
                        route=tuple(str(hop) for hop in raw.get("route", [])),
                    )
                )
                needs_routes = needs_routes or "route" not in raw
            except KeyError as e:
                raise ConfigError(f"missing key {e.args[0]!r}", field=where) from e
            except (TypeError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(str(e), field=where) from e

        model = cls(tuple(stations), tuple(switches), tuple(links), tuple(streams))
        if needs_routes:
            model = model.with_routes()
        return model

    @property
    def switch_ids(self) -> list[str]:
        return [sw.id for sw in self.switches]

    def switch(self, switch_id: str) -> SwitchSpec:
        for sw in self.switches:
            if sw.id == switch_id:
                return sw
        raise ModelError(f"unknown switch {switch_id!r}")

    def stream(self, stream_id: str) -> Stream:
        for s in self.streams:
            if s.id == str(stream_id):
                return s
        raise ModelError(f"unknown stream {stream_id!r}")

    def link(self, source: str, target: str) -> Link:
        try:
            return self._link_index[(source, target)]
        except KeyError:
            raise ModelError(f"no link {source}->{target}") from None

    def has_link(self, source: str, target: str) -> bool:
        return (source, target) in self._link_index

    def attached_links(self, node: str) -> list[Link]:
        """Links leaving ``node``, in declaration order."""
        return [link for link in self.links if link.source == node]

    def backplane(self, switch_id: str) -> float:
        """Effective shared-memory rate of a switch."""
        sw = self.switch(switch_id)
        if sw.backplane_capacity is not None:
            return sw.backplane_capacity
        capacities = [link.capacity for link in self.links if switch_id in (link.source, link.target)]
        if not capacities:
            raise ModelError(f"switch {switch_id!r} has no links")
        return sw.port_count * max(capacities)

    def ingress_link(self, stream: Stream, hop: int) -> Link:
        """Link entering the ``hop``-th switch (0-based) of the stream's route."""
        path = stream.path
        return self.link(path[hop], path[hop + 1])

    def egress_link(self, stream: Stream, hop: int) -> Link:
        """Link leaving the ``hop``-th switch (0-based) of the stream's route."""
        path = stream.path
        return self.link(path[hop + 1], path[hop + 2])

    def crossings(self, switch_id: str) -> list[tuple[Stream, int]]:
        """Streams crossing a switch with the 0-based hop index at which they do."""
        out = []
        for s in self.streams:
            for hop, sw in enumerate(s.route):
                if sw == switch_id:
                    out.append((s, hop))
        return out

    def with_routes(self) -> "NetworkModel":
        """Copy in which streams without an explicit route get the tree route."""
        routes = tree_routes(self)
        streams = tuple(
            s if s.route else replace(s, route=routes[s.id]) for s in self.streams
        )
        return replace(self, streams=streams)

    def with_link_capacity(self, capacity: float) -> "NetworkModel":
        """Copy with every link at ``capacity`` and backplanes back to their default."""
        return replace(
            self,
            links=tuple(replace(link, capacity=capacity) for link in self.links),
            switches=tuple(replace(sw, backplane_capacity=None) for sw in self.switches),
        )

    def scaled_capacities(self, factor: float) -> "NetworkModel":
        """Copy with every link and explicit backplane capacity multiplied by ``factor``."""
        if not factor > 0:
            raise ValueError("factor must be > 0")
        return replace(
            self,
            links=tuple(replace(link, capacity=link.capacity * factor) for link in self.links),
            switches=tuple(
                sw
                if sw.backplane_capacity is None
                else replace(sw, backplane_capacity=sw.backplane_capacity * factor)
                for sw in self.switches
            ),
        )

    def with_streams(self, streams: Iterable[Stream]) -> "NetworkModel":
        return replace(self, streams=tuple(streams))


def load_toml(path: str | Path) -> dict[str, Any]:
    """Read a TOML file, turning syntax errors into :class:`ConfigError`."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"no such file: {path}") from e
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        if line is None:
            # older interpreters only embed the position in the message
            marker = "(at line "
            text = str(e)
            if marker in text:
                digits = text.split(marker, 1)[1].split(",", 1)[0]
                line = int(digits) if digits.isdigit() else None
        raise ConfigError(str(e), line=line) from e


def _graph(model: NetworkModel) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(model.stations, kind="station")
    graph.add_nodes_from(model.switch_ids, kind="switch")
    graph.add_edges_from((link.source, link.target) for link in model.links)
    return graph


def tree_routes(model: NetworkModel) -> dict[str, tuple[str, ...]]:
    """Unique switch path for every stream on a loop-free topology.

    Args:
        model: Network model; its declared routes are ignored

    Returns:
        Mapping of stream id to the ordered switches between source and destination

    Raises:
        ModelError: topology has a loop, or a path is missing or crosses a station
    """
    graph = _graph(model)
    if not nx.is_forest(graph):
        raise ModelError("topology is not a tree; routes must be declared explicitly")

    switches = set(model.switch_ids)
    routes = {}
    for s in model.streams:
        try:
            path = nx.shortest_path(graph, s.source, s.destination)
        except (nx.NetworkXNoPath, nx.NodeNotFound) as e:
            raise ModelError(f"stream {s.id}: no path {s.source}->{s.destination}") from e
        inner = path[1:-1]
        if any(node not in switches for node in inner):
            raise ModelError(f"stream {s.id}: path crosses a station")
        routes[s.id] = tuple(inner)
    return routes


def validate(model: NetworkModel) -> ValidationReport:
    """Check references, route shape and utilization.

    Never raises; every problem becomes a :class:`Violation`.

    Args:
        model: Network model to check

    Returns:
        ValidationReport, empty when the model can be analysed
    """
    found: list[Violation] = []
    stations = set(model.stations)
    switches = set(model.switch_ids)

    for ids, what in ((model.stations, "station"), (model.switch_ids, "switch")):
        seen: set[str] = set()
        for node in ids:
            if node in seen:
                found.append(Violation("duplicate id", node, f"{what} declared twice"))
            seen.add(node)
    if stations & switches:
        for node in sorted(stations & switches):
            found.append(Violation("duplicate id", node, "used as station and switch"))
    seen_streams: set[str] = set()
    for s in model.streams:
        if s.id in seen_streams:
            found.append(Violation("duplicate id", s.id, "stream declared twice"))
        seen_streams.add(s.id)

    nodes = stations | switches
    for link in model.links:
        for end in (link.source, link.target):
            if end not in nodes:
                found.append(Violation("unknown node", link.name, f"unknown node {end!r}"))

    for sw in model.switches:
        attached = [link for link in model.links if link.source == sw.id]
        if len(attached) > sw.port_count:
            found.append(
                Violation("port count", sw.id, f"{len(attached)} links on {sw.port_count} ports")
            )
        capacities = [link.capacity for link in model.links if sw.id in (link.source, link.target)]
        if sw.backplane_capacity is not None and capacities:
            if sw.backplane_capacity < max(capacities):
                found.append(
                    Violation("backplane", sw.id, "backplane slower than an attached link")
                )

    routable = []
    for s in model.streams:
        ok = True
        for end in (s.source, s.destination):
            if end not in stations:
                found.append(Violation("unknown station", s.id, f"unknown station {end!r}"))
                ok = False
        for hop in s.route:
            if hop not in switches:
                found.append(Violation("unknown switch", s.id, f"unknown switch {hop!r}"))
                ok = False
        if len(set(s.route)) != len(s.route):
            found.append(Violation("route loop", s.id, "route repeats a switch"))
            ok = False
        if ok:
            path = s.path
            for a, b in zip(path, path[1:], strict=False):
                if not model.has_link(a, b):
                    found.append(Violation("missing link", s.id, f"no link {a}->{b}"))
                    ok = False
        if ok:
            routable.append(s)

    # Utilization: every directed link (ingress, egress and output queues) and every
    # shared-memory stage must be served strictly faster than it is loaded.
    load: dict[tuple[str, str], float] = {}
    switch_load: dict[str, float] = {}
    for s in routable:
        path = s.path
        for a, b in zip(path, path[1:], strict=False):
            load[(a, b)] = load.get((a, b), 0.0) + s.envelope0.rho
        for sw in s.route:
            switch_load[sw] = switch_load.get(sw, 0.0) + s.envelope0.rho
    for (a, b), rho in load.items():
        capacity = model.link(a, b).capacity
        if rho >= capacity:
            found.append(
                Violation(
                    "utilization ≥ 1",
                    f"{a}->{b}",
                    f"utilization ≥ 1 ({rho:g} of {capacity:g} bytes/s)",
                )
            )
    for sw_id, rho in switch_load.items():
        try:
            backplane = model.backplane(sw_id)
        except ModelError:
            continue
        if rho >= backplane:
            found.append(
                Violation(
                    "utilization ≥ 1",
                    f"{sw_id}/mux",
                    f"utilization ≥ 1 ({rho:g} of {backplane:g} bytes/s)",
                )
            )

    if found:
        logger.debug(f"Model validation found {len(found)} violation(s)")
    return ValidationReport(tuple(found))


def components_on_route(model: NetworkModel, stream_id: str) -> list[ComponentRef]:
    """Expand a stream's route into the basic components it crosses.

    Args:
        model: Validated network model
        stream_id: Stream identifier

    Returns:
        Four components per crossed switch: mux, queue, demux, output

    Raises:
        ModelError: unknown stream id
    """
    stream = model.stream(stream_id)
    path = stream.path
    refs = []
    for hop, sw in enumerate(stream.route):
        ingress, egress = path[hop], path[hop + 2]
        for kind in ComponentKind:
            refs.append(ComponentRef(sw, kind, hop, ingress, egress))
    return refs


def random_model(
    rng: np.random.Generator,
    *,
    max_switches: int = 3,
    max_streams: int = 6,
    capacities: tuple[float, ...] = (1.25e6, 1.25e7),
    max_utilization: float = 0.8,
) -> NetworkModel:
    """Seeded random chain of 1..max_switches switches with valid streams.

    Source stations may carry several streams; destinations are shared sink
    stations, two per switch. Every switch gets an explicit backplane between its
    fastest link and the non-blocking default. Rates are scaled so that no link or
    backplane exceeds ``max_utilization``.
    """
    n_switches = int(rng.integers(1, max_switches + 1))
    n_streams = int(rng.integers(1, max_streams + 1))
    n_sources = int(rng.integers(1, n_streams + 1))
    switch_ids = [f"sw{i}" for i in range(n_switches)]
    sinks = [f"sink{i}_{j}" for i in range(n_switches) for j in range(2)]
    sources = [f"src{n}" for n in range(n_sources)]
    attach = {sink: f"sw{int(sink[4:].split('_')[0])}" for sink in sinks}
    for src in sources:
        attach[src] = switch_ids[int(rng.integers(0, n_switches))]

    links: list[Link] = []

    def cable(a: str, b: str) -> None:
        capacity = float(rng.choice(capacities))
        links.extend((Link(a, b, capacity), Link(b, a, capacity)))

    for a, b in zip(switch_ids, switch_ids[1:], strict=False):
        cable(a, b)
    for node in sinks + sources:
        cable(node, attach[node])

    port_counts = {sw: 0 for sw in switch_ids}
    for link in links:
        if link.source in port_counts:
            port_counts[link.source] += 1

    def backplane(sw: str) -> float:
        fastest = max(link.capacity for link in links if link.source == sw)
        ports = max(port_counts[sw], 2)
        # as slow as the fastest link, somewhere in between, or non-blocking
        return fastest * float(rng.choice([1.0, float(rng.uniform(1.0, ports)), float(ports)]))

    streams = []
    for n in range(n_streams):
        src = sources[int(rng.integers(0, n_sources))]
        dst = sinks[int(rng.integers(0, len(sinks)))]
        frame = float(rng.integers(128, 1527))
        sigma = frame * float(rng.integers(1, 4))
        rho = float(rng.uniform(1e4, 2e5))
        streams.append(Stream(str(n + 1), src, dst, TrafficEnvelope(sigma, rho), frame))

    model = NetworkModel(
        tuple(sinks + sources),
        tuple(SwitchSpec(sw, max(port_counts[sw], 2), backplane(sw)) for sw in switch_ids),
        tuple(links),
        tuple(streams),
    ).with_routes()

    # scale rates down until every link and backplane respects the utilization cap
    worst = 0.0
    for s in model.streams:
        path = s.path
        for a, b in zip(path, path[1:], strict=False):
            rho = sum(
                z.envelope0.rho
                for z in model.streams
                if any((x, y) == (a, b) for x, y in zip(z.path, z.path[1:], strict=False))
            )
            worst = max(worst, rho / model.link(a, b).capacity)
    for sw in model.switches:
        rho = sum(z.envelope0.rho for z in model.streams if sw.id in z.route)
        worst = max(worst, rho / model.backplane(sw.id))
    if worst > max_utilization:
        factor = max_utilization / worst
        model = model.with_streams(
            replace(s, envelope0=TrafficEnvelope(s.envelope0.sigma, s.envelope0.rho * factor))
            for s in model.streams
        )
    return model
