"""Round-based simulation of mobile-agent versus client/server data collection.

Traffic is counted in byte-hops: bytes carried on a leg times the hop count
of the shortest path the leg follows. Time advances in rounds; in each round
every agent leaves the sink, tours its sources in LCF order and returns.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, InputError
from .ids import Id, sorted_ids
from .routing import Itinerary, Topology, dijkstra, lcf_itinerary, load_management_sweep, star_topology


@dataclass(frozen=True)
class SimulationConfig:
    field_size: tuple[float, float] = (100.0, 100.0)
    n_routers: int = 20
    m_agents: int = 1
    rounds: int = 1
    aggregation_ratio: float = 1.0
    code_size: float = 0.0
    raw_payload_size: float = 100.0
    fault_tolerance: float = 5.0
    duplication_threshold: Fraction = Fraction(1, 3)
    seed: int = 0
    failed_nodes: tuple = ()
    faulty_nodes: tuple = ()
    fault_offset: float = 25.0
    reading_base: float = 30.0
    reading_noise: float = 1.0

    def __post_init__(self) -> None:
        if self.n_routers < 1:
            raise InputError("n_routers must be >= 1")
        if self.m_agents < 1:
            raise InputError("m_agents must be >= 1")
        if self.rounds < 0:
            raise InputError("rounds must be >= 0")
        if not 0 < self.aggregation_ratio <= 1:
            raise InputError(f"aggregation_ratio must lie in (0, 1], got {self.aggregation_ratio}")
        if self.code_size < 0:
            raise InputError("code_size must be >= 0")
        if not self.raw_payload_size > 0:
            raise InputError("raw_payload_size must be > 0")
        if not self.fault_tolerance >= 0:
            raise InputError("fault_tolerance must be >= 0")
        object.__setattr__(self, "duplication_threshold", Fraction(self.duplication_threshold))
        object.__setattr__(self, "failed_nodes", tuple(self.failed_nodes))
        object.__setattr__(self, "faulty_nodes", tuple(self.faulty_nodes))


@dataclass
class MAPacket:
    sink_id: Id
    ma_seq_num: int
    agent: Id
    src_list: Itinerary
    payload: float = 0.0
    code_size: float = 0.0

    @property
    def next_src(self) -> int:
        return self.src_list.next_index


class Sink:
    """Dispatch point; numbers packets with a strictly increasing MA_SeqNum."""

    def __init__(self, node: Id) -> None:
        self.node = node
        self.seq = 0

    def dispatch(self, agent: Id, itinerary: Itinerary, code_size: float = 0.0) -> MAPacket:
        self.seq += 1
        return MAPacket(self.node, self.seq, agent, itinerary, 0.0, code_size)


def dispatch_round(
    topology: Topology,
    tasks: Mapping[Id, Iterable[Id]],
    sink: Sink | None = None,
    code_size: float = 0.0,
) -> tuple[list[MAPacket], dict]:
    """One packet per agent with an LCF itinerary over its targets, plus the
    agent -> router route tables."""
    if not tasks:
        raise InputError("no tasks to dispatch")
    sink = sink or Sink(topology.sink)
    packets = []
    tables = {}
    for agent, targets in tasks.items():
        targets = set(targets)
        try:
            itinerary = lcf_itinerary(topology, sink.node, targets)
        except InfeasibleError as exc:
            raise InfeasibleError(f"agent {agent!r}: {exc}") from None
        except InputError as exc:
            raise InputError(f"agent {agent!r}: {exc}") from None
        packets.append(sink.dispatch(agent, itinerary, code_size))
        tables[agent] = targets
    return packets, tables


def filter_reading(reading: float, neighbor_readings: Sequence[float], tolerance: float) -> bool:
    """True (accepted) when the reading lies within the neighbours' range
    widened by ``tolerance`` on both sides."""
    if tolerance < 0:
        raise InputError("tolerance must be >= 0")
    if len(neighbor_readings) == 0:
        raise InputError("cannot judge a reading without neighbour readings")
    return min(neighbor_readings) - tolerance <= reading <= max(neighbor_readings) + tolerance


@dataclass
class NodeState:
    readings: list[float]
    raw_payload_size: float
    neighbor_ids: frozenset
    cached_code: set = field(default_factory=set)

    @property
    def code_cached(self) -> bool:
        return bool(self.cached_code)


def node_states(config: SimulationConfig, topology: Topology) -> dict:
    """Per-node readings for every round: a base value plus noise smoothed
    over each node's closed neighbourhood, so neighbours agree. Faulty nodes
    read ``fault_offset`` high."""
    rng = np.random.default_rng(config.seed)
    nodes = topology.nodes
    index = {n: i for i, n in enumerate(nodes)}
    hood = [[index[n]] + [index[v] for v in topology.neighbors(n)] for n in nodes]
    readings = np.empty((len(nodes), config.rounds))
    for r in range(config.rounds):
        noise = rng.normal(0.0, config.reading_noise, size=len(nodes))
        drift = rng.normal(0.0, config.reading_noise / 4)
        readings[:, r] = [config.reading_base + drift + noise[h].mean() for h in hood]
    faulty = set(config.faulty_nodes)
    states = {}
    for n in nodes:
        values = readings[index[n]].tolist()
        if n in faulty:
            values = [v + config.fault_offset for v in values]
        states[n] = NodeState(values, config.raw_payload_size, frozenset(topology.neighbors(n)))
    return states


@dataclass(frozen=True)
class Leg:
    round: int
    agent: Id
    seq: int
    origin: Id
    dest: Id
    hops: int
    payload: float
    code: float
    kind: str  # "source", "detour" or "return"

    @property
    def byte_hops(self) -> float:
        return (self.payload + self.code) * self.hops


@dataclass
class RoundTraffic:
    round: int
    ma_bytes: float = 0.0
    ma_payload_bytes: float = 0.0
    ma_code_bytes: float = 0.0
    cs_bytes: float = 0.0
    visits: int = 0
    transmissions: int = 0
    discarded: int = 0


@dataclass
class TrafficReport:
    """Byte-hop accounting of a run; the mobile-agent or client/server
    side is zero when that mode was not simulated."""

    per_round: list[RoundTraffic]
    legs: list[Leg] = field(default_factory=list)
    code_delivered: dict = field(default_factory=dict)
    packets: list[MAPacket] = field(default_factory=list)
    skipped_failed: list = field(default_factory=list)

    @property
    def bytes_mobile_agent(self) -> float:
        return math.fsum(r.ma_bytes for r in self.per_round)

    @property
    def bytes_client_server(self) -> float:
        return math.fsum(r.cs_bytes for r in self.per_round)

    @property
    def visits_total(self) -> int:
        return sum(r.visits for r in self.per_round)

    @property
    def transmissions_total(self) -> int:
        return sum(r.transmissions for r in self.per_round)

    @property
    def discarded_total(self) -> int:
        return sum(r.discarded for r in self.per_round)

    @property
    def savings_fraction(self) -> float | None:
        """``1 - MA/baseline``; None when the baseline moved no bytes."""
        base = self.bytes_client_server
        if base == 0:
            return None
        return 1.0 - self.bytes_mobile_agent / base

    def merged(self, other: "TrafficReport") -> "TrafficReport":
        if len(self.per_round) != len(other.per_round):
            raise InputError("cannot merge reports with different round counts")
        rounds = []
        for a, b in zip(self.per_round, other.per_round):
            rounds.append(
                RoundTraffic(
                    a.round,
                    a.ma_bytes + b.ma_bytes,
                    a.ma_payload_bytes + b.ma_payload_bytes,
                    a.ma_code_bytes + b.ma_code_bytes,
                    a.cs_bytes + b.cs_bytes,
                    a.visits + b.visits,
                    a.transmissions + b.transmissions,
                    a.discarded + b.discarded,
                )
            )
        code = dict(self.code_delivered)
        for key, v in other.code_delivered.items():
            code[key] = code.get(key, 0.0) + v
        return TrafficReport(
            rounds,
            self.legs + other.legs,
            code,
            self.packets + other.packets,
            self.skipped_failed + other.skipped_failed,
        )


class _Router:
    """Shortest-path queries over the live topology with memoised tables."""

    def __init__(self, topology: Topology) -> None:
        self.topology = topology
        self._tables: dict = {}

    def table(self, source: Id) -> dict:
        if source not in self._tables:
            self._tables[source] = dijkstra(self.topology, source)
        return self._tables[source]

    def hops(self, u: Id, v: Id) -> int:
        info = self.table(u)[v]
        if not math.isfinite(info.distance):
            raise InfeasibleError(f"node {v!r} is unreachable from {u!r}")
        return info.hops


def run_mobile_agent(
    config: SimulationConfig,
    topology: Topology,
    tasks: Mapping[Id, Iterable[Id]],
    demand: Mapping[Id, Mapping[Id, int]] | None = None,
) -> TrafficReport:
    """Simulate ``config.rounds`` rounds of mobile-agent collection.

    On each leg the agent carries its payload plus its code when the
    destination has not cached that agent's code yet. At an accepted source
    the payload grows by ``aggregation_ratio * raw_payload_size`` (times the
    optional per-source ``demand``). Nodes drop all cached code when the last
    round ends. A failed itinerary node is skipped: the agent goes to its
    lowest-id live neighbour and re-plans LCF from there.
    """
    tasks = {a: set(t) for a, t in tasks.items()}
    failed = set(config.failed_nodes)
    live = topology.without(failed) if failed else topology
    router = _Router(live)
    states = node_states(config, topology)
    sink = Sink(topology.sink)
    rounds = [RoundTraffic(r) for r in range(1, config.rounds + 1)]
    legs: list[Leg] = []
    code_delivered: dict = {}
    packets: list[MAPacket] = []
    skipped: list = []

    for rt in rounds:
        r = rt.round
        batch, _ = dispatch_round(topology, tasks, sink, config.code_size)
        packets.extend(batch)
        for pkt in batch:
            agent = pkt.agent
            weights = (demand or {}).get(agent, {})
            known_failed: set = set()
            here = sink.node
            plan = pkt.src_list
            remaining = set(plan.order)
            while remaining:
                nxt = plan.order[plan.next_index]
                if nxt in failed:
                    known_failed.add(nxt)
                    remaining.discard(nxt)
                    skipped.append((r, agent, nxt))
                    detour = _detour_node(topology, live, router, here, nxt)
                    if detour != here:
                        pending = remaining - {detour}
                        carry_code = any(agent not in states[n].cached_code for n in remaining)
                        code = pkt.code_size if carry_code else 0.0
                        leg = Leg(r, agent, pkt.ma_seq_num, here, detour, router.hops(here, detour),
                                  pkt.payload, code, "detour")
                        _book(rt, leg, legs)
                        here = detour
                        if detour in remaining:
                            _visit(config, states, live, rt, pkt, agent, detour, weights, code_delivered, code > 0)
                            remaining = pending
                    plan = _replan(topology.without(known_failed), here, remaining, agent)
                    pkt.src_list = plan
                    continue
                code = pkt.code_size if agent not in states[nxt].cached_code else 0.0
                leg = Leg(r, agent, pkt.ma_seq_num, here, nxt, router.hops(here, nxt), pkt.payload, code, "source")
                _book(rt, leg, legs)
                plan.advance()
                here = nxt
                remaining.discard(nxt)
                _visit(config, states, live, rt, pkt, agent, nxt, weights, code_delivered, code > 0)
            if here != sink.node:
                leg = Leg(r, agent, pkt.ma_seq_num, here, sink.node, router.hops(here, sink.node),
                          pkt.payload, 0.0, "return")
                _book(rt, leg, legs)

    for s in states.values():
        s.cached_code.clear()
    return TrafficReport(rounds, legs, code_delivered, packets, skipped)


def _detour_node(topology: Topology, live: Topology, router: _Router, here: Id, failed_node: Id) -> Id:
    for n in topology.neighbors(failed_node):
        if n in live and math.isfinite(router.table(here)[n].distance):
            return n
    raise InfeasibleError(f"node {failed_node!r} failed and no live neighbour offers a detour")


def _replan(topology: Topology, here: Id, remaining: set, agent: Id) -> Itinerary:
    try:
        return lcf_itinerary(topology, here, remaining)
    except InfeasibleError as exc:
        raise InfeasibleError(f"agent {agent!r}: {exc}") from None


def _book(rt: RoundTraffic, leg: Leg, legs: list[Leg]) -> None:
    legs.append(leg)
    rt.ma_bytes += leg.byte_hops
    rt.ma_payload_bytes += leg.payload * leg.hops
    rt.ma_code_bytes += leg.code * leg.hops


def _visit(config, states, live, rt, pkt, agent, node, weights, code_delivered, brought_code: bool) -> None:
    state = states[node]
    if brought_code and agent not in state.cached_code:
        state.cached_code.add(agent)
        code_delivered[(agent, node)] = code_delivered.get((agent, node), 0.0) + pkt.code_size
    rt.visits += 1
    r = rt.round - 1
    neighbours = [states[n].readings[r] for n in sorted_ids(state.neighbor_ids) if n in live]
    if neighbours and not filter_reading(state.readings[r], neighbours, config.fault_tolerance):
        rt.discarded += 1
        return
    pkt.payload += config.aggregation_ratio * state.raw_payload_size * weights.get(node, 1)


def run_client_server(
    config: SimulationConfig,
    topology: Topology,
    tasks: Mapping[Id, Iterable[Id]],
) -> TrafficReport:
    """Every (task, source) pair ships its raw reading to the sink each
    round along the shortest path; no code, no fusion, no filtering.
    Failed nodes send nothing."""
    failed = set(config.failed_nodes)
    live = topology.without(failed) if failed else topology
    router = _Router(live)
    pairs = [(a, s) for a, targets in tasks.items() for s in sorted_ids(set(targets)) if s not in failed]
    hops = {}
    for agent, source in pairs:
        if source not in topology:
            raise InputError(f"agent {agent!r}: unknown source {source!r}")
        try:
            hops[source] = router.hops(source, topology.sink)
        except InfeasibleError:
            raise InfeasibleError(f"source {source!r} of agent {agent!r} cannot reach the sink") from None
    rounds = []
    for r in range(1, config.rounds + 1):
        rt = RoundTraffic(r)
        for _, source in pairs:
            rt.cs_bytes += config.raw_payload_size * hops[source]
            rt.transmissions += 1
        rounds.append(rt)
    return TrafficReport(rounds)


def simulate(config: SimulationConfig, topology: Topology, tasks: Mapping[Id, Iterable[Id]]) -> TrafficReport:
    """Both modes over the same topology and tasks, merged into one report."""
    return run_mobile_agent(config, topology, tasks).merged(run_client_server(config, topology, tasks))


def parent_agent(topology: Topology):
    """Launch the load-management agent: all-pairs routes gathered on an
    LCF sweep from the sink."""
    return load_management_sweep(topology)


# --- sweeps ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    params: Mapping[str, Any]
    config: SimulationConfig
    topology: Topology
    tasks: Mapping[Id, frozenset]


@dataclass(frozen=True)
class SweepRow:
    params: Mapping[str, Any]
    bytes_mobile_agent: float
    bytes_client_server: float
    savings_fraction: float | None


def _run_point(point: SweepPoint) -> SweepRow:
    report = simulate(point.config, point.topology, point.tasks)
    return SweepRow(point.params, report.bytes_mobile_agent, report.bytes_client_server, report.savings_fraction)


def compare(points: Sequence[SweepPoint], workers: int = 1) -> list[SweepRow]:
    """Savings for every sweep point, in sweep order. A point whose baseline
    moves no bytes gets ``savings_fraction=None``."""
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point, points))
    return [_run_point(p) for p in points]


def star_sweep(
    rhos: Sequence[float],
    code_sizes: Sequence[float],
    leaf_counts: Sequence[int],
    base: SimulationConfig | None = None,
) -> list[SweepPoint]:
    """Grid over (N, code_size, rho) on star topologies; one agent visits
    every leaf."""
    base = base or SimulationConfig()
    points = []
    for n in leaf_counts:
        topo = star_topology(n)
        tasks = {"A": frozenset(range(1, n + 1))}
        for code in code_sizes:
            for rho in rhos:
                cfg = replace(base, n_routers=n, code_size=code, aggregation_ratio=rho)
                points.append(SweepPoint({"n_routers": n, "code_size": code, "aggregation_ratio": rho}, cfg, topo, tasks))
    return points


def format_number(value: float | None) -> str:
    if value is None:
        return "undefined"
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6f}"
