"""Sensor-network topology, shortest paths and Local-Closest-First itineraries."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, InputError
from .ids import Id, id_key, parse_id, sorted_ids


class Topology:
    """Undirected weighted graph with a designated sink.

    ``coords`` maps node id to ``(x, y)`` in meters or ``None``.
    """

    def __init__(
        self,
        nodes: Iterable[Id] | Mapping[Id, tuple[float, float] | None],
        edges: Iterable[tuple[Id, Id, float]],
        sink: Id,
        field_size: tuple[float, float] | None = None,
    ) -> None:
        if isinstance(nodes, Mapping):
            coords = {n: (None if xy is None else (float(xy[0]), float(xy[1]))) for n, xy in nodes.items()}
        else:
            coords = {n: None for n in nodes}
        self.coords: dict = dict(sorted(coords.items(), key=lambda kv: id_key(kv[0])))
        self.adj: dict = {n: {} for n in self.coords}
        for u, v, w in edges:
            w = float(w)
            for n in (u, v):
                if n not in self.coords:
                    raise InputError(f"edge ({u}, {v}) references unknown node {n!r}")
            if u == v:
                raise InputError(f"self-loop on node {u!r}")
            if not math.isfinite(w) or w < 0:
                raise InputError(f"edge ({u}, {v}) has invalid weight {w}")
            if v in self.adj[u]:
                raise InputError(f"duplicate edge between {u!r} and {v!r}")
            self.adj[u][v] = w
            self.adj[v][u] = w
        if sink not in self.coords:
            raise InputError(f"sink {sink!r} is not a node")
        self.sink = sink
        self.field_size = field_size

    @property
    def nodes(self) -> list:
        return list(self.coords)

    def neighbors(self, node: Id) -> list:
        return sorted_ids(self.adj[node])

    def edges(self) -> list[tuple[Id, Id, float]]:
        out = []
        for u in self.coords:
            for v, w in self.adj[u].items():
                if id_key(u) < id_key(v):
                    out.append((u, v, w))
        return sorted(out, key=lambda e: (id_key(e[0]), id_key(e[1])))

    def without(self, removed: Iterable[Id]) -> "Topology":
        """Copy with ``removed`` nodes (and their links) deleted."""
        removed = set(removed)
        if self.sink in removed:
            raise InfeasibleError(f"sink {self.sink!r} cannot be removed")
        return Topology(
            {n: xy for n, xy in self.coords.items() if n not in removed},
            [e for e in self.edges() if e[0] not in removed and e[1] not in removed],
            self.sink,
            self.field_size,
        )

    def __contains__(self, node: Id) -> bool:
        return node in self.coords

    def __len__(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        return f"Topology({len(self)} nodes, {len(self.edges())} edges, sink={self.sink!r})"


@dataclass(frozen=True)
class PathInfo:
    distance: float
    predecessor: Id | None
    hops: int


def dijkstra(t: Topology, source: Id) -> dict:
    """Shortest paths from ``source``: node -> PathInfo.

    Unreachable nodes get ``inf`` distance and no predecessor. Among equal
    cost paths the predecessor with the smaller id wins.
    """
    if source not in t:
        raise InputError(f"unknown source node {source!r}")
    dist = {n: math.inf for n in t.coords}
    pred: dict = {n: None for n in t.coords}
    hops = {n: 0 for n in t.coords}
    dist[source] = 0.0
    done: set = set()
    heap = [(0.0, id_key(source), source)]
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in t.neighbors(u):
            if v in done:
                continue
            nd = d + t.adj[u][v]
            if nd < dist[v] or (nd == dist[v] and pred[v] is not None and id_key(u) < id_key(pred[v])):
                dist[v] = nd
                pred[v] = u
                hops[v] = hops[u] + 1
                heapq.heappush(heap, (nd, id_key(v), v))
    return {n: PathInfo(dist[n], pred[n], hops[n] if math.isfinite(dist[n]) else 0) for n in t.coords}


def path_to(table: Mapping[Id, PathInfo], source: Id, target: Id) -> list:
    """Node sequence from ``source`` to ``target`` using a dijkstra table."""
    if not math.isfinite(table[target].distance):
        raise InfeasibleError(f"node {target!r} is unreachable from {source!r}")
    path = [target]
    while path[-1] != source:
        path.append(table[path[-1]].predecessor)
    return path[::-1]


@dataclass
class Itinerary:
    """Ordered source list (SrcList) with a cursor (NextSrc)."""

    start: Id
    order: list
    leg_costs: list[float]
    next_index: int = 0

    def __post_init__(self) -> None:
        if len(set(self.order)) != len(self.order):
            raise InputError("itinerary visits a node twice")
        if len(self.leg_costs) != len(self.order):
            raise InputError("one leg cost per itinerary entry is required")
        if not 0 <= self.next_index <= len(self.order):
            raise InputError("itinerary cursor out of range")

    @property
    def total_cost(self) -> float:
        return math.fsum(self.leg_costs)

    @property
    def finished(self) -> bool:
        return self.next_index >= len(self.order)

    def advance(self) -> Id:
        node = self.order[self.next_index]
        self.next_index += 1
        return node

    def __len__(self) -> int:
        return len(self.order)


def lcf_itinerary(t: Topology, start: Id, targets: Iterable[Id]) -> Itinerary:
    """Greedy Local-Closest-First order over ``targets``.

    From the current node, the next stop is the unvisited target at the
    smallest shortest-path distance (smaller id on ties).
    """
    if start not in t:
        raise InputError(f"unknown start node {start!r}")
    remaining = set(targets)
    for n in remaining:
        if n not in t:
            raise InputError(f"unknown target node {n!r}")
    order, costs = [], []
    here = start
    while remaining:
        table = dijkstra(t, here)
        nxt = min(remaining, key=lambda n: (table[n].distance, id_key(n)))
        d = table[nxt].distance
        if not math.isfinite(d):
            bad = sorted_ids(n for n in remaining if not math.isfinite(table[n].distance))
            raise InfeasibleError(f"target {bad[0]!r} is unreachable from {here!r}")
        order.append(nxt)
        costs.append(d)
        remaining.discard(nxt)
        here = nxt
    return Itinerary(start, order, costs)


@dataclass
class SweepResult:
    """All-pairs table gathered by the load-management agent."""

    nodes: list
    distance: np.ndarray
    next_hop: dict = field(default_factory=dict)
    itinerary: Itinerary | None = None

    def dist(self, u: Id, v: Id) -> float:
        return float(self.distance[self.nodes.index(u), self.nodes.index(v)])


def components(t: Topology) -> list[list]:
    seen: set = set()
    out = []
    for n in t.coords:
        if n in seen:
            continue
        comp, stack = [], [n]
        seen.add(n)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in t.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        out.append(sorted_ids(comp))
    return out


def load_management_sweep(t: Topology) -> SweepResult:
    """Visit every node from the sink (LCF order) and build the all-pairs
    shortest-path table plus a next-hop routing table per node."""
    comps = components(t)
    if len(comps) > 1:
        stray = [c for c in comps if t.sink not in c]
        listed = "; ".join(",".join(map(str, c)) for c in stray)
        raise InfeasibleError(f"topology is disconnected; unreachable from sink: {listed}")
    nodes = t.nodes
    n = len(nodes)
    dist = np.zeros((n, n))
    next_hop: dict = {}
    for i, u in enumerate(nodes):
        table = dijkstra(t, u)
        routes = {}
        for j, v in enumerate(nodes):
            dist[i, j] = table[v].distance
            if v != u:
                routes[v] = path_to(table, u, v)[1]
        next_hop[u] = routes
    itinerary = lcf_itinerary(t, t.sink, [v for v in nodes if v != t.sink])
    return SweepResult(nodes, dist, next_hop, itinerary)


# --- topology files and generators -------------------------------------------------


def parse_topology(text: str, source: str = "<topology>") -> Topology:
    """Parse ``u v w`` edge lines, ``node id x y`` lines and one ``sink id`` line."""
    coords: dict = {}
    edges = []
    sink = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) not in (2, 4):
                    raise ValueError
                nid = parse_id(parts[1])
                coords[nid] = (float(parts[2]), float(parts[3])) if len(parts) == 4 else coords.get(nid)
            elif parts[0] == "sink":
                if len(parts) != 2:
                    raise ValueError
                sink = parse_id(parts[1])
            elif len(parts) == 3:
                u, v = parse_id(parts[0]), parse_id(parts[1])
                edges.append((u, v, float(parts[2])))
                coords.setdefault(u, None)
                coords.setdefault(v, None)
            else:
                raise ValueError
        except ValueError:
            raise InputError(f"{source}:{line_no}: cannot parse {raw.strip()!r}") from None
    if sink is None:
        raise InputError(f"{source}: missing 'sink <id>' line")
    coords.setdefault(sink, None)
    try:
        return Topology(coords, edges, sink)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None


def read_topology(path: str | Path) -> Topology:
    path = Path(path)
    try:
        return parse_topology(path.read_text(), str(path))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def format_topology(t: Topology) -> str:
    lines = [f"sink {t.sink}"]
    for n, xy in t.coords.items():
        lines.append(f"node {n}" if xy is None else f"node {n} {xy[0]:.6g} {xy[1]:.6g}")
    lines += [f"{u} {v} {w:.6g}" for u, v, w in t.edges()]
    return "\n".join(lines) + "\n"


def star_topology(n_leaves: int, weight: float = 1.0) -> Topology:
    """Sink 0 at the hub, leaves 1..n one hop away."""
    return Topology(range(n_leaves + 1), [(0, i, weight) for i in range(1, n_leaves + 1)], 0)


def line_topology(n_nodes: int, weight: float = 1.0) -> Topology:
    """Nodes 0..n-1 on a line; node 0 is the sink."""
    return Topology(range(n_nodes), [(i, i + 1, weight) for i in range(n_nodes - 1)], 0)


def geometric_topology(
    n_routers: int,
    field_size: tuple[float, float],
    radius: float,
    rng: np.random.Generator,
    connect: bool = True,
) -> Topology:
    """Random placement in the field; links between nodes closer than
    ``radius`` weighted by Euclidean distance. Node 0 (the sink) sits at the
    field centre. With ``connect`` set, components are joined by their
    closest node pair until the graph is connected."""
    if n_routers < 1:
        raise InputError("need at least one router")
    width, height = field_size
    pts = np.vstack([[width / 2, height / 2], rng.uniform((0, 0), (width, height), size=(n_routers, 2))])
    ids = list(range(n_routers + 1))
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    edges = {(i, j): float(d[i, j]) for i in ids for j in ids if i < j and d[i, j] <= radius}
    coords = {i: (float(pts[i, 0]), float(pts[i, 1])) for i in ids}
    t = Topology(coords, [(i, j, w) for (i, j), w in edges.items()], 0, field_size)
    while connect:
        comps = components(t)
        if len(comps) == 1:
            break
        main = comps[0] if 0 in comps[0] else next(c for c in comps if 0 in c)
        others = [n for n in ids if n not in set(main)]
        i, j = min(((i, j) for i in main for j in others), key=lambda p: (d[p], p))
        edges[(min(i, j), max(i, j))] = float(d[i, j])
        t = Topology(coords, [(a, b, w) for (a, b), w in edges.items()], 0, field_size)
    return t


def path_cost(t: Topology, path: Sequence[Id]) -> float:
    return math.fsum(t.adj[u][v] for u, v in zip(path, path[1:]))
