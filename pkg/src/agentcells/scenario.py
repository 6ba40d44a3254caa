"""Scenario files (TOML) describing a network, tasks and simulation constants.

Example::

    seed = 7

    [field]
    width = 100.0
    height = 100.0

    [network]
    kind = "explicit"          # explicit | star | line | geometric | file
    sink = 0
    edges = [[0, 1, 1.0], [1, 2, 1.0]]

    [simulation]
    rounds = 5
    aggregation_ratio = 0.1
    code_size = 100
    raw_payload_size = 1000

    [tasks]
    A = [1, 2]

Without ``[tasks]``, ``[generate_tasks]`` (``m_agents``, ``targets_per_agent``)
draws seeded random tasks; without either, one agent ``A`` visits every
non-sink node. ``[sweep]`` may list ``aggregation_ratio``, ``code_size`` and
``n_routers`` values.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agent_sim import SimulationConfig, SweepPoint
from .errors import InputError
from .ids import Id, parse_id, sorted_ids
from .routing import Topology, geometric_topology, line_topology, read_topology, star_topology

NETWORK_KINDS = ("explicit", "star", "line", "geometric", "file")
_SIM_KEYS = {
    "rounds": int,
    "aggregation_ratio": float,
    "code_size": float,
    "raw_payload_size": float,
    "fault_tolerance": float,
    "fault_offset": float,
    "reading_base": float,
    "reading_noise": float,
}


@dataclass
class Scenario:
    config: SimulationConfig
    network: dict[str, Any]
    tasks: dict | None = None
    generate_tasks: dict | None = None
    sweep: dict[str, list] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def topology(self, n_routers: int | None = None) -> Topology:
        net = self.network
        kind = net.get("kind", "explicit")
        n = self.config.n_routers if n_routers is None else n_routers
        if kind == "star":
            return star_topology(n, float(net.get("weight", 1.0)))
        if kind == "line":
            return line_topology(n + 1, float(net.get("weight", 1.0)))
        if kind == "geometric":
            rng = np.random.default_rng(self.config.seed)
            return geometric_topology(n, self.config.field_size, float(net.get("radius", 30.0)), rng)
        if n_routers is not None:
            raise InputError(f"network kind {kind!r} has a fixed size; it cannot be swept over n_routers")
        if kind == "file":
            if "file" not in net:
                raise InputError("network kind 'file' needs a 'file' key")
            return read_topology(self.base_dir / net["file"])
        return _explicit_topology(net, self.config.field_size)

    def build_tasks(self, topology: Topology) -> dict:
        if self.tasks is not None:
            if self.tasks and any(n not in topology for ts in self.tasks.values() for n in ts):
                bad = next(n for ts in self.tasks.values() for n in ts if n not in topology)
                raise InputError(f"task target {bad!r} is not a node of the network")
            return {a: frozenset(ts) for a, ts in self.tasks.items()}
        routers = [n for n in topology.nodes if n != topology.sink]
        if self.generate_tasks is None:
            return {"A": frozenset(routers)}
        m = int(self.generate_tasks.get("m_agents", self.config.m_agents))
        k = int(self.generate_tasks.get("targets_per_agent", max(1, len(routers) // 2)))
        if not 1 <= k <= len(routers):
            raise InputError(f"targets_per_agent must lie in [1, {len(routers)}]")
        rng = np.random.default_rng([self.config.seed, 1])
        tasks = {}
        for j in range(1, m + 1):
            picks = rng.choice(len(routers), size=k, replace=False)
            tasks[f"A{j}"] = frozenset(routers[i] for i in sorted(picks))
        return tasks

    def sweep_points(self, overrides: dict[str, list] | None = None) -> list[SweepPoint]:
        grid = dict(self.sweep)
        grid.update({k: v for k, v in (overrides or {}).items() if v})
        ns = grid.get("n_routers") or [None]
        codes = grid.get("code_size") or [self.config.code_size]
        rhos = grid.get("aggregation_ratio") or [self.config.aggregation_ratio]
        if ns != [None] and self.tasks is not None:
            raise InputError("explicit [tasks] cannot be combined with an n_routers sweep")
        points = []
        for n in ns:
            topo = self.topology(None if n is None else int(n))
            tasks = self.build_tasks(topo)
            for code in codes:
                for rho in rhos:
                    cfg = replace(
                        self.config,
                        n_routers=len(topo) - 1 if n is None else int(n),
                        code_size=float(code),
                        aggregation_ratio=float(rho),
                    )
                    params = {"n_routers": cfg.n_routers, "code_size": cfg.code_size, "aggregation_ratio": cfg.aggregation_ratio}
                    points.append(SweepPoint(params, cfg, topo, tasks))
        return points


def _explicit_topology(net: dict, field_size) -> Topology:
    if "edges" not in net:
        raise InputError("explicit network needs an 'edges' list of [u, v, weight]")
    coords: dict = {}
    for entry in net.get("nodes", []):
        if isinstance(entry, list) and len(entry) == 3:
            coords[_id(entry[0])] = (float(entry[1]), float(entry[2]))
        else:
            coords[_id(entry)] = None
    edges = []
    for e in net["edges"]:
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise InputError(f"malformed edge {e!r}")
        u, v = _id(e[0]), _id(e[1])
        edges.append((u, v, float(e[2]) if len(e) == 3 else 1.0))
        coords.setdefault(u, None)
        coords.setdefault(v, None)
    sink = _id(net.get("sink", 0))
    coords.setdefault(sink, None)
    return Topology(coords, edges, sink, field_size)


def _id(value) -> Id:
    return parse_id(str(value))


def _fraction(value) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"not a fraction: {value!r}") from None


def parse_scenario(text: str, source: str = "<scenario>", base_dir: Path | None = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{source}: {exc}") from None
    known = {"seed", "field", "network", "simulation", "tasks", "generate_tasks", "sweep"}
    unknown = set(doc) - known
    if unknown:
        raise InputError(f"{source}: unknown section(s) {', '.join(sorted(unknown))}")
    sim = dict(doc.get("simulation", {}))
    field_doc = doc.get("field", {})
    net = dict(doc.get("network", {}))
    if net.get("kind", "explicit") not in NETWORK_KINDS:
        raise InputError(f"{source}: network kind must be one of {', '.join(NETWORK_KINDS)}")
    kwargs: dict[str, Any] = {}
    try:
        for key, conv in _SIM_KEYS.items():
            if key in sim:
                kwargs[key] = conv(sim.pop(key))
        if "duplication_threshold" in sim:
            kwargs["duplication_threshold"] = _fraction(sim.pop("duplication_threshold"))
        for key in ("failed_nodes", "faulty_nodes"):
            if key in sim:
                kwargs[key] = tuple(_id(n) for n in sim.pop(key))
        if sim:
            raise InputError(f"unknown simulation key(s) {', '.join(sorted(sim))}")
        kwargs["field_size"] = (float(field_doc.get("width", 100.0)), float(field_doc.get("height", 100.0)))
        kwargs["seed"] = int(doc.get("seed", 0))
        if "n_routers" in net:
            kwargs["n_routers"] = int(net["n_routers"])
        gen = doc.get("generate_tasks")
        if gen and "m_agents" in gen:
            kwargs["m_agents"] = int(gen["m_agents"])
        config = SimulationConfig(**kwargs)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from None

    tasks = None
    if "tasks" in doc:
        tasks = {}
        for agent, targets in doc["tasks"].items():
            if not isinstance(targets, list):
                raise InputError(f"{source}: tasks.{agent} must be a list of node ids")
            tasks[_id(agent)] = frozenset(_id(t) for t in targets)
        if not tasks:
            raise InputError(f"{source}: [tasks] is empty")
    sweep = {}
    for key, values in doc.get("sweep", {}).items():
        if key not in ("aggregation_ratio", "code_size", "n_routers"):
            raise InputError(f"{source}: cannot sweep over {key!r}")
        if not isinstance(values, list) or not values:
            raise InputError(f"{source}: sweep.{key} must be a non-empty list")
        sweep[key] = values
    scenario = Scenario(config, net, tasks, doc.get("generate_tasks"), sweep, base_dir or Path("."))
    if net.get("kind", "explicit") in ("explicit", "file"):
        topo = scenario.topology()
        scenario.config = replace(config, n_routers=max(1, len(topo) - 1))
    return scenario


def read_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, str(path), path.parent)


def describe_tasks(tasks: dict) -> list[str]:
    return [f"task.{a}={','.join(str(n) for n in sorted_ids(ts))}" for a, ts in tasks.items()]
