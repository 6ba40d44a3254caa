"""End-to-end run: dispatch, route tables, incidence matrix, cell formation
and the traffic of per-family agents against one agent per task.

After clustering, each family is served by a single agent whose tour covers
every router its primary members need: the family's cell plus the
exceptional routers of those members. Where several members need the same
router, the family agent visits it once and collects one reading per member.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .agent_sim import SimulationConfig, TrafficReport, dispatch_round, parent_agent, run_client_server, run_mobile_agent
from .cells.formation import CellFormation, ClusterConfig, cluster_matrix
from .cells.matrix import IncidenceMatrix, build_incidence_matrix
from .errors import AgentCellsError
from .ids import Id, sorted_ids
from .routing import SweepResult, Topology


@dataclass
class PipelineResult:
    topology: Topology
    tasks: dict
    route_tables: dict
    matrix: IncidenceMatrix
    formation: CellFormation
    family_tasks: dict
    family_demand: dict
    unclustered: TrafficReport
    clustered: TrafficReport
    baseline: TrafficReport
    sweep: SweepResult

    @property
    def visits_unclustered(self) -> int:
        return sum(len(t) for t in self.route_tables.values())

    @property
    def visits_clustered(self) -> int:
        return sum(len(t) for t in self.family_tasks.values())


def family_tasks(m: IncidenceMatrix, cf: CellFormation) -> tuple[dict, dict]:
    """Targets and per-router demand of one agent per cluster.

    Demand counts how many primary members need each router.
    """
    tasks: dict = {}
    demand: dict = {}
    for k, c in enumerate(cf.clusters, start=1):
        name = f"F{k}"
        counts: dict = {}
        for agent in sorted_ids(c.agents):
            for r in m.visits(agent):
                counts[r] = counts.get(r, 0) + 1
        tasks[name] = frozenset(counts)
        demand[name] = {r: counts[r] for r in sorted_ids(counts)}
    return tasks, demand


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except AgentCellsError as exc:
        raise type(exc)(f"stage {name}: {exc}") from None


def run_pipeline(
    config: SimulationConfig,
    topology: Topology,
    tasks: Mapping[Id, frozenset],
    cluster_config: ClusterConfig | None = None,
) -> PipelineResult:
    cluster_config = cluster_config or ClusterConfig(tau=config.duplication_threshold)
    sweep = _stage("load-management", parent_agent, topology)
    _, tables = _stage("dispatch", dispatch_round, topology, tasks)
    routers = [n for n in topology.nodes if n != topology.sink]
    m = _stage("incidence-matrix", build_incidence_matrix, tables, routers)
    cf = _stage("cell-formation", cluster_matrix, m, cluster_config)
    ftasks, fdemand = family_tasks(m, cf)
    unclustered = _stage("simulate-unclustered", run_mobile_agent, config, topology, tables)
    clustered = _stage("simulate-clustered", run_mobile_agent, config, topology, ftasks, fdemand)
    baseline = _stage("simulate-baseline", run_client_server, config, topology, tables)
    return PipelineResult(
        topology,
        dict(tasks),
        tables,
        m,
        cf,
        ftasks,
        fdemand,
        unclustered.merged(baseline),
        clustered.merged(baseline),
        baseline,
        sweep,
    )
