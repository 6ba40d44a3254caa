"""Cell formation: partition routers into cells and agents into families."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from ..errors import InfeasibleError, InputError, InvariantError
from ..ids import Id, id_key, sorted_ids
from . import dca, exhaustive
from .matrix import IncidenceMatrix
from .scoring import (
    DUPLICATION_RULES,
    Cluster,
    Partition,
    duplicated_agents,
    exceptional_elements,
    grouping_efficacy,
    projections,
    void_count,
)

MODES = ("dca", "exhaustive")


@dataclass(frozen=True)
class ClusterConfig:
    mode: str = "dca"
    n_clusters: int | None = None
    tau: Fraction = Fraction(1, 3)
    max_iter: int = 100
    exhaustive_limit: int = exhaustive.DEFAULT_ROW_LIMIT
    duplication: str = "gain"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown clustering mode {self.mode!r}; choose from {', '.join(MODES)}")
        object.__setattr__(self, "tau", Fraction(self.tau))
        if not 0 <= self.tau <= 1:
            raise InputError(f"duplication threshold must lie in [0, 1], got {self.tau}")
        if self.duplication not in DUPLICATION_RULES:
            raise InputError(f"unknown duplication rule {self.duplication!r}; choose from {', '.join(DUPLICATION_RULES)}")
        if self.n_clusters is not None and self.n_clusters < 1:
            raise InputError(f"cluster count must be >= 1, got {self.n_clusters}")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")


@dataclass(frozen=True)
class CellFormation:
    clusters: tuple[Cluster, ...]
    exceptional_elements: frozenset
    bottleneck_routers: frozenset
    exceptional_agents: frozenset
    duplicated_agents: Mapping[Id, frozenset]
    efficacy: Fraction
    voids: int = 0
    degenerate_routers: tuple = ()
    degenerate_agents: tuple = ()
    requested_clusters_met: bool = True
    config: ClusterConfig = field(default_factory=ClusterConfig)

    @property
    def partition(self) -> Partition:
        return Partition.from_clusters((c.routers, c.agents) for c in self.clusters)

    def cluster_of_router(self, router: Id) -> int:
        for k, c in enumerate(self.clusters):
            if router in c.routers:
                return k
        raise KeyError(router)

    def families_of(self, agent: Id) -> set[int]:
        return {k for k, c in enumerate(self.clusters) if agent in c.family}

    def id_sets(self) -> frozenset:
        """Label-free view: the set of (cell, primary family) pairs."""
        return frozenset((c.routers, c.agents) for c in self.clusters)

    def block_order(self) -> tuple[list, list]:
        """Router and agent orders that make the clusters diagonal blocks."""
        routers = [r for c in self.clusters for r in sorted_ids(c.routers)]
        agents = [a for c in self.clusters for a in sorted_ids(c.agents)]
        return routers + list(self.degenerate_routers), agents + list(self.degenerate_agents)


def formation_from_partition(
    m: IncidenceMatrix,
    p: Partition,
    tau: Fraction | float | str = Fraction(1, 3),
    config: ClusterConfig | None = None,
    requested_clusters_met: bool = True,
) -> CellFormation:
    """Score a given partition; cluster order follows ascending labels."""
    config = config or ClusterConfig(tau=Fraction(tau))
    labels = p.labels
    index = {c: k for k, c in enumerate(labels)}
    canon = Partition({r: index[c] for r, c in p.routers.items()}, {a: index[c] for a, c in p.agents.items()})
    exc = exceptional_elements(m, canon)
    dups = duplicated_agents(m, canon, tau, gain=config.duplication == "gain")
    clusters = []
    for k in range(len(labels)):
        clusters.append(
            Cluster(
                routers=frozenset(canon.cell(k)),
                agents=frozenset(canon.family(k)),
                duplicates=frozenset(a for a, cs in dups.items() if k in cs),
            )
        )
    bottleneck, exc_agents = projections(exc)
    placed_r = set(canon.routers)
    placed_a = set(canon.agents)
    return CellFormation(
        clusters=tuple(clusters),
        exceptional_elements=exc,
        bottleneck_routers=bottleneck,
        exceptional_agents=exc_agents,
        duplicated_agents=dict(sorted(dups.items(), key=lambda kv: id_key(kv[0]))),
        efficacy=grouping_efficacy(m, canon),
        voids=void_count(m, canon),
        degenerate_routers=tuple(r for r in m.routers if r not in placed_r),
        degenerate_agents=tuple(a for a in m.agents if a not in placed_a),
        requested_clusters_met=requested_clusters_met,
        config=config,
    )


def cluster_matrix(m: IncidenceMatrix, config: ClusterConfig | None = None) -> CellFormation:
    """Group routers into cells and agents into families.

    All-zero rows and columns carry no signal; they stay out of every
    cluster and are listed in ``degenerate_routers``/``degenerate_agents``.
    """
    config = config or ClusterConfig()
    if m.entries.size == 0 or not m.entries.any():
        raise InfeasibleError("no structure to cluster: the incidence matrix has no 1-entries")
    # Work in id order so ties never depend on how the input was laid out.
    rows = sorted(np.flatnonzero(m.entries.any(axis=1)), key=lambda i: id_key(m.routers[i]))
    cols = sorted(np.flatnonzero(m.entries.any(axis=0)), key=lambda j: id_key(m.agents[j]))
    a = np.ascontiguousarray(m.entries[np.ix_(rows, cols)])

    met = True
    if config.mode == "exhaustive":
        try:
            rl, al, _ = exhaustive.cluster_exhaustive(a, config.n_clusters, config.exhaustive_limit)
        except ValueError as exc:
            raise InfeasibleError(str(exc)) from None
        rl, al = dca.relabel(a, rl, al)
    else:
        rl, al, met = dca.cluster_dca(a, config.n_clusters, config.max_iter)

    p = Partition(
        {m.routers[i]: int(c) for i, c in zip(rows, rl)},
        {m.agents[j]: int(c) for j, c in zip(cols, al)},
    )
    result = formation_from_partition(m, p, config.tau, config, met)
    check_formation(m, result)
    return result


def check_formation(m: IncidenceMatrix, cf: CellFormation) -> None:
    """Raise InvariantError if ``cf`` is not a consistent formation of ``m``."""
    nonzero_routers = set(r for r in m.routers if m.entries[m.router_index(r)].any())
    nonzero_agents = set(a for a in m.agents if m.entries[:, m.agent_index(a)].any())
    seen: set = set()
    for c in cf.clusters:
        if seen & c.routers:
            raise InvariantError("router cells overlap")
        seen |= c.routers
    if seen != nonzero_routers:
        raise InvariantError("router cells do not cover exactly the nonzero routers")
    placed = set().union(*(c.agents for c in cf.clusters)) if cf.clusters else set()
    if placed != nonzero_agents:
        raise InvariantError("primary families do not cover exactly the nonzero agents")
    p = cf.partition
    if exceptional_elements(m, p) != cf.exceptional_elements:
        raise InvariantError("stored exceptional elements differ from recomputation")
    if projections(cf.exceptional_elements) != (cf.bottleneck_routers, cf.exceptional_agents):
        raise InvariantError("bottleneck/exceptional-agent sets are not projections")
    for agent in nonzero_agents:
        if (len(cf.families_of(agent)) >= 2) != (agent in cf.duplicated_agents):
            raise InvariantError(f"duplication record of agent {agent!r} is inconsistent")
    if cf.efficacy != grouping_efficacy(m, p) or not 0 <= cf.efficacy <= 1:
        raise InvariantError("efficacy does not match the partition")
