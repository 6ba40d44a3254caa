"""Partition scoring: exceptional elements, voids, grouping efficacy and
agent duplication.

A partition maps routers to cells and agents to their primary family, both
by integer cluster label. Routers/agents whose row/column is all zero may be
left out of a partition; every other id must be covered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from ..errors import InputError
from ..ids import Id
from .matrix import IncidenceMatrix


@dataclass(frozen=True)
class Partition:
    routers: Mapping[Id, int]
    agents: Mapping[Id, int]

    @classmethod
    def from_clusters(cls, clusters: Iterable[tuple[Iterable[Id], Iterable[Id]]]) -> "Partition":
        """Build from ``[(router_cell, agent_family), ...]``; labels are list positions."""
        routers: dict = {}
        agents: dict = {}
        for c, (cell, family) in enumerate(clusters):
            for r in cell:
                if r in routers:
                    raise InputError(f"router {r!r} appears in more than one cell")
                routers[r] = c
            for a in family:
                if a in agents:
                    raise InputError(f"agent {a!r} appears in more than one primary family")
                agents[a] = c
        return cls(routers, agents)

    @property
    def labels(self) -> list[int]:
        return sorted(set(self.routers.values()) | set(self.agents.values()))

    def cell(self, label: int) -> set:
        return {r for r, c in self.routers.items() if c == label}

    def family(self, label: int) -> set:
        return {a for a, c in self.agents.items() if c == label}

    def as_clusters(self) -> list[tuple[set, set]]:
        return [(self.cell(c), self.family(c)) for c in self.labels]


def _check(m: IncidenceMatrix, p: Partition) -> None:
    for r in p.routers:
        m.router_index(r)
    for a in p.agents:
        m.agent_index(a)
    row_sums = m.entries.sum(axis=1)
    col_sums = m.entries.sum(axis=0)
    missing = [r for r, s in zip(m.routers, row_sums) if s and r not in p.routers]
    if missing:
        raise InputError(f"partition does not place routers {missing}")
    missing = [a for a, s in zip(m.agents, col_sums) if s and a not in p.agents]
    if missing:
        raise InputError(f"partition does not place agents {missing}")


def _label_vectors(m: IncidenceMatrix, p: Partition) -> tuple[np.ndarray, np.ndarray]:
    # -1 marks ids left out (all-zero rows/columns); -2 never matches -1
    rl = np.array([p.routers.get(r, -1) for r in m.routers], dtype=np.int64)
    al = np.array([p.agents.get(a, -2) for a in m.agents], dtype=np.int64)
    return rl, al


def exceptional_elements(m: IncidenceMatrix, p: Partition) -> frozenset:
    """1-entries whose router cell differs from the agent's primary family."""
    _check(m, p)
    rl, al = _label_vectors(m, p)
    outside = (m.entries == 1) & (rl[:, None] != al[None, :])
    rows, cols = np.nonzero(outside)
    return frozenset((m.routers[i], m.agents[j]) for i, j in zip(rows, cols))


def void_count(m: IncidenceMatrix, p: Partition) -> int:
    """0-entries lying inside a diagonal block."""
    _check(m, p)
    rl, al = _label_vectors(m, p)
    inside = rl[:, None] == al[None, :]
    return int(((m.entries == 0) & inside).sum())


def grouping_efficacy(m: IncidenceMatrix, p: Partition) -> Fraction:
    """``(e - e_out) / (e + e_void)`` as an exact fraction."""
    e = int(m.entries.sum())
    if e == 0:
        raise InputError("grouping efficacy is undefined for an all-zero matrix")
    e_out = len(exceptional_elements(m, p))
    return Fraction(e - e_out, e + void_count(m, p))


def majority_families(m: IncidenceMatrix, routers: Mapping[Id, int]) -> dict:
    """Primary family of each nonzero agent: the cell holding most of its
    1-entries, ties to the lower label."""
    labels = sorted(set(routers.values()))
    result = {}
    for j, agent in enumerate(m.agents):
        col = m.entries[:, j]
        if not col.any():
            continue
        counts = {c: 0 for c in labels}
        for i in np.flatnonzero(col):
            counts[routers[m.routers[i]]] += 1
        result[agent] = max(labels, key=lambda c: (counts[c], -c))
    return result


DUPLICATION_RULES = ("gain", "threshold")


def duplicated_agents(
    m: IncidenceMatrix,
    p: Partition,
    tau: Fraction | float | str = Fraction(1, 3),
    gain: bool = False,
) -> dict:
    """Extra families for each agent.

    Agent ``j`` is copied into every non-primary cluster ``c`` whose cell holds
    at least one of its visits and at least a ``tau`` fraction of them. With
    ``gain`` a copy is also required to raise the grouping efficacy when its
    in-cell entries move inside the block, each copy judged on its own
    against the primary partition.
    """
    _check(m, p)
    tau = Fraction(tau)
    if not 0 <= tau <= 1:
        raise InputError(f"duplication threshold must lie in [0, 1], got {tau}")
    labels = sorted(set(p.routers.values()))
    if gain:
        e = int(m.entries.sum())
        kept = e - len(exceptional_elements(m, p))
        denom = e + void_count(m, p)
        base = Fraction(kept, denom)
        size = {c: len(p.cell(c)) for c in labels}
    out = {}
    for j, agent in enumerate(m.agents):
        col = m.entries[:, j]
        total = int(col.sum())
        if total == 0:
            continue
        counts = dict.fromkeys(labels, 0)
        for i in np.flatnonzero(col):
            counts[p.routers[m.routers[i]]] += 1
        extra = {c for c in labels if c != p.agents[agent] and counts[c] > 0 and Fraction(counts[c], total) >= tau}
        if gain:
            extra = {c for c in extra if Fraction(kept + counts[c], denom + size[c] - counts[c]) > base}
        if extra:
            out[agent] = frozenset(extra)
    return out


@dataclass(frozen=True)
class Cluster:
    routers: frozenset
    agents: frozenset
    duplicates: frozenset = field(default_factory=frozenset)

    @property
    def family(self) -> frozenset:
        return self.agents | self.duplicates


def projections(elements: Iterable[tuple[Id, Id]]) -> tuple[frozenset, frozenset]:
    elements = list(elements)
    return frozenset(r for r, _ in elements), frozenset(a for _, a in elements)
