"""Router-agent incidence matrix and its CSV form."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import InputError
from ..ids import Id, parse_id


class IncidenceMatrix:
    """Binary routers x agents matrix; ``entries[i, j] == 1`` iff agent ``j``
    needs an operation on router ``i``.

    Instances are treated as immutable: the entry array is made read-only.
    """

    __slots__ = ("routers", "agents", "entries", "_router_index", "_agent_index")

    def __init__(self, routers: Sequence[Id], agents: Sequence[Id], entries) -> None:
        routers = tuple(routers)
        agents = tuple(agents)
        arr = np.array(entries, dtype=np.int64, copy=True)
        if arr.size == 0:
            arr = arr.reshape(len(routers), len(agents))
        if arr.ndim != 2:
            raise InputError(f"incidence entries must be 2-D, got {arr.ndim}-D")
        if arr.shape != (len(routers), len(agents)):
            raise InputError(
                f"entries shape {arr.shape} does not match "
                f"{len(routers)} routers x {len(agents)} agents"
            )
        if not np.isin(arr, (0, 1)).all():
            raise InputError("incidence entries must be 0 or 1")
        for axis, ids in (("router", routers), ("agent", agents)):
            if len(set(ids)) != len(ids):
                dup = next(x for x in ids if ids.count(x) > 1)
                raise InputError(f"duplicate {axis} id {dup!r}")
        arr.setflags(write=False)
        self.routers = routers
        self.agents = agents
        self.entries = arr
        self._router_index = {r: i for i, r in enumerate(routers)}
        self._agent_index = {a: j for j, a in enumerate(agents)}

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def router_index(self, router: Id) -> int:
        try:
            return self._router_index[router]
        except KeyError:
            raise InputError(f"unknown router id {router!r}") from None

    def agent_index(self, agent: Id) -> int:
        try:
            return self._agent_index[agent]
        except KeyError:
            raise InputError(f"unknown agent id {agent!r}") from None

    def __getitem__(self, key: tuple[Id, Id]) -> int:
        router, agent = key
        return int(self.entries[self.router_index(router), self.agent_index(agent)])

    def ones(self) -> list[tuple[Id, Id]]:
        rows, cols = np.nonzero(self.entries)
        return [(self.routers[i], self.agents[j]) for i, j in zip(rows, cols)]

    def visits(self, agent: Id) -> set:
        col = self.entries[:, self.agent_index(agent)]
        return {self.routers[i] for i in np.flatnonzero(col)}

    def zero_routers(self) -> list:
        return [self.routers[i] for i in np.flatnonzero(self.entries.sum(axis=1) == 0)]

    def zero_agents(self) -> list:
        return [self.agents[j] for j in np.flatnonzero(self.entries.sum(axis=0) == 0)]

    def permuted(self, router_order: Sequence[int], agent_order: Sequence[int]) -> "IncidenceMatrix":
        """Reorder rows/columns by positional index lists."""
        return IncidenceMatrix(
            [self.routers[i] for i in router_order],
            [self.agents[j] for j in agent_order],
            self.entries[np.ix_(list(router_order), list(agent_order))],
        )

    def with_entry(self, router: Id, agent: Id, value: int) -> "IncidenceMatrix":
        arr = self.entries.copy()
        arr[self.router_index(router), self.agent_index(agent)] = value
        return IncidenceMatrix(self.routers, self.agents, arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IncidenceMatrix):
            return NotImplemented
        return (
            self.routers == other.routers
            and self.agents == other.agents
            and np.array_equal(self.entries, other.entries)
        )

    def __hash__(self) -> int:
        return hash((self.routers, self.agents, self.entries.tobytes()))

    def __repr__(self) -> str:
        return f"IncidenceMatrix({len(self.routers)} routers x {len(self.agents)} agents, {int(self.entries.sum())} ones)"

    def route_tables(self) -> dict:
        return {a: self.visits(a) for a in self.agents}


def build_incidence_matrix(
    route_tables: Mapping[Id, Iterable[Id]], all_routers: Sequence[Id]
) -> IncidenceMatrix:
    """Incidence matrix from per-agent route tables.

    Columns follow the iteration order of ``route_tables``; rows follow
    ``all_routers``.
    """
    index = {r: i for i, r in enumerate(all_routers)}
    agents = list(route_tables)
    arr = np.zeros((len(all_routers), len(agents)), dtype=np.int64)
    for j, agent in enumerate(agents):
        for router in route_tables[agent]:
            if router not in index:
                raise InputError(
                    f"route table of agent {agent!r} references unknown router {router!r}"
                )
            arr[index[router], j] = 1
    return IncidenceMatrix(all_routers, agents, arr)


def parse_matrix_csv(text: str, source: str = "<matrix>") -> IncidenceMatrix:
    """Parse ``router,<agent ids...>`` CSV. Errors carry line numbers."""
    rows = [(n, row) for n, row in enumerate(csv.reader(io.StringIO(text)), start=1) if any(c.strip() for c in row)]
    if not rows:
        raise InputError(f"{source}: empty matrix file")
    header_line, header = rows[0]
    if not header or header[0].strip().lower() != "router":
        raise InputError(f"{source}:{header_line}: header must start with 'router'")
    try:
        agents = [parse_id(c) for c in header[1:]]
    except ValueError:
        raise InputError(f"{source}:{header_line}: empty agent id in header") from None
    routers = []
    entries = []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(
                f"{source}:{line}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            routers.append(parse_id(row[0]))
        except ValueError:
            raise InputError(f"{source}:{line}: empty router id") from None
        values = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise InputError(f"{source}:{line}: entry {cell!r} is not 0 or 1")
            values.append(int(cell))
        entries.append(values)
    try:
        return IncidenceMatrix(routers, agents, np.array(entries, dtype=np.int64).reshape(len(routers), len(agents)))
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None


def read_matrix_csv(path: str | Path) -> IncidenceMatrix:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_matrix_csv(text, source=str(path))


def format_matrix_csv(m: IncidenceMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["router", *m.agents])
    for router, row in zip(m.routers, m.entries):
        writer.writerow([router, *(int(v) for v in row)])
    return out.getvalue()
