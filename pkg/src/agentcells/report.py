"""Text and machine-readable renderings of every result type.

Machine-readable outputs are line-oriented ``key=value`` documents and CSV
tables. Each one starts with the run manifest so it can be replayed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .agent_sim import SweepRow, TrafficReport, format_number
from .cells.formation import CellFormation
from .cells.matrix import IncidenceMatrix
from .criteria import FeatureClustering
from .errors import InputError
from .ids import format_ids, id_key, sorted_ids
from .routing import Itinerary, SweepResult


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    config: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__

    def lines(self) -> list[str]:
        out = [
            f"manifest.command={self.command}",
            f"manifest.version={self.version}",
            f"manifest.argv={json.dumps(self.argv)}",
        ]
        for name, path in self.inputs.items():
            out.append(f"manifest.input.{name}={path}")
            out.append(f"manifest.input.{name}.sha256={file_digest(path)}")
        for key, value in self.config.items():
            out.append(f"manifest.config.{key}={value}")
        out.append(f"manifest.outputs={','.join(self.outputs)}")
        return out


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"not a key=value line: {line!r}")
        key, value = line.split("=", 1)
        out[key] = value
    return out


def kv_document(kind: str, manifest: RunManifest, body: Iterable[str]) -> str:
    return "\n".join([f"kind={kind}", *manifest.lines(), *body]) + "\n"


def csv_with_manifest(manifest: RunManifest, rows: Iterable[str]) -> str:
    return "\n".join([*("# " + line for line in manifest.lines()), *rows]) + "\n"


# --- cell formation ---------------------------------------------------------------


def _pairs(elements) -> list[tuple]:
    return sorted(elements, key=lambda p: (id_key(p[0]), id_key(p[1])))


def formation_kv(cf: CellFormation) -> list[str]:
    lines = [f"clusters={len(cf.clusters)}"]
    for k, c in enumerate(cf.clusters, start=1):
        lines.append(f"cluster.{k}.routers={format_ids(c.routers)}")
        lines.append(f"cluster.{k}.agents={format_ids(c.agents)}")
        lines.append(f"cluster.{k}.duplicates={format_ids(c.duplicates)}")
    lines.append("exceptional=" + ",".join(f"{r}:{a}" for r, a in _pairs(cf.exceptional_elements)))
    lines.append(f"bottleneck_routers={format_ids(cf.bottleneck_routers)}")
    lines.append(f"exceptional_agents={format_ids(cf.exceptional_agents)}")
    lines.append(
        "duplicated="
        + ",".join(f"{a}:{'+'.join(str(c + 1) for c in sorted(cs))}" for a, cs in cf.duplicated_agents.items())
    )
    lines.append(f"efficacy={float(cf.efficacy):.6f}")
    lines.append(f"efficacy_exact={cf.efficacy}")
    lines.append(f"voids={cf.voids}")
    lines.append(f"degenerate_routers={format_ids(cf.degenerate_routers)}")
    lines.append(f"degenerate_agents={format_ids(cf.degenerate_agents)}")
    lines.append(f"requested_clusters_met={str(cf.requested_clusters_met).lower()}")
    return lines


def block_matrix_rows(m: IncidenceMatrix, cf: CellFormation) -> list[str]:
    """Clustered matrix: 0/1 inside diagonal blocks, only 1s outside."""
    routers, agents = cf.block_order()
    r_cluster = {}
    a_cluster = {}
    for k, c in enumerate(cf.clusters):
        r_cluster.update(dict.fromkeys(c.routers, k))
        a_cluster.update(dict.fromkeys(c.agents, k))
    rows = ["router," + ",".join(map(str, agents))]
    for r in routers:
        cells = []
        for a in agents:
            v = m[r, a]
            inside = r in r_cluster and r_cluster[r] == a_cluster.get(a)
            cells.append(str(v) if inside or v else "")
        rows.append(f"{r}," + ",".join(cells))
    return rows


def formation_text(m: IncidenceMatrix, cf: CellFormation) -> str:
    cfg = cf.config
    out = [f"Cell formation of {len(m.routers)} routers x {len(m.agents)} agents "
           f"(mode={cfg.mode}, tau={cfg.tau}, duplication={cfg.duplication}, clusters={cfg.n_clusters or 'auto'})", ""]
    rows = [("Cluster no.", "Routers cells", "Agents families")]
    for k, c in enumerate(cf.clusters, start=1):
        fam = [str(a) for a in sorted_ids(c.agents)] + [f"{a}*" for a in sorted_ids(c.duplicates)]
        rows.append((str(k), format_ids(c.routers), ",".join(fam)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    out += ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    if cf.duplicated_agents:
        out.append("(* duplicated agent)")
    out += ["", "Clustered matrix:"]
    routers, agents = cf.block_order()
    ends = set()
    pos = 0
    for c in cf.clusters:
        pos += len(c.agents)
        ends.add(pos)
    width = max(len(str(x)) for x in [*agents, "router"])
    rw = max(len(str(x)) for x in [*routers, "router"])
    for line in block_matrix_rows(m, cf):
        fields = line.split(",")
        cells = []
        for j, f in enumerate(fields[1:], start=1):
            cells.append(f.rjust(width))
            if j in ends and j < len(fields) - 1:
                cells.append("|")
        out.append(fields[0].ljust(rw) + " " + " ".join(cells).rstrip())
    out += [
        "",
        "Exceptional elements: " + (" ".join(f"({r},{a})" for r, a in _pairs(cf.exceptional_elements)) or "none"),
        "Bottleneck routers: " + (format_ids(cf.bottleneck_routers, ", ") or "none"),
        "Exceptional agents: " + (format_ids(cf.exceptional_agents, ", ") or "none"),
        "Duplicated agents: "
        + (", ".join(f"{a} -> cluster {'+'.join(str(c + 1) for c in sorted(cs))}" for a, cs in cf.duplicated_agents.items()) or "none"),
        f"Grouping efficacy: {float(cf.efficacy):.6f} ({cf.efficacy})",
    ]
    if cf.degenerate_routers or cf.degenerate_agents:
        out.append(
            "Unclustered (all-zero): routers "
            + (format_ids(cf.degenerate_routers) or "-")
            + "; agents "
            + (format_ids(cf.degenerate_agents) or "-")
        )
    if not cf.requested_clusters_met:
        out.append(f"Note: no fixed point with exactly {cfg.n_clusters} clusters; best available shown.")
    return "\n".join(out) + "\n"


# --- feature clustering -----------------------------------------------------------


def features_kv(agents: Sequence, result: FeatureClustering) -> list[str]:
    lines = [f"clusters={len(result.centers)}"]
    for k, (center, members) in enumerate(zip(result.centers, result.members), start=1):
        lines.append(f"cluster.{k}.agents={','.join(str(agents[i]) for i in members)}")
        lines.append(f"cluster.{k}.center={','.join(f'{v:.6f}' for v in center)}")
    lines.append(f"ssq={result.ssq:.6f}")
    lines.append(f"iterations={result.iterations}")
    lines.append(f"converged={str(result.converged).lower()}")
    return lines


def features_text(agents: Sequence, criteria: Sequence[str], result: FeatureClustering, weights) -> str:
    out = [f"Weighted Euclidean clustering of {len(agents)} agents on {len(criteria)} criteria",
           "weights: " + ", ".join(f"{c}={w:g}" for c, w in zip(criteria, weights)), ""]
    for k, (center, members) in enumerate(zip(result.centers, result.members), start=1):
        out.append(f"Cluster {k}: {', '.join(str(agents[i]) for i in members)}")
        out.append("  center: " + ", ".join(f"{c}={v:.6f}" for c, v in zip(criteria, center)))
    out += ["", f"Within-cluster weighted SSQ: {result.ssq:.6f}",
            f"Iterations: {result.iterations} ({'converged' if result.converged else 'iteration cap reached'})"]
    return "\n".join(out) + "\n"


# --- routing ---------------------------------------------------------------------


def itinerary_rows(it: Itinerary) -> list[str]:
    rows = ["position,node,leg_cost,cumulative"]
    total = 0.0
    for k, (n, c) in enumerate(zip(it.order, it.leg_costs), start=1):
        total += c
        rows.append(f"{k},{n},{c:.6f},{total:.6f}")
    return rows


def sweep_table_rows(sweep: SweepResult) -> list[str]:
    rows = ["from," + ",".join(map(str, sweep.nodes))]
    for i, u in enumerate(sweep.nodes):
        rows.append(f"{u}," + ",".join(f"{d:.6g}" for d in sweep.distance[i]))
    return rows


# --- traffic ----------------------------------------------------------------------

TRAFFIC_HEADER = "round,ma_byte_hops,ma_payload_byte_hops,ma_code_byte_hops,cs_byte_hops,ma_visits,cs_transmissions,discarded,savings_fraction"


def traffic_rows(report: TrafficReport) -> list[str]:
    rows = [TRAFFIC_HEADER]
    for r in report.per_round:
        sav = None if r.cs_bytes == 0 else 1.0 - r.ma_bytes / r.cs_bytes
        rows.append(
            f"{r.round},{format_number(r.ma_bytes)},{format_number(r.ma_payload_bytes)},"
            f"{format_number(r.ma_code_bytes)},{format_number(r.cs_bytes)},{r.visits},"
            f"{r.transmissions},{r.discarded},{format_number(sav)}"
        )
    rows.append(
        f"total,{format_number(report.bytes_mobile_agent)},"
        f"{format_number(sum(r.ma_payload_bytes for r in report.per_round))},"
        f"{format_number(sum(r.ma_code_bytes for r in report.per_round))},"
        f"{format_number(report.bytes_client_server)},{report.visits_total},"
        f"{report.transmissions_total},{report.discarded_total},{format_number(report.savings_fraction)}"
    )
    return rows


def traffic_kv(report: TrafficReport, prefix: str = "") -> list[str]:
    code_total = sum(report.code_delivered.values())
    return [
        f"{prefix}bytes_mobile_agent={format_number(report.bytes_mobile_agent)}",
        f"{prefix}bytes_client_server={format_number(report.bytes_client_server)}",
        f"{prefix}savings_fraction={format_number(report.savings_fraction)}",
        f"{prefix}visits_total={report.visits_total}",
        f"{prefix}transmissions_total={report.transmissions_total}",
        f"{prefix}discarded_readings={report.discarded_total}",
        f"{prefix}code_bytes_delivered={format_number(code_total)}",
        f"{prefix}code_nodes={len(report.code_delivered)}",
        f"{prefix}skipped_failed=" + ",".join(f"{r}:{a}:{n}" for r, a, n in report.skipped_failed),
    ]


def traffic_text(report: TrafficReport, title: str = "Traffic report") -> str:
    rows = [r.split(",") for r in traffic_rows(report)]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = [title, ""]
    out += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    sav = report.savings_fraction
    out += ["", "byte-hops: mobile agent " + format_number(report.bytes_mobile_agent)
            + ", client/server " + format_number(report.bytes_client_server)
            + ", savings " + ("undefined (no baseline traffic)" if sav is None else f"{sav:.6f}")]
    return "\n".join(out) + "\n"


SWEEP_HEADER = "n_routers,code_size,aggregation_ratio,ma_byte_hops,cs_byte_hops,savings_fraction"


def sweep_rows(rows: Sequence[SweepRow]) -> list[str]:
    out = [SWEEP_HEADER]
    for r in rows:
        p = r.params
        out.append(
            f"{p['n_routers']},{format_number(p['code_size'])},{p['aggregation_ratio']:g},"
            f"{format_number(r.bytes_mobile_agent)},{format_number(r.bytes_client_server)},"
            f"{format_number(r.savings_fraction)}"
        )
    return out


def config_items(obj) -> dict[str, str]:
    """Flatten a dataclass config into string values for the manifest."""
    out = {}
    for key, value in vars(obj).items():
        if isinstance(value, (tuple, list, frozenset, set)):
            value = ",".join(map(str, value))
        out[key] = str(value)
    return out


def write_outputs(out_dir: str | Path | None, files: Mapping[str, str]) -> None:
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
