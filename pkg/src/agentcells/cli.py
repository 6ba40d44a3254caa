"""Command-line interface: ``agentcells <command> ...``.

Every command prints a human report (``--format text``) or its primary
machine-readable document (``--format csv``) and, with ``--out DIR``, writes
all of its outputs there. Machine-readable files start with a run manifest;
``agentcells rerun FILE`` replays it.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 internal invariant
breach. Errors are reported on one stderr line:
``error code=<name> exit=<n>: <message>``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import click

from . import __version__
from .agent_sim import compare, simulate
from .cells.formation import MODES, ClusterConfig, cluster_matrix
from .cells.scoring import DUPLICATION_RULES
from .cells.matrix import format_matrix_csv, read_matrix_csv
from .criteria import cluster_features, parse_weights, read_features_csv
from .errors import AgentCellsError, InputError
from .ids import format_ids, parse_id
from .pipeline import run_pipeline
from .report import (
    RunManifest,
    block_matrix_rows,
    config_items,
    csv_with_manifest,
    features_kv,
    features_text,
    file_digest,
    formation_kv,
    formation_text,
    itinerary_rows,
    kv_document,
    sweep_rows,
    sweep_table_rows,
    traffic_kv,
    traffic_rows,
    traffic_text,
    write_outputs,
)
from .routing import lcf_itinerary, load_management_sweep, read_topology
from .scenario import describe_tasks, read_scenario

DEFAULT_SEED = 0


def _fail(code: str, exit_code: int, message: str) -> None:
    text = " ".join(str(message).split())
    click.echo(f"error code={code} exit={exit_code}: {text}", err=True)
    sys.exit(exit_code)


class AppGroup(click.Group):
    """Maps every failure onto the single-line error format and exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except AgentCellsError as exc:
            _fail(exc.code, exc.exit_code, exc)
        except click.UsageError as exc:
            _fail("usage", 2, exc.format_message())
        except click.ClickException as exc:
            _fail("input", 2, exc.format_message())
        except click.Abort:
            _fail("aborted", 2, "aborted")
        except Exception as exc:  # a bug, not a user error
            _fail("internal", 4, f"{type(exc).__name__}: {exc}")
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else 0)


def _canonical_argv(ctx: click.Context) -> list[str]:
    """The command line with every option materialised, minus ``--out`` and
    ``--format`` (neither changes the machine-readable outputs)."""
    argv = [ctx.command.name]
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if isinstance(param, click.Argument):
            argv.append(str(value))
    for param in ctx.command.params:
        if not isinstance(param, click.Option) or param.name in ("out", "fmt"):
            continue
        value = ctx.params.get(param.name)
        flag = max(param.opts, key=len)
        if param.is_flag:
            if value:
                argv.append(flag)
        elif param.multiple:
            for v in value:
                argv += [flag, str(v)]
        elif value is not None:
            argv += [flag, str(value)]
    return argv


def _emit(ctx, fmt: str, out: str | None, text: str, files: dict[str, str], primary: str, manifest: RunManifest) -> None:
    report = text + "\n" + "\n".join(manifest.lines()) + "\n"
    write_outputs(out, {**files, "report.txt": report})
    click.echo(text if fmt == "text" else files[primary], nl=False)


def _manifest(ctx, inputs: dict[str, str], config: dict[str, str], outputs: list[str]) -> RunManifest:
    return RunManifest(ctx.command.name, _canonical_argv(ctx), inputs, config, [*outputs, "report.txt"])


def _fraction(ctx, param, value):
    if value is None:
        return None
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"not a fraction: {value!r}") from None


def shared_options(fn):
    fn = click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True,
                      help="Human report or machine-readable document on stdout.")(fn)
    fn = click.option("--seed", type=int, default=None, help=f"Random seed (default {DEFAULT_SEED} or the scenario's).")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for all outputs.")(fn)
    return fn


def cluster_options(fn):
    fn = click.option("--clusters", type=click.IntRange(min=1), default=None, help="Requested cluster count.")(fn)
    fn = click.option("--mode", type=click.Choice(MODES), default="dca", show_default=True)(fn)
    fn = click.option("--tau", callback=_fraction, default="1/3", show_default=True,
                      help="Duplication threshold, e.g. 1/3 or 0.25.")(fn)
    fn = click.option("--duplication", type=click.Choice(DUPLICATION_RULES), default="gain", show_default=True,
                      help="'gain' keeps only copies that raise efficacy; 'threshold' keeps every copy above tau.")(fn)
    return fn


@click.group(cls=AppGroup)
@click.version_option(__version__, prog_name="agentcells")
def cli() -> None:
    """Cluster agents and routers, plan itineraries and simulate traffic."""


@cli.command("cluster-matrix")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@cluster_options
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@shared_options
@click.pass_context
def cluster_matrix_cmd(ctx, matrix, tau, duplication, mode, clusters, max_iter, out, seed, fmt):
    """Partition an incidence matrix CSV into router cells and agent families."""
    ctx.params["seed"] = DEFAULT_SEED if seed is None else seed
    m = read_matrix_csv(matrix)
    config = ClusterConfig(mode=mode, n_clusters=clusters, tau=tau, max_iter=max_iter, duplication=duplication)
    cf = cluster_matrix(m, config)
    files = ["formation.kv", "block_matrix.csv"]
    manifest = _manifest(ctx, {"matrix": matrix}, config_items(config), files)
    docs = {
        "formation.kv": kv_document("cell-formation", manifest, formation_kv(cf)),
        "block_matrix.csv": csv_with_manifest(manifest, block_matrix_rows(m, cf)),
    }
    _emit(ctx, fmt, out, formation_text(m, cf), docs, "formation.kv", manifest)


@cli.command("cluster-features")
@click.argument("features", type=click.Path(exists=True, dir_okay=False))
@click.option("--clusters", type=click.IntRange(min=1), required=True, help="Number of clusters.")
@click.option("--weights", default=None, help="Comma-separated criterion weights (default all 1).")
@click.option("--weights-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="One-line CSV of criterion weights.")
@click.option("--max-iter", type=click.IntRange(min=1), default=100, show_default=True)
@shared_options
@click.pass_context
def cluster_features_cmd(ctx, features, clusters, weights, weights_file, max_iter, out, seed, fmt):
    """Weighted Euclidean clustering of agents described by feature vectors."""
    ctx.params["seed"] = DEFAULT_SEED if seed is None else seed
    table = read_features_csv(features)
    if weights and weights_file:
        raise InputError("give --weights or --weights-file, not both")
    inputs = {"features": features}
    if weights_file:
        k = parse_weights(Path(weights_file).read_text())
        inputs["weights"] = weights_file
    elif weights:
        k = parse_weights(weights)
    else:
        k = tuple(1.0 for _ in table.criteria)
    if len(k) != len(table.criteria):
        raise InputError(f"{len(k)} weights given for {len(table.criteria)} criteria")
    ctx.params["weights"] = None if weights_file else ",".join(f"{w:g}" for w in k)
    result = cluster_features(table.values, clusters, k, max_iter)
    config = {"clusters": str(clusters), "weights": ",".join(f"{w:g}" for w in k), "max_iter": str(max_iter)}
    files = ["features.kv", "assignment.csv"]
    manifest = _manifest(ctx, inputs, config, files)
    assignment = ["agent,cluster"] + [f"{a},{r + 1}" for a, r in zip(table.agents, result.assignment)]
    docs = {
        "features.kv": kv_document("feature-clustering", manifest, features_kv(table.agents, result)),
        "assignment.csv": csv_with_manifest(manifest, assignment),
    }
    _emit(ctx, fmt, out, features_text(table.agents, table.criteria, result, k), docs, "features.kv", manifest)


def _id_list(text: str | None):
    if text is None:
        return None
    return [parse_id(t.strip()) for t in text.split(",") if t.strip()]


@cli.command("plan")
@click.argument("topology", type=click.Path(exists=True, dir_okay=False))
@click.option("--start", default=None, help="Start node (default: the sink).")
@click.option("--targets", default=None, help="Comma-separated targets (default: every other node).")
@click.option("--all-pairs", is_flag=True, help="Also run the load-management sweep and emit all-pairs distances.")
@shared_options
@click.pass_context
def plan_cmd(ctx, topology, start, targets, all_pairs, out, seed, fmt):
    """LCF itinerary over a topology file."""
    ctx.params["seed"] = DEFAULT_SEED if seed is None else seed
    topo = read_topology(topology)
    origin = topo.sink if start is None else parse_id(start)
    ctx.params["start"] = str(origin)
    goal = _id_list(targets)
    if goal is None:
        goal = [n for n in topo.nodes if n != origin]
    ctx.params["targets"] = format_ids(goal)
    it = lcf_itinerary(topo, origin, goal)
    files = ["plan.kv", "itinerary.csv"]
    body = [
        f"start={origin}",
        f"order={','.join(map(str, it.order))}",
        f"next_index={it.next_index}",
        f"total_cost={it.total_cost:.6f}",
    ]
    text = [f"LCF itinerary from {origin} over {len(it.order)} targets", ""]
    text += ["  ".join(r.split(",")) for r in itinerary_rows(it)]
    text += ["", f"Total cost: {it.total_cost:.6f}"]
    sweep = None
    if all_pairs:
        sweep = load_management_sweep(topo)
        files.append("distances.csv")
        body.append(f"sweep_order={','.join(map(str, sweep.itinerary.order))}")
        body.append(f"sweep_cost={sweep.itinerary.total_cost:.6f}")
        text += ["", "Load-management sweep order: " + " ".join(map(str, [topo.sink, *sweep.itinerary.order])),
                 "", "All-pairs shortest-path distances:"]
        text += ["  ".join(r.split(",")) for r in sweep_table_rows(sweep)]
    manifest = _manifest(ctx, {"topology": topology}, {"start": str(origin), "targets": format_ids(goal)}, files)
    docs = {
        "plan.kv": kv_document("itinerary", manifest, body),
        "itinerary.csv": csv_with_manifest(manifest, itinerary_rows(it)),
    }
    if sweep is not None:
        docs["distances.csv"] = csv_with_manifest(manifest, sweep_table_rows(sweep))
    _emit(ctx, fmt, out, "\n".join(text) + "\n", docs, "plan.kv", manifest)


def _scenario(path: str, seed: int | None, ctx):
    sc = read_scenario(path)
    if seed is not None:
        sc.config = replace(sc.config, seed=seed)
    ctx.params["seed"] = sc.config.seed
    return sc


@cli.command("simulate")
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--rounds", type=click.IntRange(min=0), default=None, help="Override the scenario's round count.")
@click.option("--sweep", is_flag=True, help="Also emit the savings table over the sweep grid.")
@click.option("--rho", type=float, multiple=True, help="Aggregation ratio grid value (repeatable).")
@click.option("--code-size", type=float, multiple=True, help="Code size grid value (repeatable).")
@click.option("--n-routers", type=int, multiple=True, help="Router count grid value (repeatable).")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Processes for sweep points.")
@shared_options
@click.pass_context
def simulate_cmd(ctx, scenario, rounds, sweep, rho, code_size, n_routers, workers, out, seed, fmt):
    """Mobile-agent versus client/server traffic for a scenario."""
    sc = _scenario(scenario, seed, ctx)
    if rounds is not None:
        sc.config = replace(sc.config, rounds=rounds)
    ctx.params["rounds"] = sc.config.rounds
    if (rho or code_size or n_routers) and not sweep:
        raise InputError("--rho/--code-size/--n-routers define a sweep grid; add --sweep")
    topo = sc.topology()
    tasks = sc.build_tasks(topo)
    report = simulate(sc.config, topo, tasks)
    files = ["traffic.kv", "traffic.csv"]
    rows = None
    if sweep:
        points = sc.sweep_points({"aggregation_ratio": list(rho), "code_size": list(code_size), "n_routers": list(n_routers)})
        rows = compare(points, workers)
        files.append("sweep.csv")
    config = config_items(sc.config)
    manifest = _manifest(ctx, {"scenario": scenario}, config, files)
    body = [f"nodes={len(topo)}", f"sink={topo.sink}", *describe_tasks(tasks), *traffic_kv(report)]
    docs = {
        "traffic.kv": kv_document("traffic", manifest, body),
        "traffic.csv": csv_with_manifest(manifest, traffic_rows(report)),
    }
    text = traffic_text(report, f"Traffic over {sc.config.rounds} round(s), {len(tasks)} agent(s), {len(topo)} nodes")
    if rows is not None:
        docs["sweep.csv"] = csv_with_manifest(manifest, sweep_rows(rows))
        table = [r.split(",") for r in sweep_rows(rows)]
        widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
        text += "\nSavings sweep:\n" + "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in table) + "\n"
    _emit(ctx, fmt, out, text, docs, "traffic.kv", manifest)


@cli.command("pipeline")
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@cluster_options
@shared_options
@click.pass_context
def pipeline_cmd(ctx, scenario, tau, duplication, mode, clusters, out, seed, fmt):
    """Dispatch, route tables, incidence matrix, cell formation and traffic."""
    sc = _scenario(scenario, seed, ctx)
    topo = sc.topology()
    tasks = sc.build_tasks(topo)
    cconf = ClusterConfig(mode=mode, n_clusters=clusters, tau=tau, duplication=duplication)
    res = run_pipeline(sc.config, topo, tasks, cconf)
    files = ["pipeline.kv", "matrix.csv", "block_matrix.csv", "traffic_unclustered.csv", "traffic_clustered.csv"]
    config = {**config_items(sc.config), **{f"cluster.{k}": v for k, v in config_items(cconf).items()}}
    manifest = _manifest(ctx, {"scenario": scenario}, config, files)
    body = [f"nodes={len(topo)}", f"sink={topo.sink}", *describe_tasks(tasks)]
    body += [f"route_table.{a}={format_ids(t)}" for a, t in res.route_tables.items()]
    body += [f"cells.{line}" for line in formation_kv(res.formation)]
    body += [f"family_task.{f}={format_ids(t)}" for f, t in res.family_tasks.items()]
    body += [f"visits_per_round.unclustered={res.visits_unclustered}",
             f"visits_per_round.clustered={res.visits_clustered}"]
    body += traffic_kv(res.unclustered, "unclustered.") + traffic_kv(res.clustered, "clustered.")
    docs = {
        "pipeline.kv": kv_document("pipeline", manifest, body),
        "matrix.csv": csv_with_manifest(manifest, format_matrix_csv(res.matrix).splitlines()),
        "block_matrix.csv": csv_with_manifest(manifest, block_matrix_rows(res.matrix, res.formation)),
        "traffic_unclustered.csv": csv_with_manifest(manifest, traffic_rows(res.unclustered)),
        "traffic_clustered.csv": csv_with_manifest(manifest, traffic_rows(res.clustered)),
    }
    text = [f"Pipeline over {len(topo)} nodes (sink {topo.sink}), {len(tasks)} agent(s)", "",
            "Load-management sweep order: " + " ".join(map(str, [topo.sink, *res.sweep.itinerary.order])), "",
            "Route tables:"]
    text += [f"  {a}: {format_ids(t, ' ')}" for a, t in res.route_tables.items()]
    text += ["", "Incidence matrix:"] + ["  " + line for line in format_matrix_csv(res.matrix).splitlines()]
    text += ["", formation_text(res.matrix, res.formation).rstrip(), "", "Family agents:"]
    text += [f"  {f}: {format_ids(t, ' ')}" for f, t in res.family_tasks.items()]
    text += ["", f"Router visits per round: {res.visits_unclustered} with one agent per task, "
                 f"{res.visits_clustered} with one agent per family", ""]
    text.append(traffic_text(res.unclustered, "Traffic, one agent per task").rstrip())
    text += ["", traffic_text(res.clustered, "Traffic, one agent per family").rstrip()]
    _emit(ctx, fmt, out, "\n".join(text) + "\n", docs, "pipeline.kv", manifest)


@cli.command("rerun")
@click.argument("manifest_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for the replayed outputs.")
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="csv", show_default=True)
def rerun_cmd(manifest_file, out, fmt):
    """Replay the run recorded in an output file's manifest."""
    fields = {}
    for line in Path(manifest_file).read_text().splitlines():
        line = line.removeprefix("# ")
        if line.startswith("manifest.") and "=" in line:
            key, value = line.split("=", 1)
            fields[key] = value
    if "manifest.argv" not in fields:
        raise InputError(f"{manifest_file}: no run manifest found")
    argv = json.loads(fields["manifest.argv"])
    for key, value in fields.items():
        if key.startswith("manifest.input.") and key.endswith(".sha256"):
            path = fields[key.removesuffix(".sha256")]
            if file_digest(path) != value:
                raise InputError(f"input {path} changed since the manifest was written")
    argv += ["--format", fmt]
    if out is not None:
        argv += ["--out", out]
    cli.main(argv, prog_name="agentcells", standalone_mode=False)


def main(argv=None) -> None:
    cli.main(argv, prog_name="agentcells")


if __name__ == "__main__":
    main()
