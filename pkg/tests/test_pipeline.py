from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentcells.agent_sim import SimulationConfig
from agentcells.cells import Partition, grouping_efficacy
from agentcells.errors import InfeasibleError, InputError
from agentcells.pipeline import run_pipeline
from agentcells.routing import Topology
from agentcells.scenario import parse_scenario, read_scenario

LARGE_CELLS = {
    (frozenset({1, 6, 7, 11}), frozenset({2, 7, 11, 12, 20})),
    (frozenset({2, 5, 10, 13}), frozenset({5, 8, 9, 10, 13, 15})),
    (frozenset({3, 4, 8, 9}), frozenset({1, 3, 4, 6, 14, 18})),
    (frozenset({12, 14, 15}), frozenset({16, 17, 19, 21})),
}


def run(path):
    sc = read_scenario(path)
    topo = sc.topology()
    return run_pipeline(sc.config, topo, sc.build_tasks(topo))


def as_sets(cf):
    return {(frozenset(c.routers), frozenset(c.agents)) for c in cf.clusters}


def test_small_scenario(data_dir):
    res = run(data_dir / "small.toml")
    assert res.matrix.entries.tolist() == [
        [1, 1, 1, 1, 0],
        [1, 0, 0, 1, 0],
        [0, 1, 1, 0, 1],
        [1, 0, 0, 1, 1],
        [0, 0, 1, 0, 1],
    ]
    assert as_sets(res.formation) == {(frozenset({1, 3, 5}), frozenset("BCE")), (frozenset({2, 4}), frozenset("AD"))}
    assert res.visits_clustered < res.visits_unclustered


def test_single_agent_scenario(data_dir):
    res = run(data_dir / "single_agent.toml")
    assert len(res.formation.clusters) == 1
    assert res.formation.exceptional_elements == frozenset()
    assert res.visits_clustered == res.visits_unclustered == 3


def test_large_blocked_routes_give_reference_cells(data_dir):
    assert as_sets(run(data_dir / "large_blocked.toml").formation) == LARGE_CELLS


def test_large_raw_routes_beat_reference_partition(data_dir):
    res = run(data_dir / "large_raw.toml")
    reference = Partition.from_clusters(LARGE_CELLS)
    assert res.formation.efficacy >= grouping_efficacy(res.matrix, reference) == Fraction(61, 95)


def test_family_agents_collect_the_same_data(data_dir):
    res = run(data_dir / "small.toml")

    def collected(report):
        return sum(leg.payload for leg in report.legs if leg.kind == "return")

    assert collected(res.clustered) == pytest.approx(collected(res.unclustered))


def test_stage_labels():
    t = Topology(range(3), [(0, 1, 1), (1, 2, 1)], 0)
    with pytest.raises(InputError, match="stage incidence-matrix"):
        run_pipeline(SimulationConfig(), t, {"A": {0, 1}})
    broken = Topology(range(3), [(0, 1, 1)], 0)
    with pytest.raises(InfeasibleError, match="stage load-management"):
        run_pipeline(SimulationConfig(), broken, {"A": {1}})


@st.composite
def scenarios(draw):
    n = draw(st.integers(3, 8))
    edges = [(draw(st.integers(0, v - 1)), v, 1.0) for v in range(1, n)]
    t = Topology(range(n), edges, 0)
    m = draw(st.integers(1, 5))
    tasks = {f"A{j}": frozenset(draw(st.sets(st.integers(1, n - 1), min_size=1))) for j in range(m)}
    return t, tasks


@given(scenarios())
def test_route_table_fidelity(s):
    t, tasks = s
    res = run_pipeline(SimulationConfig(code_size=10, aggregation_ratio=0.2), t, tasks)
    cf = res.formation
    for agent, visits in res.route_tables.items():
        for k in cf.families_of(agent):
            assert cf.clusters[k].routers & visits
    assert res.visits_clustered <= res.visits_unclustered
    covered = set().union(*res.family_tasks.values())
    assert covered == set().union(*tasks.values())


# --- scenario files ---------------------------------------------------------------


def test_generated_tasks_are_seeded(data_dir):
    a = read_scenario(data_dir / "geometric.toml")
    b = read_scenario(data_dir / "geometric.toml")
    ta, tb = a.topology(), b.topology()
    assert ta.edges() == tb.edges()
    tasks = a.build_tasks(ta)
    assert tasks == b.build_tasks(tb)
    assert len(tasks) == 6 and all(len(t) == 5 for t in tasks.values())


def test_default_task_visits_every_router(data_dir):
    sc = parse_scenario('[network]\nkind = "star"\nn_routers = 4\n')
    assert sc.build_tasks(sc.topology()) == {"A": frozenset({1, 2, 3, 4})}


def test_sweep_grid_order(data_dir):
    sc = read_scenario(data_dir / "star.toml")
    points = sc.sweep_points()
    assert len(points) == 20
    first = [(p.params["n_routers"], p.params["code_size"], p.params["aggregation_ratio"]) for p in points[:3]]
    assert first == [(5, 0.0, 1.0), (5, 0.0, 0.5), (5, 0.0, 0.1)]


def test_explicit_tasks_cannot_sweep_router_count(data_dir):
    sc = read_scenario(data_dir / "large_raw.toml")
    with pytest.raises(InputError):
        sc.sweep_points({"n_routers": [10]})


@pytest.mark.parametrize(
    "text, message",
    [
        ("[network\n", "s.toml"),
        ("[bogus]\n", "unknown section"),
        ('[network]\nkind = "torus"\n', "network kind"),
        ("[simulation]\nwarp = 1\n", "warp"),
        ("[simulation]\naggregation_ratio = 0\n", "aggregation_ratio"),
        ('[network]\nedges = [[0, 1, 1]]\n[tasks]\nA = 1\n', "tasks.A"),
        ('[network]\nedges = [[0, 1, 1]]\n[tasks]\nA = [7]\n', None),
        ("[network]\nkind = \"explicit\"\n", "edges"),
        ('[network]\nkind = "star"\n[sweep]\nrounds = [1]\n', "rounds"),
        ('[network]\nkind = "file"\n', "file"),
    ],
)
def test_scenario_errors(text, message):
    with pytest.raises(InputError, match=message):
        sc = parse_scenario(text, "s.toml")
        sc.build_tasks(sc.topology())


def test_file_network_resolves_relative_path(tmp_path, data_dir):
    (tmp_path / "net.topo").write_text((data_dir / "line.topo").read_text())
    (tmp_path / "s.toml").write_text('[network]\nkind = "file"\nfile = "net.topo"\n')
    sc = read_scenario(tmp_path / "s.toml")
    assert len(sc.topology()) == 4 and sc.config.n_routers == 3
