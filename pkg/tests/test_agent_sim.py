import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentcells.agent_sim import (
    SimulationConfig,
    Sink,
    compare,
    dispatch_round,
    filter_reading,
    node_states,
    run_client_server,
    run_mobile_agent,
    simulate,
    star_sweep,
)
from agentcells.cells import build_incidence_matrix
from agentcells.errors import InfeasibleError, InputError
from agentcells.routing import Topology, dijkstra, line_topology, star_topology
from oracles import star_trace

SMALL_TASKS = {"A": {1, 2, 4}, "B": {1, 3}, "C": {1, 3, 5}, "D": {1, 2, 4}, "E": {3, 4, 5}}
SMALL_NET = Topology(range(6), [(0, 1, 1), (1, 2, 1), (1, 3, 1), (2, 4, 1), (3, 5, 1), (4, 5, 1)], 0)


def cfg(**kw):
    return SimulationConfig(**kw)


def test_line_example_byte_hops():
    # s=0, a=1, b=2; legs s->a (code), a->b (payload 50 + code), b->s over 2 hops
    report = run_mobile_agent(cfg(aggregation_ratio=0.5, code_size=50, raw_payload_size=100), line_topology(3), {"A": {1, 2}})
    legs = [(leg.origin, leg.dest, leg.hops, leg.payload, leg.code) for leg in report.legs]
    assert legs == [(0, 1, 1, 0, 50), (1, 2, 1, 50, 50), (2, 0, 2, 100, 0)]
    assert report.bytes_mobile_agent == 50 + 100 + 2 * 100
    assert report.discarded_total == 0


def test_second_round_carries_no_code():
    report = run_mobile_agent(cfg(aggregation_ratio=0.5, code_size=50, rounds=2), line_topology(3), {"A": {1, 2}})
    assert report.per_round[1].ma_code_bytes == 0
    assert report.per_round[1].ma_bytes == 50 + 100 * 2
    assert report.bytes_mobile_agent == 600


def test_client_server_hop_weighted_sum():
    report = run_client_server(cfg(raw_payload_size=100), line_topology(4), {"A": {1, 2, 3}})
    assert report.bytes_client_server == 100 * 1 + 100 * 2 + 100 * 3 == 600


def test_client_server_zero_rounds():
    report = run_client_server(cfg(rounds=0), line_topology(4), {"A": {1, 2, 3}})
    assert report.bytes_client_server == 0 and report.per_round == []


def test_single_neighbour_source():
    assert run_client_server(cfg(), star_topology(3), {"A": {2}}).bytes_client_server == 100


def test_no_fusion_no_code_matches_baseline_single_source():
    report = simulate(cfg(aggregation_ratio=1.0, code_size=0), line_topology(4), {"A": {3}})
    assert report.bytes_mobile_agent == report.bytes_client_server
    assert report.savings_fraction == 0


def test_overhead_regime_gives_negative_savings():
    report = simulate(cfg(aggregation_ratio=1.0, code_size=5000), line_topology(5), {"A": {1, 2, 3, 4}})
    assert report.savings_fraction < 0


def test_zero_rounds_zero_traffic():
    report = simulate(cfg(rounds=0, code_size=10), star_topology(4), {"A": {1, 2}})
    assert report.bytes_mobile_agent == 0 and report.bytes_client_server == 0
    assert report.savings_fraction is None


def test_star_trace_closed_form():
    for rho, code, rounds in [(0.001, 100, 5), (0.02, 100, 1), (0.5, 0, 3), (1.0, 400, 2)]:
        report = simulate(cfg(aggregation_ratio=rho, code_size=code, raw_payload_size=1000, rounds=rounds),
                          star_topology(20), {"A": set(range(1, 21))})
        ma, cs = star_trace(20, rho, code, 1000, rounds)
        assert report.bytes_mobile_agent == pytest.approx(ma)
        assert report.bytes_client_server == cs


def test_dispatch_small_route_tables_give_small_matrix():
    packets, tables = dispatch_round(SMALL_NET, SMALL_TASKS)
    m = build_incidence_matrix(tables, [1, 2, 3, 4, 5])
    assert m.entries.tolist() == [
        [1, 1, 1, 1, 0],
        [1, 0, 0, 1, 0],
        [0, 1, 1, 0, 1],
        [1, 0, 0, 1, 1],
        [0, 0, 1, 0, 1],
    ]
    assert [p.ma_seq_num for p in packets] == [1, 2, 3, 4, 5]
    assert all(p.sink_id == 0 and p.next_src == 0 for p in packets)


def test_single_agent_single_target():
    packets, tables = dispatch_round(line_topology(2), {"A": {1}})
    assert packets[0].ma_seq_num == 1
    assert packets[0].src_list.order == [1]
    assert tables == {"A": {1}}


def test_seq_nums_increase_across_dispatches():
    sink = Sink(0)
    first, _ = dispatch_round(line_topology(2), {"A": {1}}, sink)
    second, _ = dispatch_round(line_topology(2), {"A": {1}}, sink)
    assert (first[0].ma_seq_num, second[0].ma_seq_num) == (1, 2)


def test_dispatch_errors():
    with pytest.raises(InputError):
        dispatch_round(line_topology(2), {})
    t = Topology(range(3), [(0, 1, 1)], 0)
    with pytest.raises(InfeasibleError, match="'A'.*2"):
        dispatch_round(t, {"A": {1, 2}})


def test_filter_examples():
    assert not filter_reading(40, [30, 32], 2)
    assert filter_reading(31, [30, 32], 0)
    assert filter_reading(30, [30], 0)
    assert not filter_reading(5, [30, 32], 2)
    with pytest.raises(InputError):
        filter_reading(30, [], 1)
    with pytest.raises(InputError):
        filter_reading(30, [30], -1)


def test_faulty_node_reading_is_discarded():
    # every leaf's only neighbour is the healthy hub
    config = cfg(aggregation_ratio=0.5, faulty_nodes=(2,), rounds=3)
    report = run_mobile_agent(config, star_topology(4), {"A": {1, 2, 3, 4}})
    assert report.discarded_total == 3
    assert report.legs[-1].payload == 3 * 0.5 * 100


def test_lone_faulty_neighbour_drags_a_healthy_reading():
    # on a line, node 3 is judged only against faulty node 2
    report = run_mobile_agent(cfg(faulty_nodes=(2,)), line_topology(4), {"A": {1, 2, 3}})
    assert report.discarded_total == 2


def test_readings_are_seeded_and_smooth():
    t = star_topology(6)
    a = node_states(cfg(seed=4, rounds=3), t)
    b = node_states(cfg(seed=4, rounds=3), t)
    assert {n: s.readings for n, s in a.items()} == {n: s.readings for n, s in b.items()}
    assert {n: s.readings for n, s in a.items()} != {n: s.readings for n, s in node_states(cfg(seed=5, rounds=3), t).items()}


def test_detour_around_failed_node():
    # 0-1-2-3 with a bypass 1-4-3; node 2 fails
    t = Topology(range(5), [(0, 1, 1), (1, 2, 1), (2, 3, 1), (1, 4, 1), (4, 3, 1)], 0)
    report = run_mobile_agent(cfg(failed_nodes=(2,), code_size=10), t, {"A": {1, 2, 3}})
    assert report.skipped_failed == [(1, "A", 2)]
    assert all(leg.dest != 2 and leg.origin != 2 for leg in report.legs)
    assert [leg.dest for leg in report.legs] == [1, 3, 0]
    assert report.legs[1].hops == 2
    cs = run_client_server(cfg(failed_nodes=(2,)), t, {"A": {1, 2, 3}})
    assert cs.transmissions_total == 2


def test_detour_moves_to_live_neighbour_first():
    # failed node 3 is next after 1; its lowest live neighbour is 2
    t = Topology(range(5), [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 4, 10)], 0)
    report = run_mobile_agent(cfg(failed_nodes=(3,)), t, {"A": {1, 3, 4}})
    kinds = [(leg.dest, leg.kind) for leg in report.legs]
    assert kinds == [(1, "source"), (2, "detour"), (4, "source"), (0, "return")]


def test_no_detour_is_infeasible():
    t = Topology(range(3), [(0, 1, 1), (1, 2, 1)], 0)
    with pytest.raises(InfeasibleError):
        run_mobile_agent(cfg(failed_nodes=(1,)), t, {"A": {1, 2}})


def test_config_validation():
    for kw in [{"n_routers": 0}, {"m_agents": 0}, {"aggregation_ratio": 0}, {"aggregation_ratio": 1.5},
               {"fault_tolerance": -1}, {"rounds": -1}, {"code_size": -1}, {"raw_payload_size": 0}]:
        with pytest.raises(InputError):
            SimulationConfig(**kw)


@st.composite
def scenarios(draw):
    n = draw(st.integers(2, 9))
    edges = {}
    for v in range(1, n):
        edges[(draw(st.integers(0, v - 1)), v)] = float(draw(st.integers(1, 5)))
    t = Topology(range(n), [(u, v, w) for (u, v), w in edges.items()], 0)
    m = draw(st.integers(1, 3))
    tasks = {f"A{j}": draw(st.sets(st.integers(1, n - 1), min_size=1)) for j in range(m)}
    config = SimulationConfig(
        rounds=draw(st.integers(0, 5)),
        aggregation_ratio=draw(st.sampled_from([0.01, 0.1, 0.5, 1.0])),
        code_size=draw(st.sampled_from([0.0, 30.0, 500.0])),
        raw_payload_size=draw(st.sampled_from([10.0, 100.0])),
        seed=draw(st.integers(0, 50)),
    )
    return config, t, tasks


@given(scenarios())
def test_conservation_and_totals(s):
    config, t, tasks = s
    report = simulate(config, t, tasks)
    assert math.isclose(report.bytes_mobile_agent, math.fsum(leg.byte_hops for leg in report.legs), abs_tol=1e-6)
    for rt in report.per_round:
        legs = [leg for leg in report.legs if leg.round == rt.round]
        assert math.isclose(rt.ma_bytes, rt.ma_payload_bytes + rt.ma_code_bytes, abs_tol=1e-6)
        assert math.isclose(rt.ma_code_bytes, math.fsum(leg.code * leg.hops for leg in legs), abs_tol=1e-6)
    assert report.bytes_mobile_agent >= 0 and report.bytes_client_server >= 0
    if report.savings_fraction is not None:
        assert report.savings_fraction <= 1
    for leg in report.legs:
        assert leg.hops == dijkstra(t, leg.origin)[leg.dest].hops


@given(scenarios())
def test_code_reaches_each_node_once_per_agent(s):
    config, t, tasks = s
    report = run_mobile_agent(config, t, tasks)
    assert all(v <= config.code_size for v in report.code_delivered.values())
    if config.rounds and config.code_size:
        expected = {(a, n) for a, targets in tasks.items() for n in targets}
        assert set(report.code_delivered) == expected
    later = [leg for leg in report.legs if leg.round > 1]
    assert all(leg.code == 0 for leg in later)


@given(scenarios())
def test_deterministic(s):
    config, t, tasks = s
    a, b = simulate(config, t, tasks), simulate(config, t, tasks)
    assert a.legs == b.legs and a.per_round == b.per_round and a.code_delivered == b.code_delivered


@given(scenarios())
def test_savings_non_increasing_in_rho_without_code(s):
    config, t, tasks = s
    config = replace(config, code_size=0.0, rounds=max(1, config.rounds))
    savings = [simulate(replace(config, aggregation_ratio=r), t, tasks).savings_fraction for r in (0.01, 0.1, 0.3, 0.7, 1.0)]
    assert all(b <= a for a, b in zip(savings, savings[1:]))


def test_compare_keeps_sweep_order_and_marks_undefined():
    points = star_sweep([1.0, 0.1], [0, 100], [3], SimulationConfig(rounds=2))
    rows = compare(points)
    assert [(r.params["code_size"], r.params["aggregation_ratio"]) for r in rows] == [(0, 1.0), (0, 0.1), (100, 1.0), (100, 0.1)]
    assert compare(points, workers=2) == rows
    zero = compare(star_sweep([0.5], [0], [2], SimulationConfig(rounds=0)))
    assert zero[0].savings_fraction is None


def test_identical_totals_give_zero_savings():
    rows = compare(star_sweep([1.0], [0], [1], SimulationConfig()))
    assert rows[0].savings_fraction == 0
