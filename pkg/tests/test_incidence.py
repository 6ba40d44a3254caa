from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentcells.cells import (
    ClusterConfig,
    IncidenceMatrix,
    Partition,
    build_incidence_matrix,
    check_formation,
    cluster_matrix,
    duplicated_agents,
    exceptional_elements,
    format_matrix_csv,
    formation_from_partition,
    grouping_efficacy,
    parse_matrix_csv,
    read_matrix_csv,
    void_count,
)
from agentcells.errors import InfeasibleError, InputError
from oracles import count_structure, efficacy_by_count, max_efficacy

SMALL_TASKS = {"A": {1, 2, 4}, "B": {1, 3}, "C": {1, 3, 5}, "D": {1, 2, 4}, "E": {3, 4, 5}}
SMALL_MATRIX = [
    [1, 1, 1, 1, 0],
    [1, 0, 0, 1, 0],
    [0, 1, 1, 0, 1],
    [1, 0, 0, 1, 1],
    [0, 0, 1, 0, 1],
]
SMALL_CELLS = Partition.from_clusters([({1, 3, 5}, {"B", "C", "E"}), ({2, 4}, {"A", "D"})])
LARGE_CELLS = Partition.from_clusters(
    [
        ({1, 6, 7, 11}, {2, 7, 11, 12, 20}),
        ({2, 5, 10, 13}, {5, 8, 9, 10, 13, 15}),
        ({3, 4, 8, 9}, {1, 3, 4, 6, 14, 18}),
        ({12, 14, 15}, {16, 17, 19, 21}),
    ]
)


@pytest.fixture
def small() -> IncidenceMatrix:
    return IncidenceMatrix([1, 2, 3, 4, 5], list("ABCDE"), SMALL_MATRIX)


def labels_of(m, p):
    rows = {i: p.routers[r] for i, r in enumerate(m.routers) if r in p.routers}
    cols = {j: p.agents[a] for j, a in enumerate(m.agents) if a in p.agents}
    return rows, cols


def as_sets(cf):
    return {(frozenset(c.routers), frozenset(c.agents)) for c in cf.clusters}


def matrices(max_rows=5, max_cols=5):
    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_rows))
        m = draw(st.integers(1, max_cols))
        cells = draw(st.lists(st.integers(0, 1), min_size=n * m, max_size=n * m).filter(any))
        return IncidenceMatrix(list(range(1, n + 1)), [f"a{j}" for j in range(m)], np.array(cells).reshape(n, m))

    return build()


# --- building and parsing ---------------------------------------------------------


def test_route_tables_build_small_matrix(small):
    m = build_incidence_matrix(SMALL_TASKS, [1, 2, 3, 4, 5])
    assert m == small
    assert m.entries[0].tolist() == [1, 1, 1, 1, 0]
    assert m.entries[4].tolist() == [0, 0, 1, 0, 1]


def test_no_route_tables_gives_empty_columns():
    m = build_incidence_matrix({}, [1, 2])
    assert m.entries.shape == (2, 0)


def test_single_agent_everywhere_is_all_ones_column():
    m = build_incidence_matrix({"A": {1, 2, 3}}, [1, 2, 3])
    assert m.entries[:, 0].tolist() == [1, 1, 1]


def test_unknown_router_names_agent_and_router():
    with pytest.raises(InputError, match="'B'.*9"):
        build_incidence_matrix({"A": {1}, "B": {9}}, [1, 2])


@pytest.mark.parametrize(
    "routers, agents, entries",
    [
        ([1, 2], ["A"], [[1], [2]]),
        ([1], ["A", "B"], [[1]]),
        ([1, 1], ["A"], [[1], [0]]),
        ([1], ["A", "A"], [[1, 0]]),
    ],
)
def test_matrix_invariants_rejected(routers, agents, entries):
    with pytest.raises(InputError):
        IncidenceMatrix(routers, agents, entries)


def test_csv_round_trip(data_dir, small):
    m = read_matrix_csv(data_dir / "small.csv")
    assert m == small
    assert parse_matrix_csv(format_matrix_csv(m)) == m


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "empty"),
        ("agent,A\n1,1\n", ":1:"),
        ("router,A,B\n1,1\n", ":2:"),
        ("router,A\n1,1\n2,7\n", ":3:"),
        ("router,A\n1,1\n1,0\n", "duplicate"),
    ],
)
def test_csv_errors_carry_location(text, message):
    with pytest.raises(InputError, match=message):
        parse_matrix_csv(text, "m.csv")


# --- scoring against the counting oracle ------------------------------------------


def test_small_exceptional_elements(small):
    assert exceptional_elements(small, SMALL_CELLS) == {(1, "A"), (1, "D"), (4, "E")}


def test_small_counts_and_efficacy(small):
    rows, cols = labels_of(small, SMALL_CELLS)
    assert count_structure(SMALL_MATRIX, rows, cols) == (14, 3, 2)
    assert void_count(small, SMALL_CELLS) == 2
    assert grouping_efficacy(small, SMALL_CELLS) == Fraction(11, 16)


def test_block_diagonal_is_perfect():
    m = IncidenceMatrix([1, 2], ["A", "B"], [[1, 0], [0, 1]])
    p = Partition.from_clusters([({1}, {"A"}), ({2}, {"B"})])
    assert exceptional_elements(m, p) == frozenset()
    assert grouping_efficacy(m, p) == 1


def test_single_cluster_efficacy_is_density(small):
    p = Partition.from_clusters([({1, 2, 3, 4, 5}, set("ABCDE"))])
    assert grouping_efficacy(small, p) == Fraction(14, 25)


def test_efficacy_rejects_no_ones():
    m = IncidenceMatrix([1], ["A"], [[0]])
    with pytest.raises(InputError):
        grouping_efficacy(m, Partition({1: 0}, {"A": 0}))


def test_partition_with_unknown_id_rejected(small):
    with pytest.raises(InputError):
        exceptional_elements(small, Partition.from_clusters([({1, 2, 3, 4, 5, 6}, set("ABCDE"))]))


def test_partition_must_cover_nonzero_ids(small):
    with pytest.raises(InputError):
        exceptional_elements(small, Partition.from_clusters([({1, 2, 3}, set("ABCDE"))]))


def test_large_raw_exceptional_set_matches_count(data_dir):
    m = read_matrix_csv(data_dir / "large_raw.csv")
    rows, cols = labels_of(m, LARGE_CELLS)
    expected = {
        (m.routers[i], m.agents[j])
        for i in range(15)
        for j in range(21)
        if m.entries[i, j] and rows[i] != cols[j]
    }
    assert exceptional_elements(m, LARGE_CELLS) == expected
    assert grouping_efficacy(m, LARGE_CELLS) == efficacy_by_count(m.entries, rows, cols) == Fraction(61, 95)


def test_large_blocked_off_block_entries(data_dir):
    m = read_matrix_csv(data_dir / "large_blocked.csv")
    exc = exceptional_elements(m, LARGE_CELLS)
    assert {(1, 21), (15, 2)} <= exc


# --- duplication ------------------------------------------------------------------


def test_duplication_at_one_third(small):
    dups = duplicated_agents(small, SMALL_CELLS, Fraction(1, 3))
    assert dups["E"] == {1}
    # A and D also have one of three visits in the other cell
    assert dups == {"A": {0}, "D": {0}, "E": {1}}


def test_duplication_gain_keeps_only_improving_copies(small):
    # E's copy adds one entry and one void (12/17 > 11/16); A's adds two voids (12/18)
    assert duplicated_agents(small, SMALL_CELLS, Fraction(1, 3), gain=True) == {"E": {1}}


def test_duplication_threshold_one_duplicates_nothing(small):
    assert duplicated_agents(small, SMALL_CELLS, 1) == {}


def test_duplication_threshold_zero_reaches_every_visited_cluster():
    m = IncidenceMatrix([1, 2, 3], ["A", "B", "C"], [[1, 1, 0], [1, 0, 1], [1, 0, 0]])
    p = Partition.from_clusters([({1}, {"B"}), ({2}, {"C"}), ({3}, {"A"})])
    assert duplicated_agents(m, p, 0)["A"] == {0, 1}


def test_duplication_threshold_out_of_range(small):
    with pytest.raises(InputError):
        duplicated_agents(small, SMALL_CELLS, Fraction(3, 2))


# --- cluster_matrix ---------------------------------------------------------------


def test_small_reproduces_reference_cells(small):
    cf = cluster_matrix(small)
    assert as_sets(cf) == {(frozenset({1, 3, 5}), frozenset("BCE")), (frozenset({2, 4}), frozenset("AD"))}
    e_cluster = next(k for k, c in enumerate(cf.clusters) if 2 in c.routers)
    assert cf.duplicated_agents == {"E": {e_cluster}}
    assert cf.efficacy == Fraction(11, 16)
    assert cf.exceptional_elements == {(1, "A"), (1, "D"), (4, "E")}
    assert cf.bottleneck_routers == {1, 4}
    assert cf.exceptional_agents == {"A", "D", "E"}


def test_large_blocked_reproduces_reference_cells(data_dir):
    cf = cluster_matrix(read_matrix_csv(data_dir / "large_blocked.csv"))
    assert as_sets(cf) == {(frozenset(cell), frozenset(fam)) for cell, fam in LARGE_CELLS.as_clusters()}


def test_identity_pattern_two_singletons():
    m = IncidenceMatrix([1, 2], ["A", "B"], [[1, 0], [0, 1]])
    cf = cluster_matrix(m)
    assert as_sets(cf) == {(frozenset({1}), frozenset({"A"})), (frozenset({2}), frozenset({"B"}))}
    assert cf.exceptional_elements == frozenset()
    assert cf.efficacy == 1


def test_all_zero_matrix_rejected():
    with pytest.raises(InfeasibleError, match="no structure"):
        cluster_matrix(IncidenceMatrix([1, 2], ["A"], [[0], [0]]))


def test_empty_matrix_rejected():
    with pytest.raises(InfeasibleError):
        cluster_matrix(build_incidence_matrix({}, [1, 2]))


def test_zero_rows_and_columns_reported_as_degenerate():
    m = IncidenceMatrix([1, 2, 3], ["A", "B", "C"], [[1, 0, 0], [0, 0, 0], [1, 0, 1]])
    cf = cluster_matrix(m)
    assert cf.degenerate_routers == (2,)
    assert cf.degenerate_agents == ("B",)
    assert all(2 not in c.routers and "B" not in c.family for c in cf.clusters)


def test_requested_cluster_count(small):
    cf = cluster_matrix(small, ClusterConfig(n_clusters=3))
    assert len(cf.clusters) == 3 and cf.requested_clusters_met


def test_unreachable_cluster_count_is_flagged():
    m = IncidenceMatrix([1, 2], ["A"], [[1], [1]])
    cf = cluster_matrix(m, ClusterConfig(n_clusters=2))
    assert not cf.requested_clusters_met
    assert len(cf.clusters) == 1


def test_exhaustive_refuses_large_matrices(data_dir):
    with pytest.raises(InfeasibleError):
        cluster_matrix(read_matrix_csv(data_dir / "large_raw.csv"), ClusterConfig(mode="exhaustive"))


@pytest.mark.parametrize("kwargs", [{"mode": "fast"}, {"tau": 2}, {"n_clusters": 0}, {"max_iter": 0}])
def test_bad_config_rejected(kwargs):
    with pytest.raises(InputError):
        ClusterConfig(**kwargs)


def test_exhaustive_beats_reference_cells(small):
    cf = cluster_matrix(small, ClusterConfig(mode="exhaustive"))
    assert cf.efficacy == max_efficacy(SMALL_MATRIX) == Fraction(11, 15)


# --- properties -------------------------------------------------------------------


@given(matrices(7, 7), st.randoms(use_true_random=False))
def test_permutation_invariance(m, rnd):
    rows = list(range(len(m.routers)))
    cols = list(range(len(m.agents)))
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    a, b = cluster_matrix(m), cluster_matrix(m.permuted(rows, cols))
    assert as_sets(a) == as_sets(b)
    assert a.efficacy == b.efficacy
    assert a.duplicated_agents == b.duplicated_agents


@given(matrices(5, 5), st.randoms(use_true_random=False))
def test_permutation_invariance_exhaustive(m, rnd):
    rows = list(range(len(m.routers)))
    cols = list(range(len(m.agents)))
    rnd.shuffle(rows)
    rnd.shuffle(cols)
    config = ClusterConfig(mode="exhaustive")
    a, b = cluster_matrix(m, config), cluster_matrix(m.permuted(rows, cols), config)
    assert as_sets(a) == as_sets(b)


@given(matrices(8, 8), st.sampled_from(["dca", "exhaustive"]))
def test_formation_invariants(m, mode):
    if mode == "exhaustive" and len(m.routers) > 6:
        mode = "dca"
    cf = cluster_matrix(m, ClusterConfig(mode=mode))
    check_formation(m, cf)
    assert 0 <= cf.efficacy <= 1
    perfect = not cf.exceptional_elements and cf.voids == 0
    assert (cf.efficacy == 1) == perfect
    assert exceptional_elements(m, cf.partition) == cf.exceptional_elements
    rows, cols = labels_of(m, cf.partition)
    assert cf.efficacy == efficacy_by_count(m.entries, rows, cols)
    assert {r for r, _ in cf.exceptional_elements} == cf.bottleneck_routers
    assert {a for _, a in cf.exceptional_elements} == cf.exceptional_agents


@given(matrices(5, 5))
def test_exhaustive_matches_oracle(m):
    cf = cluster_matrix(m, ClusterConfig(mode="exhaustive"))
    assert cf.efficacy == max_efficacy(m.entries)
    assert cf.efficacy >= max_efficacy(m.entries, max_clusters=3)


@given(matrices(6, 6))
def test_dca_never_beats_exhaustive(m):
    assert cluster_matrix(m).efficacy <= cluster_matrix(m, ClusterConfig(mode="exhaustive")).efficacy


@given(matrices(6, 6), st.data())
def test_monotonicity_on_fixed_partition(m, data):
    p = cluster_matrix(m).partition
    before = grouping_efficacy(m, p)
    zeros = [(r, a) for r in m.routers for a in m.agents if not m[r, a] and r in p.routers and a in p.agents]
    if not zeros:
        return
    r, a = data.draw(st.sampled_from(zeros))
    after = grouping_efficacy(m.with_entry(r, a, 1), p)
    if p.routers[r] == p.agents[a]:
        assert after >= before
    else:
        assert after <= before


def test_formation_from_partition_orders_clusters_by_label(small):
    cf = formation_from_partition(small, SMALL_CELLS)
    assert [sorted(c.routers) for c in cf.clusters] == [[1, 3, 5], [2, 4]]
    check_formation(small, cf)


@given(matrices(7, 7), st.integers(1, 7))
def test_feasible_cluster_count_is_honoured(m, k):
    nonzero = min(int(m.entries.any(axis=1).sum()), int(m.entries.any(axis=0).sum()))
    cf = cluster_matrix(m, ClusterConfig(n_clusters=k))
    check_formation(m, cf)
    if k <= nonzero:
        assert cf.requested_clusters_met
        assert len(cf.clusters) == k
    else:
        assert not cf.requested_clusters_met
