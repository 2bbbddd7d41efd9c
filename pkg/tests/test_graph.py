"""Tests for the variable-variable graph encoding."""

import numpy as np
import pytest

from satlab.cnf import CnfFormula, generate_random_3sat
from satlab.graph import (
    CLAUSE_COOCCURRENCE,
    OUTPUT,
    OUTPUT_LINK,
    SPECIAL_VARIABLE_LINK,
    dump_graph_json,
    encode_var_var,
    graph_stats,
    load_graph_json,
    negative_node,
    positive_node,
)


def edge_index(graph):
    """Map (u, v) -> edge for direct lookups in assertions."""
    return {(e.u, e.v): e for e in graph.edges}


class TestWorkedExample:
    """The three-clause formula traced by hand.

    (x1 | ~x2 | x4) & (x2 | x3) & (~x3 | x4), encoded with m_max = 3.
    Node ids: +x1..+x4 -> 0..3, ~x1..~x4 -> 4..7, output -> 8.
    """

    @pytest.fixture()
    def graph(self, worked_formula):
        return encode_var_var(worked_formula, m_max=3)

    def test_node_count(self, graph):
        assert graph.num_nodes == 9
        assert graph.output_node == 8

    def test_node_ordering(self, graph):
        kinds = [node.kind for node in graph.nodes]
        assert kinds == ["POSITIVE_LITERAL"] * 4 + ["NEGATIVE_LITERAL"] * 4 + [OUTPUT]
        assert [node.var_index for node in graph.nodes] == [1, 2, 3, 4, 1, 2, 3, 4, None]

    def test_cooccurrence_labels(self, graph):
        edges = edge_index(graph)
        # (+x1, ~x2) share clause 0 only.
        e = edges[(positive_node(1), negative_node(2, 4))]
        assert np.array_equal(graph.edge_feature(e)[:3], [1, 0, 0])
        # (+x2, +x3) share clause 1 only.
        e = edges[(positive_node(2), positive_node(3))]
        assert np.array_equal(graph.edge_feature(e)[:3], [0, 1, 0])
        # (~x3, +x4) share clause 2 only.
        e = edges[(positive_node(4), negative_node(3, 4))]
        assert np.array_equal(graph.edge_feature(e)[:3], [0, 0, 1])
        # (+x1, +x4) share clause 0 only.
        e = edges[(positive_node(1), positive_node(4))]
        assert np.array_equal(graph.edge_feature(e)[:3], [1, 0, 0])

    def test_edge_census(self, graph):
        by_kind = {}
        for e in graph.edges:
            by_kind[e.kind] = by_kind.get(e.kind, 0) + 1
        # Clause 0 has 3 literals (3 pairs), clauses 1 and 2 have 2 (1 pair each).
        assert by_kind[CLAUSE_COOCCURRENCE] == 5
        assert by_kind[SPECIAL_VARIABLE_LINK] == 4
        assert by_kind[OUTPUT_LINK] == 8

    def test_special_edges_pair_literal_nodes(self, graph):
        specials = {
            (e.u, e.v) for e in graph.edges if e.kind == SPECIAL_VARIABLE_LINK
        }
        assert specials == {(v - 1, 4 + v - 1) for v in range(1, 5)}

    def test_output_linked_to_every_literal(self, graph):
        targets = {e.u for e in graph.edges if e.kind == OUTPUT_LINK}
        assert targets == set(range(8))
        assert all(e.v == 8 for e in graph.edges if e.kind == OUTPUT_LINK)

    def test_kind_flags_appended_after_clause_slots(self, graph):
        edges = edge_index(graph)
        cooc = graph.edge_feature(edges[(positive_node(2), positive_node(3))])
        special = graph.edge_feature(edges[(positive_node(1), negative_node(1, 4))])
        output = graph.edge_feature(edges[(0, 8)])
        assert np.array_equal(cooc[3:], [1, 0, 0])
        assert np.array_equal(special, [0, 0, 0, 0, 1, 0])
        assert np.array_equal(output, [0, 0, 0, 0, 0, 1])

    def test_stats(self, graph):
        stats = graph_stats(graph)
        assert stats["num_nodes"] == 9
        assert stats["num_edges"] == 17
        assert sum(stats["degree_histogram"].values()) == 9


class TestCornerCases:
    def test_empty_formula(self):
        g = encode_var_var(CnfFormula(num_vars=2), m_max=3)
        assert g.num_nodes == 5
        kinds = [e.kind for e in g.edges]
        assert kinds.count(SPECIAL_VARIABLE_LINK) == 2
        assert kinds.count(OUTPUT_LINK) == 4
        assert kinds.count(CLAUSE_COOCCURRENCE) == 0

    def test_empty_formula_literal_degree(self):
        g = encode_var_var(CnfFormula(num_vars=2), m_max=3)
        stats = graph_stats(g)
        # Without clauses each literal node touches only its special edge.
        assert stats["literal_degree_histogram"] == {1: 4}

    def test_pair_sharing_first_and_third_of_four_clauses(self):
        f = CnfFormula(
            num_vars=3,
            clauses=((1, 2), (1, 3), (1, 2), (2, 3)),
        )
        g = encode_var_var(f, m_max=4)
        e = edge_index(g)[(positive_node(1), positive_node(2))]
        assert np.array_equal(g.edge_feature(e)[:4], [1, 0, 1, 0])

    def test_clause_count_exceeding_m_max(self, worked_formula):
        with pytest.raises(ValueError):
            encode_var_var(worked_formula, m_max=2)

    def test_edge_feature_dim(self, worked_formula):
        g = encode_var_var(worked_formula, m_max=3)
        assert g.edge_feature_dim == 6
        assert all(g.edge_feature(e).shape == (6,) for e in g.edges)

    def test_compressed_labels_use_shared_count(self):
        f = CnfFormula(num_vars=3, clauses=((1, 2), (1, 3), (1, 2), (2, 3)))
        g = encode_var_var(f, m_max=4, compress_edge_labels=True)
        assert g.edge_feature_dim == 4
        e = edge_index(g)[(positive_node(1), positive_node(2))]
        assert np.array_equal(g.edge_feature(e), [2, 1, 0, 0])

    def test_node_labels_one_hot(self, worked_formula):
        g = encode_var_var(worked_formula, m_max=3)
        labels = g.node_labels()
        assert labels.shape == (9, 3)
        assert np.array_equal(labels.sum(axis=1), np.ones(9))
        assert np.array_equal(labels[8], [0, 0, 1])
        assert np.array_equal(labels[0], [1, 0, 0])
        assert np.array_equal(labels[4], [0, 1, 0])


class TestInvariants:
    def test_canonical_orientation_and_distinct_endpoints(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 12))
            m = int(rng.integers(1, 30))
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            g = encode_var_var(f, m_max=m)
            for e in g.edges:
                assert e.u < e.v

    def test_cooccurrence_edges_have_nonempty_labels(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 12))
            m = int(rng.integers(1, 30))
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            g = encode_var_var(f, m_max=m)
            for e in g.edges:
                if e.kind == CLAUSE_COOCCURRENCE:
                    assert len(e.ones) >= 1
                else:
                    assert e.ones == ()

    def test_clause_permutation_permutes_label_slots_only(self, rng):
        for _ in range(15):
            n = int(rng.integers(3, 10))
            m = int(rng.integers(2, 15))
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            perm = rng.permutation(m)
            inv = np.argsort(perm)
            shuffled = CnfFormula(
                num_vars=n, clauses=tuple(f.clauses[p] for p in perm)
            )
            g1 = encode_var_var(f, m_max=m)
            g2 = encode_var_var(shuffled, m_max=m)
            e1, e2 = edge_index(g1), edge_index(g2)
            assert set(e1) == set(e2)
            for key, edge in e1.items():
                assert e2[key].kind == edge.kind
                assert e2[key].ones == tuple(sorted(int(inv[i]) for i in edge.ones))

    def test_variable_renaming_gives_isomorphic_graph(self, rng):
        for _ in range(15):
            n = int(rng.integers(3, 10))
            m = int(rng.integers(2, 15))
            f = generate_random_3sat(n, m, int(rng.integers(1 << 32)))
            perm = rng.permutation(n) + 1  # perm[v-1] is the new name of v
            renamed = CnfFormula(
                num_vars=n,
                clauses=tuple(
                    tuple(int(np.sign(lit)) * int(perm[abs(lit) - 1]) for lit in cl)
                    for cl in f.clauses
                ),
            )
            node_map = {positive_node(v): positive_node(int(perm[v - 1])) for v in range(1, n + 1)}
            node_map.update(
                {negative_node(v, n): negative_node(int(perm[v - 1]), n) for v in range(1, n + 1)}
            )
            node_map[2 * n] = 2 * n
            g1 = encode_var_var(f, m_max=m)
            g2 = encode_var_var(renamed, m_max=m)
            mapped = {
                (min(node_map[e.u], node_map[e.v]), max(node_map[e.u], node_map[e.v]), e.kind, e.ones)
                for e in g1.edges
            }
            actual = {(e.u, e.v, e.kind, e.ones) for e in g2.edges}
            assert mapped == actual

    def test_distinct_cooccurrence_structures_differ(self):
        f1 = CnfFormula(num_vars=3, clauses=((1, 2), (2, 3)))
        f2 = CnfFormula(num_vars=3, clauses=((1, 2), (1, 3)))
        g1 = encode_var_var(f1, m_max=2)
        g2 = encode_var_var(f2, m_max=2)
        assert set(edge_index(g1)) != set(edge_index(g2))

    def test_duplicate_clauses_set_multiple_slots(self):
        f = CnfFormula(num_vars=2, clauses=((1, 2), (1, 2)))
        g = encode_var_var(f, m_max=2)
        e = edge_index(g)[(positive_node(1), positive_node(2))]
        assert e.ones == (0, 1)


class TestJsonDump:
    def test_round_trip(self, worked_formula):
        g = encode_var_var(worked_formula, m_max=3)
        loaded = load_graph_json(dump_graph_json(g))
        assert loaded == g

    def test_round_trip_compressed_flag(self, worked_formula):
        g = encode_var_var(worked_formula, m_max=3, compress_edge_labels=True)
        loaded = load_graph_json(dump_graph_json(g), compress_edge_labels=True)
        assert loaded == g

    def test_dump_is_deterministic(self, worked_formula):
        g = encode_var_var(worked_formula, m_max=3)
        assert dump_graph_json(g) == dump_graph_json(g)
