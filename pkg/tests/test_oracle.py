"""Graph-reference oracle: decoding, commuting squares, and path agreement."""

import numpy as np
import pytest

from arrayneat import (ConnRow, IntegrityError, NodeRow, RngStream, add_conn,
                       add_node, decode, distance, forward, graph_distance,
                       graph_forward, init_genome, remove_conn, remove_node,
                       transform)
from arrayneat.errors import CycleDetected
from arrayneat.graphref import (GraphNetwork, graph_add_conn, graph_add_node,
                                graph_remove_conn, graph_remove_node)

from conftest import make_config, random_genome


def graphs_equal(a: GraphNetwork, b: GraphNetwork) -> bool:
    return (a.nodes == b.nodes and a.edges == b.edges
            and a.input_keys == b.input_keys and a.output_keys == b.output_keys)


class TestDecode:
    def test_fresh_counts(self):
        config = make_config(inputs=2, outputs=1, max_nodes=6, max_conns=6)
        net = decode(init_genome(config, RngStream(3).child(0, 0, 0)))
        assert len(net.nodes) == 3 and len(net.edges) == 2
        assert net.input_keys == [0, 1] and net.output_keys == [2]

    def test_dangling_conn_rejected(self):
        config = make_config()
        g = init_genome(config, RngStream(3).child(0, 0, 0))
        bad_conns = g.conns.copy()
        bad_conns[0, 1] = 33.0
        with pytest.raises(IntegrityError):
            decode(type(g)(g.nodes.copy(), bad_conns, 2, 1))

    @pytest.mark.parametrize("seed", range(6))
    def test_commuting_squares(self, seed, config):
        g = random_genome(seed, config)
        node = NodeRow(77, 0.1, 1.0, 0, 1)
        assert graphs_equal(decode(add_node(g, node)), graph_add_node(decode(g), node))
        g2 = add_node(g, node)
        conn = ConnRow(0, 77, 1.0, 0.5)
        assert graphs_equal(decode(add_conn(g2, conn)), graph_add_conn(decode(g2), conn))
        g3 = add_conn(g2, conn)
        assert graphs_equal(decode(remove_conn(g3, 0, 77)),
                            graph_remove_conn(decode(g3), 0, 77))
        assert graphs_equal(decode(remove_node(g3, 77)),
                            graph_remove_node(decode(g3), 77))


class TestGraphForward:
    def test_identity_chain_fixture(self):
        net = GraphNetwork(
            nodes={0: (0.0, 1.0, 0, 0), 1: (0.5, 1.0, 0, 0)},
            edges={(0, 1): (1.0, 2.0)},
            input_keys=[0], output_keys=[1])
        assert graph_forward(net, None, [3.0]) == [pytest.approx(6.5, abs=1e-15)]

    def test_isolated_output_bias_through_activation(self):
        net = GraphNetwork(nodes={0: (0.0, 1.0, 0, 0), 1: (0.7, 1.0, 0, 0)},
                           edges={}, input_keys=[0], output_keys=[1])
        assert graph_forward(net, None, [9.0]) == [pytest.approx(0.7, abs=1e-15)]

    def test_cycle_detected(self):
        net = GraphNetwork(
            nodes={0: (0.0, 1.0, 0, 0), 1: (0.0, 1.0, 0, 0), 2: (0.0, 1.0, 0, 0),
                   3: (0.0, 1.0, 0, 0)},
            edges={(2, 3): (1.0, 1.0), (3, 2): (1.0, 1.0), (2, 1): (1.0, 1.0)},
            input_keys=[0], output_keys=[1])
        with pytest.raises(CycleDetected):
            graph_forward(net, None, [1.0])

    def test_disabled_edges_ignored(self):
        net = GraphNetwork(nodes={0: (0.0, 1.0, 0, 0), 1: (0.5, 1.0, 0, 0)},
                           edges={(0, 1): (0.0, 2.0)},
                           input_keys=[0], output_keys=[1])
        assert graph_forward(net, None, [3.0]) == [pytest.approx(0.5, abs=1e-15)]


class TestPathAgreement:
    @pytest.mark.parametrize("seed", range(25))
    def test_forward_agreement(self, seed, config):
        g = random_genome(seed, config, n_ops=30)
        tn = transform(g)
        net = decode(g)
        rng = np.random.default_rng(seed)
        for _ in range(4):
            x = rng.normal(size=config.inputs)
            tensor_out = forward(tn, inputs=x)
            graph_out = graph_forward(net, None, list(x))
            assert np.allclose(tensor_out, graph_out, atol=1e-9, rtol=0.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_distance_agreement(self, seed, config):
        g1 = random_genome(seed, config, n_ops=25)
        g2 = random_genome(seed + 1000, config, n_ops=25)
        tensor_d = distance(g1, g2, config)
        graph_d = graph_distance(decode(g1), decode(g2), config)
        assert tensor_d == pytest.approx(graph_d, abs=1e-12)

    def test_distance_self_zero(self, config):
        g = random_genome(4, config)
        assert graph_distance(decode(g), decode(g), config) == 0.0

    def test_disjoint_gene_changes_distance_by_quantum(self, config):
        # adding one gene only to g2 moves d by compatibility_disjoint / N
        g1 = random_genome(8, config, n_ops=12)
        g2 = add_node(g1, NodeRow(55, 0.0, 1.0, 0, 1))
        n1 = decode(g1)
        n2 = decode(g2)
        genes1 = len(n1.nodes) + len(n1.edges)
        genes2 = len(n2.nodes) + len(n2.edges)
        expected = config.compatibility_disjoint * 1 / max(genes1, genes2)
        assert graph_distance(n1, n2, config) == pytest.approx(expected, abs=1e-15)
        assert distance(g1, g2, config) == pytest.approx(expected, abs=1e-12)
