"""Graph construction, Laplacian products, and spectral bounds."""

import numpy as np
import pytest

from dfalopt import (
    Graph,
    GraphError,
    build_topology,
    laplacian_apply,
    laplacian_dense,
    laplacian_quadratic,
    load_edge_file,
    spectral_bounds,
)
from conftest import random_connected_graph


class TestBuildTopology:
    def test_star_two_nodes(self):
        g = build_topology("star", 2)
        assert g.edges == ((1, 2),)
        assert tuple(g.degrees) == (1, 1)

    def test_clique_four(self):
        g = build_topology("clique", 4)
        assert g.num_edges == 6
        assert all(d == 3 for d in g.degrees)

    def test_star_five_degrees(self):
        g = build_topology("star", 5)
        assert tuple(g.degrees) == (4, 1, 1, 1, 1)

    def test_unknown_kind(self):
        with pytest.raises(GraphError):
            build_topology("torus", 4)


class TestGraphInvariants:
    def test_degree_sum_is_twice_edges(self, rng):
        for _ in range(20):
            g = random_connected_graph(rng, int(rng.integers(2, 9)))
            assert int(g.degrees.sum()) == 2 * g.num_edges

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            Graph(3, ((1, 1), (1, 2), (2, 3)))

    def test_duplicate_edge_rejected(self):
        with pytest.raises(GraphError, match="duplicate"):
            Graph(3, ((1, 2), (1, 2), (2, 3)))

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError, match="unreachable"):
            Graph(4, ((1, 2), (3, 4)))

    def test_wrong_order_rejected(self):
        with pytest.raises(GraphError):
            Graph(3, ((2, 1), (2, 3)))


class TestLaplacianApply:
    def test_two_node_path(self):
        g = Graph(2, ((1, 2),))
        out = laplacian_apply(g, np.array([[1.0], [0.0]]))
        assert np.allclose(out, [[1.0], [-1.0]])

    def test_consensus_null_space(self, rng):
        g = random_connected_graph(rng, 6)
        x = np.tile(rng.standard_normal(3), (6, 1))
        assert np.allclose(laplacian_apply(g, x), 0.0, atol=1e-14)

    def test_star_three(self):
        g = build_topology("star", 3)
        out = laplacian_apply(g, np.array([[1.0], [2.0], [3.0]]))
        assert np.allclose(out, [[-3.0], [1.0], [2.0]])

    def test_block_count_mismatch(self):
        g = Graph(2, ((1, 2),))
        with pytest.raises(ValueError):
            laplacian_apply(g, np.zeros((3, 2)))

    def test_matches_dense_kronecker(self, rng):
        for _ in range(100):
            N = int(rng.integers(2, 9))
            n = int(rng.integers(1, 4))
            g = random_connected_graph(rng, N)
            x = rng.standard_normal((N, n))
            dense = np.kron(laplacian_dense(g), np.eye(n))
            expect = (dense @ x.ravel()).reshape(N, n)
            assert np.allclose(laplacian_apply(g, x), expect, atol=1e-12)


class TestLaplacianQuadratic:
    def test_consensus_zero(self, rng):
        g = random_connected_graph(rng, 5)
        x = np.tile(rng.standard_normal(2), (5, 1))
        assert laplacian_quadratic(g, x) == pytest.approx(0.0, abs=1e-14)

    def test_two_node_path(self):
        g = Graph(2, ((1, 2),))
        assert laplacian_quadratic(g, np.array([[1.0], [0.0]])) == pytest.approx(1.0)

    def test_clique_three(self):
        g = build_topology("clique", 3)
        x = np.array([[1.0], [2.0], [4.0]])
        assert laplacian_quadratic(g, x) == pytest.approx(14.0)

    def test_equals_inner_product_with_apply(self, rng):
        for _ in range(50):
            N = int(rng.integers(2, 9))
            g = random_connected_graph(rng, N)
            x = rng.standard_normal((N, 3))
            quad = laplacian_quadratic(g, x)
            inner = float(np.sum(x * laplacian_apply(g, x)))
            assert quad == pytest.approx(inner, abs=1e-12)


class TestSpectralBounds:
    def test_two_node_path(self):
        assert spectral_bounds(Graph(2, ((1, 2),)))[0] == pytest.approx(2.0)

    def test_clique_five(self):
        psi_max, _ = spectral_bounds(build_topology("clique", 5))
        assert psi_max == pytest.approx(5.0, abs=1e-9)

    def test_star_five(self):
        psi_max, psi_second = spectral_bounds(build_topology("star", 5))
        assert psi_max == pytest.approx(5.0, abs=1e-9)
        assert psi_second == pytest.approx(1.0, abs=1e-9)

    def test_matches_dense_eigensolve(self, rng):
        for _ in range(20):
            g = random_connected_graph(rng, int(rng.integers(2, 9)))
            psi_max, psi_second = spectral_bounds(g)
            eigs = np.linalg.eigvalsh(laplacian_dense(g))
            assert psi_max == pytest.approx(eigs[-1], abs=1e-9)
            assert psi_second == pytest.approx(eigs[1], abs=1e-9)
            assert psi_second > 0

    def test_psi_max_exceeds_max_degree(self, rng):
        for _ in range(30):
            g = random_connected_graph(rng, int(rng.integers(2, 9)))
            assert spectral_bounds(g)[0] >= g.degrees.max() + 1 - 1e-9


class TestEdgeFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# a comment\n3\n1 2  # inline\n2 3\n")
        g = load_edge_file(str(path))
        assert g.num_nodes == 3
        assert g.edges == ((1, 2), (2, 3))

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3\n1 2 3\n")
        with pytest.raises(GraphError, match="malformed"):
            load_edge_file(str(path))

    def test_disconnected_file(self, tmp_path):
        path = tmp_path / "disc.txt"
        path.write_text("4\n1 2\n3 4\n")
        with pytest.raises(GraphError, match="unreachable"):
            load_edge_file(str(path))

    def test_build_topology_from_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("2\n1 2\n")
        g = build_topology("edge-file", 0, path=str(path))
        assert g.edges == ((1, 2),)
