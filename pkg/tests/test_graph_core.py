import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gclab.errors import DegenerateDegreeError, InvalidInputError, UnreachableError
from gclab.graph_core import (
    Graph,
    cartesian_product,
    geodesic,
    geodesic_matrix,
    knn_graph,
    shift_matrices,
)

from _support import path_graph, random_connected_graph


def edge_set(g):
    return {(i, j) for i, j, _ in g.edges}


class TestKnn:
    def test_three_points_on_a_line(self):
        g = knn_graph(np.array([[0.0], [1.0], [10.0]]), 1)
        assert edge_set(g) == {(0, 1), (1, 2)}

    def test_two_points(self):
        g = knn_graph([[0.0], [1.0]], 1)
        assert edge_set(g) == {(0, 1)}

    def test_weather_sized_graph(self):
        rng = np.random.default_rng(3)
        g = knn_graph(rng.uniform(0, 50, (32, 2)), 5)
        assert g.order == 32
        # union symmetrization: every vertex keeps at least its own k choices
        assert (np.count_nonzero(g.weights, axis=1) >= 5).all()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((15, 3))
        k = 4
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        expected = set()
        for i in range(15):
            order = sorted((d[i, j], j) for j in range(15) if j != i)
            for _, j in order[:k]:
                expected.add((min(i, j), max(i, j)))
        assert edge_set(knn_graph(pts, k)) == expected

    def test_ties_prefer_lower_index(self):
        # vertex 1 is equidistant from 0 and 2
        g = knn_graph([[0.0], [1.0], [2.0]], 1)
        assert (0, 1) in edge_set(g)
        assert g.weights[1, 0] == 1

    @pytest.mark.parametrize(
        "coords,k",
        [([[0.0]], 1), ([[0.0], [1.0]], 0), ([[0.0], [1.0]], 2), ([[0.0], [0.0], [1.0]], 1)],
    )
    def test_rejects_bad_input(self, coords, k):
        with pytest.raises(InvalidInputError):
            knn_graph(coords, k)

    def test_gaussian_weights(self):
        g = knn_graph([[0.0], [1.0], [3.0]], 1, weighting="gaussian", sigma=2.0)
        np.testing.assert_allclose(g.weights[0, 1], np.exp(-1 / 4))
        np.testing.assert_allclose(g.weights[1, 2], np.exp(-4 / 4))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    @settings(max_examples=30, deadline=None)
    @given(st.integers(4, 14), st.integers(1, 3), st.integers(0, 10**6))
    def test_permutation_invariance(self, n, k, seed):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((n, 2))
        perm = rng.permutation(n)
        g1 = knn_graph(pts, k)
        g2 = knn_graph(pts[perm], k)
        relabeled = {tuple(sorted((perm[i], perm[j]))) for i, j in edge_set(g2)}
        assert relabeled == edge_set(g1)


class TestShifts:
    def test_two_vertex(self):
        g = Graph.from_edges(2, [(0, 1)])
        L, Lsym = (s.entries for s in shift_matrices(g, ["laplacian", "sym_normalized_laplacian"]))
        np.testing.assert_array_equal(L, [[1, -1], [-1, 1]])
        np.testing.assert_array_equal(Lsym, [[1, -1], [-1, 1]])

    def test_path3_laplacian(self):
        L = path_graph(3).laplacian()
        np.testing.assert_array_equal(L, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_sym_normalized_formula(self):
        g = random_connected_graph(np.random.default_rng(1), 9)
        d = g.weights.sum(axis=1)
        expected = np.eye(9) - g.weights / np.sqrt(np.outer(d, d))
        np.testing.assert_allclose(g.sym_normalized_laplacian(), expected, atol=1e-15)

    def test_isolated_vertex(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            g = Graph.from_edges(3, [(0, 1)])
        with pytest.raises(DegenerateDegreeError):
            shift_matrices(g, ["sym_normalized_laplacian"])

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            shift_matrices(path_graph(3), ["heat"])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 20), st.integers(0, 10**6))
    def test_width_one_and_row_sums(self, n, seed):
        g = random_connected_graph(np.random.default_rng(seed), n)
        rho = geodesic_matrix(g)
        for s in shift_matrices(g, ["adjacency", "degree", "laplacian", "sym_normalized_laplacian"]):
            assert np.all(s.entries[rho >= 2] == 0)
            np.testing.assert_array_equal(s.entries, s.entries.T)
        assert np.abs(g.laplacian().sum(axis=1)).max() <= 1e-12


class TestGeodesic:
    def test_path(self):
        g = path_graph(3)
        assert geodesic(g, 0, 2) == 2
        assert geodesic(g, 1, 1) == 0

    def test_cycle(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        assert geodesic(g, 0, 2) == 2
        assert geodesic(g, 0, 3) == 1

    def test_matrix_symmetric(self):
        g = random_connected_graph(np.random.default_rng(5), 12)
        rho = geodesic_matrix(g)
        np.testing.assert_array_equal(rho, rho.T)
        assert rho[3, 7] == geodesic(g, 3, 7)

    def test_unreachable(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            g = Graph.from_edges(4, [(0, 1), (2, 3)])
        assert not g.connected
        with pytest.raises(UnreachableError):
            geodesic(g, 0, 3)


class TestGraph:
    def test_disconnected_warns(self):
        with pytest.warns(RuntimeWarning):
            Graph.from_edges(3, [(0, 1)])

    @pytest.mark.parametrize(
        "W",
        [
            [[0, 1], [2, 0]],
            [[1, 0], [0, 0]],
            [[0, -1], [-1, 0]],
        ],
    )
    def test_invalid_weights(self, W):
        with pytest.raises(InvalidInputError):
            Graph(np.array(W, dtype=float))

    def test_json_round_trip_is_one_based(self):
        g = Graph.from_edges(3, [(0, 1, 2.5), (1, 2)], coords=[[0, 0], [1, 0], [2, 0]])
        obj = json.loads(g.to_json())
        assert obj["order"] == 3
        assert [1, 2, 2.5] in obj["edges"]
        g2 = Graph.from_json(g.to_json())
        np.testing.assert_array_equal(g2.weights, g.weights)
        np.testing.assert_array_equal(g2.coords, g.coords)

    def test_cartesian_product_shifts_commute(self):
        g, shifts = cartesian_product(path_graph(3), path_graph(4))
        assert g.order == 12
        A, B = (s.entries for s in shifts)
        np.testing.assert_allclose(A @ B, B @ A, atol=1e-14)
        np.testing.assert_allclose(A + B, g.laplacian(), atol=1e-14)
