"""Weighted undirected graphs and their shift matrices.

Vertices are indexed ``0..N-1`` in the Python API. The JSON form uses
1-based indices so that files read the same as ``V = {1, ..., N}``.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDegreeError, InvalidInputError, UnreachableError

SHIFT_KINDS = ("adjacency", "degree", "laplacian", "sym_normalized_laplacian")


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph stored as a dense symmetric weight matrix.

    Parameters
    ----------
    weights : np.ndarray
        ``(N, N)`` symmetric, nonnegative, zero diagonal.
    coords : np.ndarray, optional
        ``(N, d)`` vertex coordinates, kept for kNN-built graphs.
    """

    weights: np.ndarray
    coords: np.ndarray | None = None
    connected: bool = field(init=False)

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise InvalidInputError(f"weights must be a square matrix, got shape {W.shape}")
        if np.any(np.diag(W) != 0):
            raise InvalidInputError("self-loops are not allowed")
        if np.any(W < 0):
            raise InvalidInputError("edge weights must be positive")
        if not np.array_equal(W, W.T):
            raise InvalidInputError("weights must be symmetric")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)
        if self.coords is not None:
            C = np.array(self.coords, dtype=float)
            if C.ndim == 1:
                C = C[:, None]
            if C.shape[0] != W.shape[0]:
                raise InvalidInputError("coords must have one row per vertex")
            C.setflags(write=False)
            object.__setattr__(self, "coords", C)
        connected = _n_components(W) == 1
        object.__setattr__(self, "connected", connected)
        if not connected:
            warnings.warn("graph is not connected", RuntimeWarning, stacklevel=3)

    @classmethod
    def from_edges(cls, order: int, edges: Iterable[Sequence[float]], coords=None) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples with 0-based vertices."""
        if order < 1:
            raise InvalidInputError("graph order must be positive")
        W = np.zeros((order, order))
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise InvalidInputError(f"self-loop at vertex {i}")
            if not (0 <= i < order and 0 <= j < order):
                raise InvalidInputError(f"edge ({i}, {j}) out of range")
            if w <= 0:
                raise InvalidInputError(f"edge ({i}, {j}) has nonpositive weight {w}")
            W[i, j] = W[j, i] = w
        return cls(W, coords)

    @property
    def order(self) -> int:
        return self.weights.shape[0]

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        """Sorted ``(i, j, w)`` with ``i < j``."""
        iu, ju = np.nonzero(np.triu(self.weights, 1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(iu, ju)]

    def adjacency(self) -> np.ndarray:
        return np.array(self.weights)

    def degree(self) -> np.ndarray:
        return np.diag(self.weights.sum(axis=1))

    def laplacian(self) -> np.ndarray:
        return self.degree() - self.weights

    def sym_normalized_laplacian(self) -> np.ndarray:
        d = self.weights.sum(axis=1)
        if np.any(d <= 0):
            bad = np.flatnonzero(d <= 0).tolist()
            raise DegenerateDegreeError(f"isolated vertices {bad} have zero degree")
        s = 1.0 / np.sqrt(d)
        L = np.eye(self.order) - s[:, None] * self.weights * s[None, :]
        # symmetrize away the rounding in s_i * w_ij * s_j vs s_j * w_ji * s_i
        return 0.5 * (L + L.T)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.weights[i])

    def to_json(self) -> str:
        obj = {
            "order": self.order,
            "edges": [[i + 1, j + 1, w] for i, j, w in self.edges],
        }
        if self.coords is not None:
            obj["coords"] = self.coords.tolist()
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        obj = json.loads(text)
        edges = [(int(i) - 1, int(j) - 1, float(w)) for i, j, w in obj["edges"]]
        return cls.from_edges(int(obj["order"]), edges, obj.get("coords"))


@dataclass(frozen=True)
class ShiftMatrix:
    kind: str
    entries: np.ndarray

    def __post_init__(self):
        E = np.array(self.entries, dtype=float)
        E.setflags(write=False)
        object.__setattr__(self, "entries", E)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _n_components(W: np.ndarray) -> int:
    n = W.shape[0]
    seen = np.zeros(n, dtype=bool)
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(W[u]):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    return count


def knn_graph(coords, k: int, weighting: str = "unit", sigma: float | None = None) -> Graph:
    """k-nearest-neighbour graph, symmetrized by union.

    Vertex ``i`` selects its ``k`` nearest neighbours in Euclidean distance
    (equal distances resolved toward the lower index); ``(i, j)`` is an edge
    when either endpoint selects the other.

    ``weighting="gaussian"`` uses ``exp(-dist**2 / sigma**2)`` instead of 1;
    ``sigma`` defaults to the mean selected-neighbour distance.
    """
    X = np.asarray(coords, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise InvalidInputError("knn_graph needs at least two points")
    if not 1 <= k < n:
        raise InvalidInputError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    if len(np.unique(X, axis=0)) != n:
        raise InvalidInputError("coordinates must be pairwise distinct")

    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    selected = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    for i in range(n):
        others = idx[idx != i]
        # lexsort: last key is primary
        order = np.lexsort((others, dist[i, others]))
        selected[i, others[order[:k]]] = True
    adj = selected | selected.T

    if weighting == "unit":
        W = adj.astype(float)
    elif weighting == "gaussian":
        if sigma is None:
            sigma = float(dist[selected].mean())
        if sigma <= 0:
            raise InvalidInputError("sigma must be positive")
        W = np.where(adj, np.exp(-(dist**2) / sigma**2), 0.0)
        W = 0.5 * (W + W.T)
    else:
        raise InvalidInputError(f"unknown weighting {weighting!r}")
    return Graph(W, X)


def shift_matrices(g: Graph, kinds: Sequence[str]) -> list[ShiftMatrix]:
    out = []
    for kind in kinds:
        if kind == "adjacency":
            S = g.adjacency()
        elif kind == "degree":
            S = g.degree()
        elif kind == "laplacian":
            S = g.laplacian()
        elif kind == "sym_normalized_laplacian":
            S = g.sym_normalized_laplacian()
        else:
            raise InvalidInputError(f"unknown shift kind {kind!r}; expected one of {SHIFT_KINDS}")
        out.append(ShiftMatrix(kind, S))
    return out


def geodesic(g: Graph, i: int, j: int) -> int:
    """Hop distance between ``i`` and ``j`` (breadth-first search)."""
    n = g.order
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputError(f"vertices ({i}, {j}) out of range for order {n}")
    if i == j:
        return 0
    dist = {i: 0}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                if v == j:
                    return dist[v]
                queue.append(v)
    raise UnreachableError(f"no path between {i} and {j}")


def geodesic_matrix(g: Graph) -> np.ndarray:
    """All-pairs hop distances; ``inf`` for disconnected pairs."""
    n = g.order
    D = np.full((n, n), np.inf)
    for s in range(n):
        D[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if D[s, v] == np.inf:
                    D[s, v] = D[s, u] + 1
                    queue.append(v)
    return D


def cartesian_product(g1: Graph, g2: Graph) -> tuple[Graph, list[ShiftMatrix]]:
    """Cartesian product graph with its two commuting Laplacian shifts.

    Vertex ``(u, v)`` maps to ``u * g2.order + v``. The shifts
    ``L1 (x) I`` and ``I (x) L2`` commute and together generate the
    product Laplacian.
    """
    I1, I2 = np.eye(g1.order), np.eye(g2.order)
    W = np.kron(g1.weights, I2) + np.kron(I1, g2.weights)
    g = Graph(W)
    S1 = np.kron(g1.laplacian(), I2)
    S2 = np.kron(I1, g2.laplacian())
    return g, [ShiftMatrix("laplacian_factor_1", S1), ShiftMatrix("laplacian_factor_2", S2)]
