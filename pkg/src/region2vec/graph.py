"""Spatial graph representation: adjacency, GCN normalization, hop distances
and flow-based pair extraction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import Region2VecError, ShapeMismatch


class EmptyGraph(Region2VecError):
    pass


def _check_square(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {mat.shape}")
    return mat


def all_pairs_hops(adjacency) -> np.ndarray:
    """Shortest-path hop counts between every pair of nodes.

    Unreachable pairs get the sentinel value ``n``.
    """
    adj = _check_square(adjacency, "adjacency")
    n = adj.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    dist = shortest_path(csr_matrix(adj != 0), method="D", directed=False, unweighted=True)
    dist[~np.isfinite(dist)] = n
    return dist.astype(np.int64)


def normalize_adjacency(graph) -> np.ndarray:
    """Return D^-1/2 (A + I) D^-1/2 for a binary adjacency.

    Accepts either a :class:`SpatialGraph` or a raw adjacency matrix.
    """
    adj = graph.adjacency if isinstance(graph, SpatialGraph) else _check_square(graph, "adjacency")
    a_tilde = adj.astype(np.float64) + np.eye(adj.shape[0])
    deg = a_tilde.sum(axis=1)
    return a_tilde / np.sqrt(np.outer(deg, deg))


@dataclass(frozen=True)
class SpatialGraph:
    """Binary, symmetric spatial adjacency plus its all-pairs hop matrix."""

    adjacency: np.ndarray
    node_ids: tuple = ()
    hop: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        adj = _check_square(self.adjacency, "adjacency")
        adj = (adj != 0).astype(np.int8)
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency must have a zero diagonal")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        n = adj.shape[0]
        ids = tuple(str(i) for i in range(n)) if not self.node_ids else tuple(self.node_ids)
        if len(ids) != n:
            raise ShapeMismatch(f"{len(ids)} node ids for {n} nodes")
        object.__setattr__(self, "node_ids", ids)
        hop = all_pairs_hops(adj) if self.hop is None else np.asarray(self.hop, dtype=np.int64)
        hop.setflags(write=False)
        object.__setattr__(self, "hop", hop)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def normalized(self) -> np.ndarray:
        return normalize_adjacency(self)

    def is_connected(self) -> bool:
        return self.n <= 1 or bool(np.all(self.hop < self.n))


def as_flow_matrix(flows) -> np.ndarray:
    """Validate a flow matrix: square, symmetric, nonnegative, zero diagonal."""
    s = _check_square(np.asarray(flows, dtype=np.float64), "flows")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("flows must be finite and nonnegative")
    if not np.allclose(s, s.T, rtol=0, atol=0):
        raise ValueError("flows must be symmetric (symmetrize at ingestion)")
    if np.any(np.diag(s) != 0):
        raise ValueError("flows must have a zero diagonal")
    return s


@dataclass(frozen=True)
class PairSet:
    """Unordered node pairs (i < j) split by whether any flow links them.

    ``positive`` is a (P, 2) index array with flow intensities in
    ``weights``; ``negative`` is a (Q, 2) index array.
    """

    positive: np.ndarray
    weights: np.ndarray
    negative: np.ndarray

    @property
    def n_pos(self) -> int:
        return len(self.positive)

    @property
    def n_neg(self) -> int:
        return len(self.negative)

    @classmethod
    def from_lists(cls, positive, negative) -> "PairSet":
        pos = np.asarray([(i, j) for i, j, _ in positive], dtype=np.int64).reshape(-1, 2)
        w = np.asarray([s for _, _, s in positive], dtype=np.float64)
        neg = np.asarray(negative, dtype=np.int64).reshape(-1, 2)
        return cls(pos, w, neg)

    def positive_list(self) -> list:
        return [(int(i), int(j), float(s)) for (i, j), s in zip(self.positive, self.weights)]

    def negative_list(self) -> list:
        return [(int(i), int(j)) for i, j in self.negative]


def extract_pairs(flows) -> PairSet:
    s = as_flow_matrix(flows)
    n = s.shape[0]
    if n < 2:
        raise EmptyGraph(f"need at least 2 nodes to form pairs, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    vals = s[iu, ju]
    pos = vals > 0
    return PairSet(
        positive=np.column_stack([iu[pos], ju[pos]]),
        weights=vals[pos],
        negative=np.column_stack([iu[~pos], ju[~pos]]),
    )
