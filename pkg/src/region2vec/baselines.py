"""Louvain community detection on the flow network and weighted modularity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .clustering import CommunityAssignment
from .errors import Region2VecError, ShapeMismatch


class EmptyFlows(Region2VecError):
    pass


@dataclass(frozen=True)
class LouvainResult:
    assignment: CommunityAssignment
    modularity: float
    levels: int
    # modularity after every local-moving pass, in order
    pass_modularity: list = field(default_factory=list)


def modularity(flows, assignment) -> float:
    """Newman modularity of a partition of the weighted undirected graph ``flows``.

    Q = sum_c [ L_c / W - (d_c / 2W)^2 ] where W is the total edge weight,
    L_c the weight inside community c and d_c the summed degree of c.
    """
    s = np.asarray(flows, dtype=np.float64)
    labels = np.asarray(getattr(assignment, "labels", assignment))
    if s.shape != (len(labels), len(labels)):
        raise ShapeMismatch(f"flows {s.shape} do not match {len(labels)} labels")
    two_w = s.sum()
    if two_w <= 0:
        raise EmptyFlows("total flow weight is zero")
    _, comm = np.unique(labels, return_inverse=True)
    onehot = np.zeros((len(labels), comm.max() + 1))
    onehot[np.arange(len(labels)), comm] = 1.0
    inside = np.einsum("ic,ij,jc->c", onehot, s, onehot)
    degree = onehot.T @ s.sum(axis=1)
    return float(np.sum(inside / two_w - (degree / two_w) ** 2))


def _local_moving(adj: sparse.csr_matrix, rng, resolution):
    n = adj.shape[0]
    k = np.asarray(adj.sum(axis=1)).ravel()
    two_m = k.sum()
    comm = np.arange(n)
    tot = k.copy()
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    qs = []
    moved_any = False
    while True:
        moved = 0
        for i in rng.permutation(n):
            ci = comm[i]
            links = {}
            for ptr in range(indptr[i], indptr[i + 1]):
                j = indices[ptr]
                if j != i:
                    links[comm[j]] = links.get(comm[j], 0.0) + data[ptr]
            tot[ci] -= k[i]
            best, best_gain = ci, links.get(ci, 0.0) - resolution * k[i] * tot[ci] / two_m
            for c in sorted(links):
                gain = links[c] - resolution * k[i] * tot[c] / two_m
                if gain > best_gain + 1e-12 * two_m:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != ci:
                comm[i] = best
                moved += 1
        if moved == 0:
            break
        moved_any = True
        qs.append(comm.copy())
    return comm, moved_any, qs


def _aggregate(adj, comm):
    _, comm = np.unique(comm, return_inverse=True)
    n_c = comm.max() + 1
    member = sparse.csr_matrix((np.ones(len(comm)), (np.arange(len(comm)), comm)), shape=(len(comm), n_c))
    return (member.T @ adj @ member).tocsr(), comm


def louvain(flows, seed: int = 0, resolution: float = 1.0) -> LouvainResult:
    """Two-phase Louvain: local moving to a fixpoint, then aggregation,
    repeated until a level makes no move.  Node visit order is shuffled with
    a generator seeded by ``seed``."""
    s = np.asarray(flows, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeMismatch(f"flows must be square, got {s.shape}")
    if s.sum() <= 0:
        raise EmptyFlows("total flow weight is zero")
    rng = np.random.default_rng(seed)
    n = s.shape[0]
    node_comm = np.arange(n)
    adj = sparse.csr_matrix(s)
    levels = 0
    pass_q = []
    while True:
        comm, moved, snapshots = _local_moving(adj, rng, resolution)
        for snap in snapshots:
            pass_q.append(modularity(s, snap[node_comm]))
        if not moved:
            break
        levels += 1
        adj, comm = _aggregate(adj, comm)
        node_comm = comm[node_comm]
    assignment = CommunityAssignment.from_labels(node_comm)
    return LouvainResult(assignment, modularity(s, assignment), levels, pass_q)
