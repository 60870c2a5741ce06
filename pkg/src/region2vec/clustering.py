"""Contiguity-constrained Ward agglomeration and the K-Means baseline."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import Region2VecError, ShapeMismatch


class InvalidK(Region2VecError, ValueError):
    pass


@dataclass(frozen=True)
class CommunityAssignment:
    """Per-node community labels in ``1..k``, every community nonempty."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.size == 0:
            raise ValueError("assignment must cover at least one node")
        k = int(labels.max())
        if labels.min() < 1 or len(np.unique(labels)) != k:
            raise ValueError("labels must be 1..K with every community nonempty")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return int(self.labels.max())

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def from_labels(cls, labels) -> "CommunityAssignment":
        """Relabel arbitrary hashable labels to 1..K in order of first appearance."""
        mapping = {}
        out = [mapping.setdefault(lab, len(mapping) + 1) for lab in np.asarray(labels).ravel().tolist()]
        return cls(np.asarray(out, dtype=np.int64))

    def members(self) -> list:
        return [np.flatnonzero(self.labels == c) for c in range(1, self.k + 1)]

    def __eq__(self, other):
        return isinstance(other, CommunityAssignment) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())


@dataclass(frozen=True)
class MergeStep:
    """One agglomeration: clusters are named by their smallest member index."""

    left: int
    right: int
    cost: float
    size: int
    # True when no adjacent pair remained and the merge ignored contiguity.
    violation: bool = False


def _check_k(k, n):
    if not 1 <= k <= n:
        raise InvalidK(f"k must lie in [1, {n}], got {k}")


def ward_tree(points, adjacency=None, stop_at: int = 1) -> list:
    """Constrained Ward agglomeration down to ``stop_at`` clusters.

    Cluster distances are Ward cost increments (the rise in total
    within-cluster sum of squares), updated with the Lance-Williams
    recurrence.  Only clusters sharing an adjacency edge may merge; when no
    such pair is left the cheapest pair overall merges and the step is
    flagged.  ``adjacency=None`` means unconstrained.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if adjacency is None:
        adj = ~np.eye(n, dtype=bool)
    else:
        adj = np.asarray(adjacency) != 0
        if adj.shape != (n, n):
            raise ShapeMismatch(f"adjacency {adj.shape} does not match {n} points")
        adj = adj | adj.T
        np.fill_diagonal(adj, False)

    cost = 0.5 * squareform(pdist(x, "sqeuclidean")) if n > 1 else np.zeros((n, n))
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    neighbors = [set(np.flatnonzero(adj[i]).tolist()) for i in range(n)]
    version = np.zeros(n, dtype=np.int64)

    heap = [(cost[i, j], i, j, 0, 0) for i in range(n) for j in neighbors[i] if i < j]
    heapq.heapify(heap)

    merges = []
    clusters = n
    while clusters > stop_at:
        pick = None
        while heap:
            c, i, j, vi, vj = heapq.heappop(heap)
            if active[i] and active[j] and version[i] == vi and version[j] == vj:
                pick = (c, i, j, False)
                break
        if pick is None:
            idx = np.flatnonzero(active)
            sub = cost[np.ix_(idx, idx)]
            iu, ju = np.triu_indices(len(idx), k=1)
            vals = sub[iu, ju]
            best = np.flatnonzero(vals == vals.min())[0]  # row-major order gives lexicographic tie-break
            pick = (float(vals[best]), int(idx[iu[best]]), int(idx[ju[best]]), True)
        c, i, j, flagged = pick
        ni, nj = size[i], size[j]
        nk = size
        # Lance-Williams for Ward increments: new cluster keeps id i (< j)
        updated = ((nk + ni) * cost[i] + (nk + nj) * cost[j] - nk * cost[i, j]) / (nk + ni + nj)
        cost[i, :] = updated
        cost[:, i] = updated
        cost[i, i] = 0.0
        size[i] = ni + nj
        active[j] = False
        version[i] += 1
        neighbors[i] = (neighbors[i] | neighbors[j]) - {i, j}
        for k in neighbors[j]:
            neighbors[k].discard(j)
            if k != i:
                neighbors[k].add(i)
        neighbors[j] = set()
        merges.append(MergeStep(int(i), int(j), float(c), int(size[i]), flagged))
        clusters -= 1
        for k in neighbors[i]:
            a, b = (i, k) if i < k else (k, i)
            heapq.heappush(heap, (cost[a, b], a, b, int(version[a]), int(version[b])))
    return merges


def labels_from_merges(n: int, merges, k: int) -> CommunityAssignment:
    """Cut a merge sequence at ``k`` clusters."""
    _check_k(k, n)
    if len(merges) < n - k:
        raise InvalidK(f"merge sequence of length {len(merges)} cannot reach {k} clusters")
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for step in merges[: n - k]:
        parent[find(step.right)] = find(step.left)
    roots = [find(i) for i in range(n)]
    return CommunityAssignment.from_labels(roots)


def ward_constrained(points, adjacency, k: int):
    """Ward clustering of ``points`` into ``k`` spatially contiguous groups.

    Returns ``(assignment, merges)``; ``merges`` has exactly ``n - k`` steps.
    Labels are numbered by the smallest node index in each community.
    """
    x = np.asarray(points)
    n = x.shape[0]
    _check_k(k, n)
    merges = ward_tree(x, adjacency, stop_at=k)
    return labels_from_merges(n, merges, k), merges


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    closest = np.sum((x - x[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(remaining))
        centers.append(nxt)
        closest = np.minimum(closest, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[centers].copy()


def _assign(x, centroids):
    d2 = np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1), d2


@dataclass
class KMeansResult:
    assignment: CommunityAssignment
    centroids: np.ndarray
    inertia: list
    iterations: int


def _lloyd(x, k, rng, max_iter):
    n = x.shape[0]
    centroids = _kmeanspp(x, k, rng)
    labels, d2 = _assign(x, centroids)
    inertia = [float(d2[np.arange(n), labels].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
        empty = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
        if len(empty):
            own = d2[np.arange(n), labels].copy()
            for c in empty:
                far = int(np.argmax(own))
                centroids[c] = x[far]
                own[far] = -1.0
        new_labels, d2 = _assign(x, centroids)
        inertia.append(float(d2[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centroids, inertia, it


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeding, best of ``n_init`` starts.

    Each start runs to an assignment fixpoint or ``max_iter`` rounds; the
    start with the lowest final objective wins (earliest on ties).
    ``inertia`` holds the winning start's objective after every assignment
    step.  An emptied cluster is re-seeded with the point farthest from its
    centroid.  Duplicate points can leave fewer than ``k`` nonempty
    communities; the returned assignment then reports the smaller count.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    _check_k(k, x.shape[0])
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(x, k, rng, max_iter)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    labels, centroids, inertia, it = best
    return KMeansResult(CommunityAssignment.from_labels(labels), centroids, inertia, it)


def kmeans(points, k: int, seed: int = 0, n_init: int = 10) -> CommunityAssignment:
    return kmeans_fit(points, k, seed, n_init=n_init).assignment
