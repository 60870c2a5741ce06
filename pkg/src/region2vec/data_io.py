"""CSV ingestion and export, attribute standardization and the synthetic
spatial-network generator.

File layouts (UTF-8, header row first):

* ``nodes.csv``         ``node_id,poverty_share,<attr1>,...``
* ``adjacency.csv``     ``src,dst``          one undirected rook edge per row
* ``flows.csv``         ``src,dst,weight``   directed rows allowed, summed on load
* ``ground_truth.csv``  ``node_id,community``

Floats are written with ``repr`` so that a write/load cycle is exact.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .clustering import CommunityAssignment
from .errors import InvalidConfig, Region2VecError, ShapeMismatch
from .graph import SpatialGraph, as_flow_matrix


class DataError(Region2VecError, ValueError):
    pass


class UnknownNodeId(DataError):
    pass


class DuplicateEdge(DataError):
    pass


class DuplicateNodeId(DataError):
    pass


class NonNumericAttribute(DataError):
    pass


class MissingPovertyColumn(DataError):
    pass


class InvalidWeight(DataError):
    pass


class BadHeader(DataError):
    pass


@dataclass(frozen=True)
class AttributeMatrix:
    x: np.ndarray
    standardized: bool = False

    @property
    def shape(self):
        return self.x.shape


def standardize(x) -> AttributeMatrix:
    """Column-wise z-scores with population variance; constant columns become 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    mean = x.mean(axis=0)
    centered = x - mean
    std = np.sqrt((centered**2).mean(axis=0))
    constant = np.all(x == x[:1], axis=0)
    out = np.zeros_like(x)
    live = ~constant
    out[:, live] = centered[:, live] / std[live]
    return AttributeMatrix(out, standardized=True)


@dataclass
class Dataset:
    graph: SpatialGraph
    flows: np.ndarray
    poverty_share: np.ndarray
    raw_attributes: np.ndarray
    attribute_names: list
    ground_truth: CommunityAssignment | None = None
    attributes: AttributeMatrix = field(init=False)

    def __post_init__(self):
        n = self.graph.n
        self.flows = as_flow_matrix(self.flows)
        self.poverty_share = np.asarray(self.poverty_share, dtype=np.float64)
        self.raw_attributes = np.asarray(self.raw_attributes, dtype=np.float64).reshape(n, -1)
        if self.flows.shape != (n, n) or self.poverty_share.shape != (n,):
            raise ShapeMismatch("flows / poverty_share do not match the node count")
        if self.raw_attributes.shape[1] != len(self.attribute_names):
            raise ShapeMismatch("attribute_names do not match attribute columns")
        if np.any((self.poverty_share < 0) | (self.poverty_share > 1)):
            raise DataError("poverty_share must lie in [0, 1]")
        if self.ground_truth is not None and self.ground_truth.n != n:
            raise ShapeMismatch("ground truth length does not match the node count")
        # poverty share doubles as the first model attribute
        self.attributes = standardize(np.column_stack([self.poverty_share, self.raw_attributes]))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def node_ids(self) -> tuple:
        return self.graph.node_ids

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.node_ids == other.node_ids
            and np.array_equal(self.graph.adjacency, other.graph.adjacency)
            and np.array_equal(self.flows, other.flows)
            and np.array_equal(self.poverty_share, other.poverty_share)
            and np.array_equal(self.raw_attributes, other.raw_attributes)
            and list(self.attribute_names) == list(other.attribute_names)
            and self.ground_truth == other.ground_truth
        )


def _fmt(v) -> str:
    return repr(float(v))


def _read_rows(path, expected=None):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise BadHeader(f"{path}: empty file") from None
        if expected is not None and header[: len(expected)] != expected:
            raise BadHeader(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def _float(text, what):
    try:
        v = float(text)
    except ValueError:
        raise NonNumericAttribute(f"{what}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise NonNumericAttribute(f"{what}: {text!r} is not finite")
    return v


def _read_nodes(path):
    header, rows = _read_rows(path)
    if not header or header[0] != "node_id":
        raise BadHeader(f"{path}: first column must be node_id")
    if len(header) < 2 or header[1] != "poverty_share":
        raise MissingPovertyColumn(f"{path}: second column must be poverty_share")
    ids, values = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        values.append([_float(v, f"{path}:{lineno} {name}") for name, v in zip(header[1:], row[1:])])
    if len(set(ids)) != len(ids):
        raise DuplicateNodeId(f"{path}: node ids are not unique")
    values = np.asarray(values, dtype=np.float64).reshape(len(ids), len(header) - 1)
    return ids, header[2:], values[:, 0], values[:, 1:]


def _index(lookup, node, path, lineno):
    try:
        return lookup[node]
    except KeyError:
        raise UnknownNodeId(f"{path}:{lineno}: unknown node id {node!r}") from None


def _read_adjacency(path, lookup):
    _, rows = _read_rows(path, ["src", "dst"])
    n = len(lookup)
    adj = np.zeros((n, n), dtype=np.int8)
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        i = _index(lookup, row[0], path, lineno)
        j = _index(lookup, row[1], path, lineno)
        if (i, j) in seen:
            raise DuplicateEdge(f"{path}:{lineno}: edge {row[0]}-{row[1]} listed twice")
        seen.add((i, j))
        if i != j:
            adj[i, j] = adj[j, i] = 1
    return adj


def _read_flows(path, lookup):
    _, rows = _read_rows(path, ["src", "dst", "weight"])
    n = len(lookup)
    s = np.zeros((n, n))
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        i = _index(lookup, row[0], path, lineno)
        j = _index(lookup, row[1], path, lineno)
        w = _float(row[2], f"{path}:{lineno} weight")
        if w <= 0:
            raise InvalidWeight(f"{path}:{lineno}: weight must be positive, got {w}")
        if (i, j) in seen:
            raise DuplicateEdge(f"{path}:{lineno}: flow {row[0]}->{row[1]} listed twice")
        seen.add((i, j))
        s[i, j] += w
    s = s + s.T
    np.fill_diagonal(s, 0.0)
    return s


def read_labels(path, node_ids) -> CommunityAssignment:
    """Read a ``node_id,community`` file, ordered to match ``node_ids``."""
    _, rows = _read_rows(path, ["node_id", "community"])
    lookup = {nid: i for i, nid in enumerate(node_ids)}
    labels = np.zeros(len(node_ids), dtype=np.int64)
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        i = _index(lookup, row[0], path, lineno)
        if i in seen:
            raise DataError(f"{path}:{lineno}: node {row[0]!r} labelled twice")
        seen.add(i)
        try:
            labels[i] = int(row[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: community {row[1]!r} is not an integer") from None
    if len(seen) != len(node_ids):
        raise DataError(f"{path}: {len(node_ids) - len(seen)} nodes have no label")
    try:
        return CommunityAssignment(labels)
    except ValueError:
        return CommunityAssignment.from_labels(labels)


def write_labels(path, node_ids, assignment: CommunityAssignment):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "community"])
        for nid, c in zip(node_ids, assignment.labels):
            w.writerow([nid, int(c)])


def load_dataset(nodes_path, adjacency_path, flows_path, ground_truth_path=None) -> Dataset:
    """Load the CSV quartet; flows are symmetrized by summing both directions."""
    ids, names, poverty, raw = _read_nodes(nodes_path)
    lookup = {nid: i for i, nid in enumerate(ids)}
    adj = _read_adjacency(adjacency_path, lookup)
    flows = _read_flows(flows_path, lookup)
    truth = read_labels(ground_truth_path, ids) if ground_truth_path else None
    return Dataset(SpatialGraph(adj, tuple(ids)), flows, poverty, raw, list(names), truth)


def write_dataset(dataset: Dataset, out_dir) -> dict:
    """Write ``dataset`` as CSV files under ``out_dir``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    ids = dataset.node_ids
    paths = {
        "nodes": os.path.join(out_dir, "nodes.csv"),
        "adjacency": os.path.join(out_dir, "adjacency.csv"),
        "flows": os.path.join(out_dir, "flows.csv"),
    }
    with open(paths["nodes"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "poverty_share", *dataset.attribute_names])
        for i, nid in enumerate(ids):
            w.writerow([nid, _fmt(dataset.poverty_share[i]), *map(_fmt, dataset.raw_attributes[i])])
    iu, ju = np.triu_indices(dataset.n, k=1)
    with open(paths["adjacency"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for i, j in zip(iu, ju):
            if dataset.graph.adjacency[i, j]:
                w.writerow([ids[i], ids[j]])
    with open(paths["flows"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for i, j in zip(iu, ju):
            if dataset.flows[i, j] > 0:
                w.writerow([ids[i], ids[j], _fmt(dataset.flows[i, j])])
    if dataset.ground_truth is not None:
        paths["ground_truth"] = os.path.join(out_dir, "ground_truth.csv")
        write_labels(paths["ground_truth"], ids, dataset.ground_truth)
    return paths


def write_embeddings(path, node_ids, z):
    z = np.asarray(z, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *(f"z{k}" for k in range(z.shape[1]))])
        for nid, row in zip(node_ids, z):
            w.writerow([nid, *map(_fmt, row)])


def read_embeddings(path, node_ids=None):
    """Returns ``(node_ids, z)``; rows are reordered to ``node_ids`` if given."""
    header, rows = _read_rows(path)
    if not header or header[0] != "node_id":
        raise BadHeader(f"{path}: first column must be node_id")
    ids = [r[0] for r in rows]
    z = np.asarray([[_float(v, f"{path} {r[0]}") for v in r[1:]] for r in rows], dtype=np.float64)
    z = z.reshape(len(ids), len(header) - 1)
    if node_ids is None:
        return tuple(ids), z
    lookup = {nid: i for i, nid in enumerate(ids)}
    order = [_index(lookup, nid, path, "?") for nid in node_ids]
    if len(ids) != len(node_ids):
        raise DataError(f"{path}: {len(ids)} rows for {len(node_ids)} nodes")
    return tuple(node_ids), z[order]


def write_loss_trace(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "total", "numerator", "negative_term", "hop_term"])
        for it, loss in enumerate(trace):
            w.writerow([it, _fmt(loss.total), _fmt(loss.numerator), _fmt(loss.negative_term), _fmt(loss.hop_term)])


def read_loss_trace(path) -> np.ndarray:
    _, rows = _read_rows(path, ["iteration", "total", "numerator", "negative_term", "hop_term"])
    return np.asarray([[float(v) for v in r] for r in rows], dtype=np.float64).reshape(-1, 5)


@dataclass(frozen=True)
class SynthConfig:
    grid_rows: int = 10
    grid_cols: int = 10
    k_true: int = 5
    intra_flow_mean: float = 20.0
    inter_flow_mean: float = 2.0
    # probability that an inter-community pair carries any flow
    inter_density: float = 0.02
    # intra-community flows only between nodes at most this many hops apart
    intra_hop_max: int = 3
    # long-range flows between paired distant tiles; mean 0 disables them
    link_flow_mean: float = 600.0
    link_density: float = 0.015
    attribute_dims: int = 10
    attribute_separation: float = 3.5
    # per-column coupling of generic attributes to the node's own poverty share
    poverty_loading: float = 1.5
    poverty_concentration: float = 30.0
    seed: int = 0

    def __post_init__(self):
        n = self.grid_rows * self.grid_cols
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InvalidConfig("grid dimensions must be positive")
        if not 1 <= self.k_true <= n:
            raise InvalidConfig(f"k_true must lie in [1, {n}]")
        if not self.intra_flow_mean > self.inter_flow_mean > 0:
            raise InvalidConfig("need intra_flow_mean > inter_flow_mean > 0")
        if not 0 <= self.inter_density <= 1 or not 0 <= self.link_density <= 1:
            raise InvalidConfig("inter_density and link_density must lie in [0, 1]")
        if self.link_flow_mean < 0:
            raise InvalidConfig("link_flow_mean must be >= 0")
        if self.intra_hop_max < 1 or self.attribute_dims < 0:
            raise InvalidConfig("intra_hop_max must be >= 1, attribute_dims >= 0")
        if self.attribute_separation < 0 or self.poverty_concentration <= 2:
            raise InvalidConfig("attribute_separation must be >= 0, poverty_concentration > 2")
        bands = self._bands()
        if bands > self.grid_rows or max(self._tiles_per_band()) > self.grid_cols:
            raise InvalidConfig(f"{self.grid_rows}x{self.grid_cols} grid cannot hold {self.k_true} tiles")

    def _bands(self):
        # the feasible band count closest to sqrt(k); one always exists when
        # rows * cols >= k (k bands of one tile, or one band per row)
        k, rows, cols = self.k_true, self.grid_rows, self.grid_cols
        feasible = [b for b in range(1, min(rows, k) + 1) if -(-k // b) <= cols]
        if not feasible:
            return 1
        return min(feasible, key=lambda b: (abs(b - math.sqrt(k)), b))

    def _tiles_per_band(self):
        bands = self._bands()
        return [len(chunk) for chunk in np.array_split(np.arange(self.k_true), bands)]


def grid_adjacency(rows: int, cols: int) -> np.ndarray:
    """Rook adjacency of a rows x cols grid, nodes numbered row-major."""
    n = rows * cols
    adj = np.zeros((n, n), dtype=np.int8)
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                adj[i, i + 1] = adj[i + 1, i] = 1
            if r + 1 < rows:
                adj[i, i + cols] = adj[i + cols, i] = 1
    return adj


def tile_labels(config: SynthConfig) -> np.ndarray:
    """Split the grid into ``k_true`` rectangular tiles of roughly equal area.

    Tiles are arranged in horizontal bands; band heights are proportional
    to the number of tiles they hold.
    """
    counts = config._tiles_per_band()
    heights = np.diff(np.round(np.cumsum([0] + counts) * config.grid_rows / config.k_true)).astype(int)
    if np.any(heights == 0):
        heights = np.array([len(c) for c in np.array_split(np.arange(config.grid_rows), len(counts))])
    labels = np.zeros((config.grid_rows, config.grid_cols), dtype=np.int64)
    row, label = 0, 1
    for count, h in zip(counts, heights):
        for cols in np.array_split(np.arange(config.grid_cols), count):
            labels[row : row + h, cols[0] : cols[-1] + 1] = label
            label += 1
        row += h
    return labels.ravel()


def _tile_centroids(truth, rows, cols, k):
    r, c = np.divmod(np.arange(rows * cols), cols)
    pos = np.column_stack([r / max(rows - 1, 1), c / max(cols - 1, 1)])
    return np.array([pos[truth == t].mean(axis=0) for t in range(1, k + 1)])


def _link_tiles(trend):
    """Pair tiles from opposite ends of the attribute trend (lowest with
    highest, and so on inwards); an odd middle tile stays unpaired."""
    order = np.argsort(trend, kind="stable")
    return [(int(order[i]), int(order[-1 - i])) for i in range(len(order) // 2)]


def generate_synthetic(config: SynthConfig | None = None) -> Dataset:
    """Planted-partition grid dataset standing in for real tract data.

    Ground-truth communities are rectangular tiles.  Flows are local:
    Poisson counts between same-tile nodes within ``intra_hop_max`` hops,
    plus a sparse sprinkle of weak cross-tile flows, plus (when
    ``link_flow_mean > 0``) a few heavy flows between tiles at opposite ends
    of the attribute trend.
    Tile attribute centers and poverty modes vary smoothly with tile
    position, so neighbouring tiles look alike; generic attributes also
    load on each node's own poverty share.
    """
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    rows, cols, k = config.grid_rows, config.grid_cols, config.k_true
    n = rows * cols
    graph = SpatialGraph(grid_adjacency(rows, cols), tuple(f"r{r}c{c}" for r in range(rows) for c in range(cols)))
    truth = tile_labels(config)
    tile = truth - 1
    centroids = _tile_centroids(truth, rows, cols, k)

    iu, ju = np.triu_indices(n, k=1)
    same = tile[iu] == tile[ju]
    intra = same & (graph.hop[iu, ju] <= config.intra_hop_max)
    inter = ~same & (rng.random(len(iu)) < config.inter_density)
    weights = np.zeros(len(iu))
    weights[intra] = rng.poisson(config.intra_flow_mean, intra.sum())
    weights[inter] = rng.poisson(config.inter_flow_mean, inter.sum())
    # smooth spatial trend: project tile centroids on a random direction
    direction = rng.normal(size=2)
    trend = centroids @ (direction / np.linalg.norm(direction))
    span = np.ptp(trend)
    trend = (trend - trend.min()) / span if span > 0 else np.full(k, 0.5)

    if config.link_flow_mean > 0:
        linked = np.zeros((k, k), dtype=bool)
        for a, b in _link_tiles(trend):
            linked[a, b] = linked[b, a] = True
        link = linked[tile[iu], tile[ju]] & (rng.random(len(iu)) < config.link_density)
        weights[link] += rng.poisson(config.link_flow_mean, link.sum())
    flows = np.zeros((n, n))
    flows[iu, ju] = weights
    flows = flows + flows.T

    kappa = config.poverty_concentration
    modes = 0.15 + 0.45 * trend
    a = modes * (kappa - 2) + 1
    b = (1 - modes) * (kappa - 2) + 1
    poverty = rng.beta(a[tile], b[tile])

    m = config.attribute_dims
    axis = rng.normal(size=m)
    axis /= np.linalg.norm(axis) if m else 1.0
    jitter = rng.normal(scale=0.25, size=(k, m))
    centers = config.attribute_separation * (trend[:, None] * axis[None, :] + jitter)
    loadings = config.poverty_loading * rng.choice([-1.0, 1.0], size=m)
    pov_z = (poverty - poverty.mean()) / poverty.std() if poverty.std() > 0 else np.zeros(n)
    raw = centers[tile] + pov_z[:, None] * loadings[None, :] + rng.normal(size=(n, m))

    names = [f"attr{d + 1}" for d in range(m)]
    return Dataset(graph, flows, poverty, raw, names, CommunityAssignment(truth))
