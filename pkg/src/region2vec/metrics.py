"""Community quality measures: intra/inter flow ratio, inequality index,
pooled cosine similarity, poverty homogeneity and adjusted Rand index."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import Region2VecError


class NoInterFlow(Region2VecError):
    pass


class DegenerateMean(Region2VecError):
    pass


class NoPairs(Region2VecError):
    pass


class ZeroNormRow(Region2VecError):
    pass


class LengthMismatch(Region2VecError, ValueError):
    pass


def _labels(assignment) -> np.ndarray:
    return np.asarray(getattr(assignment, "labels", assignment)).ravel()


def flow_ratio(flows, assignment) -> float:
    """Total intra-community flow over total inter-community flow.

    Each unordered pair is counted once.
    """
    s = np.asarray(flows, dtype=np.float64)
    labels = _labels(assignment)
    iu, ju = np.triu_indices(len(labels), k=1)
    w = s[iu, ju]
    same = labels[iu] == labels[ju]
    inter = w[~same].sum()
    if inter <= 0:
        raise NoInterFlow("no flow crosses community boundaries")
    return float(w[same].sum() / inter)


def inequality(values, assignment):
    """Per-community sigma / sqrt(mu (1 - mu)) of a bounded proportion.

    Uses the population standard deviation.  Returns
    ``(per_community, median)`` with communities in label order.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    labels = _labels(assignment)
    if len(v) != len(labels):
        raise LengthMismatch(f"{len(v)} values for {len(labels)} labels")
    per = []
    for c in np.unique(labels):
        members = v[labels == c]
        mu = members.mean()
        if not 0 < mu < 1:
            raise DegenerateMean(f"community {c} has mean {mu}; index undefined")
        # a constant community is exactly equal; std() would leave rounding residue
        sigma = 0.0 if np.all(members == members[0]) else members.std()
        per.append(float(sigma / np.sqrt(mu * (1 - mu))))
    return per, float(np.median(per))


def cosine_mean(attributes, assignment) -> float:
    """Mean cosine similarity over all intra-community unordered pairs.

    Pairs are pooled across communities, so large communities weigh more;
    singletons contribute nothing.
    """
    x = np.asarray(getattr(attributes, "x", attributes), dtype=np.float64)
    labels = _labels(assignment)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ZeroNormRow(f"{int(np.sum(norms == 0))} attribute rows have zero norm")
    unit = x / norms[:, None]
    total, count = 0.0, 0
    for c in np.unique(labels):
        u = unit[labels == c]
        m = len(u)
        if m < 2:
            continue
        s = u.sum(axis=0)
        # sum over i<j of u_i.u_j = (|sum u|^2 - sum |u_i|^2) / 2
        total += (s @ s - np.einsum("ij,ij->", u, u)) / 2.0
        count += m * (m - 1) // 2
    if count == 0:
        raise NoPairs("every community is a singleton")
    return float(total / count)


def quantile_classes(values, bins: int = 5) -> np.ndarray:
    """Bin a continuous variable into ``bins`` quantile classes 0..bins-1.

    A value equal to a cut point goes to the upper class.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if bins < 2:
        raise ValueError("bins must be >= 2")
    edges = np.quantile(v, np.arange(1, bins) / bins)
    return np.searchsorted(edges, v, side="right")


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def homogeneity_from_classes(classes, assignment) -> float:
    classes = np.asarray(classes).ravel()
    labels = _labels(assignment)
    if len(classes) != len(labels):
        raise LengthMismatch(f"{len(classes)} classes for {len(labels)} labels")
    _, ci = np.unique(classes, return_inverse=True)
    _, ki = np.unique(labels, return_inverse=True)
    table = np.zeros((ci.max() + 1, ki.max() + 1))
    np.add.at(table, (ci, ki), 1)
    h_c = _entropy(table.sum(axis=1))
    if h_c == 0:
        return 1.0
    n = table.sum()
    nz = table > 0
    cluster_sizes = table.sum(axis=0)
    h_ck = -np.sum(table[nz] / n * np.log(table[nz] / np.broadcast_to(cluster_sizes, table.shape)[nz]))
    return float(1.0 - h_ck / h_c)


def homogeneity(poverty_share, assignment, bins: int = 5) -> float:
    """Entropy homogeneity 1 - H(class|cluster)/H(class) of quantile-binned
    poverty share; 1 by convention when there is a single class."""
    v = np.asarray(poverty_share).ravel()
    if len(v) < bins:
        raise ValueError(f"need at least {bins} nodes for {bins} bins")
    return homogeneity_from_classes(quantile_classes(v, bins), assignment)


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def adjusted_rand(a, b) -> float:
    la, lb = _labels(a), _labels(b)
    if len(la) != len(lb):
        raise LengthMismatch(f"assignments have lengths {len(la)} and {len(lb)}")
    _, ai = np.unique(la, return_inverse=True)
    _, bi = np.unique(lb, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    total = _comb2(len(la))
    if total == 0:
        return 1.0
    expected = rows * cols / total
    maximum = (rows + cols) / 2.0
    if maximum == expected:
        # both partitions trivial in the same way
        return 1.0
    return float((index - expected) / (maximum - expected))


@dataclass
class MetricsReport:
    """Flat metrics record; a field is None when the metric is undefined for
    the assignment (only produced by ``evaluate(..., strict=False)``)."""

    flow_ratio: float | None
    inequality_median: float | None
    inequality_per_community: list | None = field(default_factory=list)
    cosine_mean: float | None = None
    homogeneity: float | None = None
    adjusted_rand: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text) -> "MetricsReport":
        return cls(**json.loads(text))


def evaluate(flows, attributes, poverty_share, assignment, truth=None, bins: int = 5, strict: bool = True) -> MetricsReport:
    """Compute every metric for one assignment.

    Cosine similarity is the pair-weighted mean over intra-community pairs
    of the (standardized) attribute rows.  With ``strict=False`` a metric
    that is undefined for this assignment is reported as None instead of
    raising.
    """

    def attempt(fn, *args):
        if strict:
            return fn(*args)
        try:
            return fn(*args)
        except Region2VecError:
            return None

    ineq = attempt(inequality, poverty_share, assignment)
    return MetricsReport(
        flow_ratio=attempt(flow_ratio, flows, assignment),
        inequality_median=None if ineq is None else ineq[1],
        inequality_per_community=None if ineq is None else ineq[0],
        cosine_mean=attempt(cosine_mean, attributes, assignment),
        homogeneity=homogeneity(poverty_share, assignment, bins),
        adjusted_rand=None if truth is None else adjusted_rand(truth, assignment),
    )
