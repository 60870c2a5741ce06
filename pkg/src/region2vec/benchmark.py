"""Method comparison: Louvain fixes K, then region2vec, K-Means and any
externally produced label files are scored on the same metrics."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .baselines import louvain
from .clustering import CommunityAssignment, kmeans, ward_constrained
from .embedding import TrainingConfig, TrainingResult, train
from .metrics import MetricsReport, evaluate

METRICS = ("flow_ratio", "inequality_median", "cosine_mean", "homogeneity", "adjusted_rand")
LOWER_IS_BETTER = {"inequality_median"}


@dataclass
class BenchmarkRow:
    method: str
    assignment: CommunityAssignment
    report: MetricsReport

    def value(self, metric):
        return getattr(self.report, metric)


@dataclass
class Benchmark:
    k: int
    rows: list = field(default_factory=list)
    training: TrainingResult | None = None

    def row(self, method) -> BenchmarkRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def ranks(self, metric) -> dict:
        """Map method -> 1 (best) or 2 (second) for ``metric``; ties share a rank."""
        vals = sorted(
            {r.value(metric) for r in self.rows if r.value(metric) is not None},
            reverse=metric not in LOWER_IS_BETTER,
        )
        out = {}
        for r in self.rows:
            v = r.value(metric)
            if v is not None and v in vals[:2]:
                out[r.method] = vals.index(v) + 1
        return out


def run_benchmark(dataset, k=None, seed: int = 0, config: TrainingConfig | None = None, external=None, bins: int = 5):
    """Score every method on ``dataset``.

    K defaults to the number of communities Louvain finds on the flows.
    ``external`` maps a method name to a CommunityAssignment produced
    elsewhere.  Metrics that are undefined for a method are None.
    """
    config = config or TrainingConfig(seed=seed)
    truth = dataset.ground_truth
    x = dataset.attributes.x

    def score(name, assignment):
        report = evaluate(dataset.flows, x, dataset.poverty_share, assignment, truth, bins, strict=False)
        return BenchmarkRow(name, assignment, report)

    lv = louvain(dataset.flows, seed=seed)
    k = lv.assignment.k if k is None else int(k)
    result = train(dataset.graph, dataset.flows, x, config)
    r2v, _ = ward_constrained(result.z, dataset.graph.adjacency, k)

    bench = Benchmark(k, training=result)
    bench.rows.append(score("Louvain", lv.assignment))
    bench.rows.append(score("KMeans", kmeans(x, k, seed=seed)))
    bench.rows.append(score("Region2vec", r2v))
    for name, assignment in (external or {}).items():
        bench.rows.append(score(name, assignment))
    return bench


def _cell(v):
    return "" if v is None else repr(float(v))


def render_csv(bench: Benchmark) -> str:
    """One row per method; ``best`` and ``second`` list the metrics that
    method wins or places second on."""
    ranks = {m: bench.ranks(m) for m in METRICS}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "k", *METRICS, "best", "second"])
    for r in bench.rows:
        best = [m for m in METRICS if ranks[m].get(r.method) == 1]
        second = [m for m in METRICS if ranks[m].get(r.method) == 2]
        w.writerow([r.method, r.assignment.k, *(_cell(r.value(m)) for m in METRICS), ";".join(best), ";".join(second)])
    return buf.getvalue()


def render_text(bench: Benchmark) -> str:
    """Aligned table; ``*`` marks the best value per column, ``+`` the second."""
    ranks = {m: bench.ranks(m) for m in METRICS}
    head = ["method", "k", *METRICS]
    body = []
    for r in bench.rows:
        cells = [r.method, str(r.assignment.k)]
        for m in METRICS:
            v = r.value(m)
            mark = {1: "*", 2: "+"}.get(ranks[m].get(r.method), " ")
            cells.append("-  " if v is None else f"{v:.3f}{mark}")
        body.append(cells)
    widths = [max(len(row[c]) for row in [head, *body]) for c in range(len(head))]
    lines = []
    for row in [head, *body]:
        parts = [row[0].ljust(widths[0])] + [cell.rjust(wd) for cell, wd in zip(row[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    lines.append("")
    lines.append(f"K = {bench.k} (Louvain community count unless overridden)")
    lines.append("* best, + second; inequality_median is lower-is-better, all others higher-is-better")
    lines.append("cosine_mean pools every intra-community pair, so larger communities weigh more")
    return "\n".join(lines) + "\n"


def ordering_holds(bench: Benchmark) -> bool:
    """Louvain >= Region2vec >= KMeans on flow ratio and the reverse on
    cosine similarity and homogeneity."""
    lv, r2, km = (bench.row(m) for m in ("Louvain", "Region2vec", "KMeans"))
    vals = {m: [r.value(m) for r in (lv, r2, km)] for m in ("flow_ratio", "cosine_mean", "homogeneity")}
    if any(v is None for vs in vals.values() for v in vs):
        return False
    f = vals["flow_ratio"]
    c = vals["cosine_mean"]
    h = vals["homogeneity"]
    return bool(f[0] >= f[1] >= f[2] and c[2] >= c[1] >= c[0] and h[2] >= h[1] >= h[0])
