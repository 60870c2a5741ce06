"""Graph-convolutional node embedding trained with a flow-weighted
contrastive ratio loss.

The model is a stack of propagation layers ``H <- act(A_hat @ H @ W)`` with
ReLU on every layer but the last.  The loss is

    mean_pos(log(s_p) * d_p) / (mean_neg(d_q) + sum_{hop > eps} d_ij / log(hop_ij))

where ``d`` is the Euclidean distance between embedding rows.  Gradients are
derived by hand (no autodiff) and fed to Adam.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import InvalidConfig, Region2VecError, ShapeMismatch
from .graph import PairSet, SpatialGraph, extract_pairs, normalize_adjacency

DENOMINATOR_GUARD = 1e-12


class NoPositivePairs(Region2VecError):
    pass


class NoDenominator(Region2VecError):
    pass


class NonFiniteLoss(Region2VecError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


@dataclass(frozen=True)
class TrainingConfig:
    hidden_width: int = 64
    output_width: int = 16
    layers: int = 2
    hop_threshold: int = 2
    iterations: int = 400
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    distance_floor: float = 1e-9
    # Fraction of unordered pairs drawn per iteration; None uses every pair.
    pair_sample: float | None = None

    def __post_init__(self):
        for name in ("hidden_width", "output_width", "layers", "iterations"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be a positive integer")
        if self.hop_threshold < 1:
            raise InvalidConfig("hop_threshold must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise InvalidConfig("Adam betas must lie in (0, 1)")
        if not self.adam_epsilon > 0:
            raise InvalidConfig("adam_epsilon must be > 0")
        if not self.distance_floor > 0:
            raise InvalidConfig("distance_floor must be > 0")
        if self.pair_sample is not None and not 0 < self.pair_sample <= 1:
            raise InvalidConfig("pair_sample must lie in (0, 1]")


@dataclass
class GcnParameters:
    """Layer weights, input side first (``weights[0]`` is m x hidden)."""

    weights: list

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatch(f"layer shapes {a.shape} and {b.shape} do not chain")

    @property
    def w0(self) -> np.ndarray:
        return self.weights[0]

    @property
    def w1(self) -> np.ndarray:
        return self.weights[1]

    def copy(self) -> "GcnParameters":
        return GcnParameters([w.copy() for w in self.weights])


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params: GcnParameters) -> "AdamState":
        return cls([np.zeros_like(w) for w in params.weights], [np.zeros_like(w) for w in params.weights], 0)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    numerator: float
    negative_term: float
    hop_term: float

    @property
    def denominator(self) -> float:
        return self.negative_term + self.hop_term


@dataclass
class TrainingResult:
    z: np.ndarray
    params: GcnParameters
    # trace[t] is the loss before update t; the final entry scores the returned z.
    trace: list = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.trace[0].total

    @property
    def final_loss(self) -> float:
        return self.trace[-1].total


def init_params(n_features: int, config: TrainingConfig, rng=None) -> GcnParameters:
    """Glorot-uniform weights for every layer."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    widths = [n_features] + [config.hidden_width] * (config.layers - 1) + [config.output_width]
    weights = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    return GcnParameters(weights)


def _as_array(attributes) -> np.ndarray:
    return np.asarray(getattr(attributes, "x", attributes), dtype=np.float64)


def _forward(norm_adj, x, params):
    propagated, pre = [], []
    h = x
    last = len(params.weights) - 1
    for layer, w in enumerate(params.weights):
        p = norm_adj @ h
        out = p @ w
        propagated.append(p)
        pre.append(out)
        h = np.maximum(out, 0.0) if layer < last else out
    return h, propagated, pre


def gcn_forward(norm_adj, attributes, params: GcnParameters) -> np.ndarray:
    """Embed nodes with the propagation stack; returns an n x d matrix."""
    norm_adj = np.asarray(norm_adj, dtype=np.float64)
    x = _as_array(attributes)
    n = norm_adj.shape[0]
    if norm_adj.shape != (n, n) or x.shape[0] != n:
        raise ShapeMismatch(f"adjacency {norm_adj.shape} incompatible with attributes {x.shape}")
    if x.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(f"attributes have {x.shape[1]} columns, first layer expects {params.weights[0].shape[0]}")
    return _forward(norm_adj, x, params)[0]


def _condensed_index(n, i, j):
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return n * i - i * (i + 1) // 2 + (j - i - 1)


@dataclass
class _PairWeights:
    """Per-pair coefficients in condensed (pdist) order."""

    numerator: np.ndarray
    negative: np.ndarray
    hop: np.ndarray


def _pair_weights(n, pairs: PairSet, hops, hop_threshold, mask=None, hop_scale=1.0) -> _PairWeights:
    size = n * (n - 1) // 2
    num = np.zeros(size)
    neg = np.zeros(size)
    hop_w = np.zeros(size)

    pos_k = _condensed_index(n, pairs.positive[:, 0], pairs.positive[:, 1])
    pos_s = np.asarray(pairs.weights, dtype=np.float64)
    neg_k = _condensed_index(n, pairs.negative[:, 0], pairs.negative[:, 1])
    if mask is not None:
        keep = mask[pos_k]
        pos_k, pos_s = pos_k[keep], pos_s[keep]
        neg_k = neg_k[mask[neg_k]]
    if len(pos_k) == 0:
        raise NoPositivePairs("no pair carries a positive flow")
    np.add.at(num, pos_k, np.log(pos_s) / len(pos_k))
    if len(neg_k):
        np.add.at(neg, neg_k, 1.0 / len(neg_k))

    hops = np.asarray(hops)
    iu, ju = np.triu_indices(n, k=1)
    h = hops[iu, ju].astype(np.float64)
    active = h > hop_threshold
    if mask is not None:
        active &= mask
    # hop > eps >= 1 so log(hop) > 0
    hop_w[active] = hop_scale / np.log(h[active])
    if len(neg_k) == 0 and not active.any():
        raise NoDenominator("no negative pairs and no pair beyond the hop threshold")
    return _PairWeights(num, neg, hop_w)


def _evaluate(dist, w: _PairWeights) -> LossBreakdown:
    numerator = float(w.numerator @ dist)
    negative_term = float(w.negative @ dist)
    hop_term = float(w.hop @ dist)
    denom = negative_term + hop_term
    if denom < DENOMINATOR_GUARD:
        raise NoDenominator(f"loss denominator {denom!r} below guard {DENOMINATOR_GUARD}")
    return LossBreakdown(numerator / denom, numerator, negative_term, hop_term)


def _pairwise(z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] < 2:
        return np.zeros(0)
    return pdist(z, "euclidean")


def compute_loss(z, pairs: PairSet, hops, config: TrainingConfig) -> LossBreakdown:
    """Evaluate the ratio loss and its three components at a fixed embedding."""
    z = np.asarray(z, dtype=np.float64)
    if pairs.n_pos == 0:
        raise NoPositivePairs("no pair carries a positive flow")
    w = _pair_weights(z.shape[0], pairs, hops, config.hop_threshold)
    return _evaluate(_pairwise(z), w)


def _embedding_grad(z, dist, w: _PairWeights, loss: LossBreakdown, floor):
    denom = loss.denominator
    dl_dd = w.numerator / denom - loss.numerator * (w.negative + w.hop) / denom**2
    coef = np.zeros_like(dist)
    live = dist > floor
    coef[live] = dl_dd[live] / dist[live]
    m = squareform(coef)
    return m.sum(axis=1)[:, None] * z - m @ z


def _backward(norm_adj, params, propagated, pre, grad_out):
    grads = [None] * len(params.weights)
    g = grad_out
    for layer in range(len(params.weights) - 1, -1, -1):
        grads[layer] = propagated[layer].T @ g
        if layer == 0:
            break
        # norm_adj is symmetric
        g = (norm_adj @ (g @ params.weights[layer].T)) * (pre[layer - 1] > 0)
    return grads


def _loss_and_grads(norm_adj, x, params, w: _PairWeights, floor):
    z, propagated, pre = _forward(norm_adj, x, params)
    dist = _pairwise(z)
    loss = _evaluate(dist, w)
    grad_z = _embedding_grad(z, dist, w, loss, floor)
    return z, loss, _backward(norm_adj, params, propagated, pre, grad_z)


def compute_gradients(norm_adj, attributes, params: GcnParameters, pairs: PairSet, hops, config: TrainingConfig):
    """Analytic gradient of the loss with respect to every layer's weights.

    Returns ``(grads, loss)`` where ``grads`` is a list shaped like
    ``params.weights``.  ReLU's subgradient at 0 is taken as 0 and pairs
    closer than ``config.distance_floor`` contribute nothing.
    """
    norm_adj = np.asarray(norm_adj, dtype=np.float64)
    x = _as_array(attributes)
    if pairs.n_pos == 0:
        raise NoPositivePairs("no pair carries a positive flow")
    w = _pair_weights(norm_adj.shape[0], pairs, hops, config.hop_threshold)
    _, loss, grads = _loss_and_grads(norm_adj, x, params, w, config.distance_floor)
    return grads, loss


def adam_step(params: GcnParameters, grads, state: AdamState, config: TrainingConfig):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    new_w, new_m, new_v = [], [], []
    for w, g, m, v in zip(params.weights, grads, state.m, state.v):
        if w.shape != g.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != parameter shape {w.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_w.append(w - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon))
        new_m.append(m)
        new_v.append(v)
    return GcnParameters(new_w), AdamState(new_m, new_v, t)


def train(graph: SpatialGraph, flows, attributes, config: TrainingConfig | None = None, callback=None) -> TrainingResult:
    """Fit the embedding model end to end.

    ``callback(iteration, loss)`` is invoked after each loss evaluation.
    Raises :class:`NonFiniteLoss` (carrying the trace so far) if the loss
    stops being finite.
    """
    config = config or TrainingConfig()
    x = _as_array(attributes)
    if x.shape[0] != graph.n:
        raise ShapeMismatch(f"{x.shape[0]} attribute rows for {graph.n} nodes")
    pairs = extract_pairs(flows)
    if pairs.n_pos == 0:
        raise NoPositivePairs("flow matrix has no positive entries")

    rng = np.random.default_rng(config.seed)
    params = init_params(x.shape[1], config, rng)
    state = AdamState.zeros_like(params)
    norm_adj = normalize_adjacency(graph)
    n = graph.n
    full = _pair_weights(n, pairs, graph.hop, config.hop_threshold)

    trace = []

    def record(it, loss):
        if not math.isfinite(loss.total):
            raise NonFiniteLoss(f"loss became {loss.total} at iteration {it}", trace)
        trace.append(loss)
        if callback is not None:
            callback(it, loss)

    for it in range(config.iterations):
        if config.pair_sample is None:
            w = full
        else:
            mask = rng.random(n * (n - 1) // 2) < config.pair_sample
            try:
                w = _pair_weights(n, pairs, graph.hop, config.hop_threshold, mask, 1.0 / config.pair_sample)
            except (NoPositivePairs, NoDenominator):
                # the draw missed every positive (or every repelling) pair
                w = full
        _, loss, grads = _loss_and_grads(norm_adj, x, params, w, config.distance_floor)
        if config.pair_sample is not None:
            loss = _evaluate(_pairwise(gcn_forward(norm_adj, x, params)), full)
        record(it, loss)
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise NonFiniteLoss(f"non-finite gradient at iteration {it}", trace)
        params, state = adam_step(params, grads, state, config)

    z = gcn_forward(norm_adj, x, params)
    record(config.iterations, _evaluate(_pairwise(z), full))
    return TrainingResult(z=z, params=params, trace=trace)
