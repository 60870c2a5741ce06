import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from region2vec.metrics import (
    DegenerateMean,
    LengthMismatch,
    MetricsReport,
    NoInterFlow,
    NoPairs,
    ZeroNormRow,
    adjusted_rand,
    cosine_mean,
    evaluate,
    flow_ratio,
    homogeneity,
    homogeneity_from_classes,
    inequality,
    quantile_classes,
)


def symmetric_flows(rng, n, density=0.7):
    s = np.triu(rng.integers(1, 20, (n, n)) * (rng.random((n, n)) < density), k=1).astype(float)
    return s + s.T


def labels_with_all(rng, n, k):
    labels = rng.integers(1, k + 1, n)
    labels[:k] = np.arange(1, k + 1)
    return rng.permutation(labels)


# ---- hand values ---------------------------------------------------------


def test_flow_ratio_hand_value():
    s = np.array([[0, 4, 2], [4, 0, 0], [2, 0, 0]], dtype=float)
    assert flow_ratio(s, [1, 1, 2]) == 2.0


def test_flow_ratio_single_community():
    s = np.array([[0, 4], [4, 0]], dtype=float)
    with pytest.raises(NoInterFlow):
        flow_ratio(s, [1, 1])


def test_inequality_hand_values():
    per, med = inequality([0.4, 0.4, 0.4], [1, 1, 1])
    assert per == [0.0] and med == 0.0
    per, _ = inequality([0.0, 1.0], [1, 1])
    assert per == [1.0]
    # mean 0.4, population variance 0.08/3: ratio is exactly 1/3
    per, _ = inequality([0.2, 0.4, 0.6], [1, 1, 1])
    assert per[0] == pytest.approx(1 / 3, abs=1e-12)
    assert per[0] == pytest.approx(math.sqrt((0.08 / 3) / (0.4 * 0.6)), abs=1e-15)


def test_inequality_median_over_communities():
    per, med = inequality([0.4, 0.4, 0.0, 1.0, 0.2, 0.4, 0.6], [1, 1, 2, 2, 3, 3, 3])
    assert per == pytest.approx([0.0, 1.0, 1 / 3], abs=1e-12)
    assert med == pytest.approx(1 / 3, abs=1e-12)


def test_inequality_degenerate_mean():
    with pytest.raises(DegenerateMean):
        inequality([0.0, 0.0, 0.5], [1, 1, 2])
    with pytest.raises(LengthMismatch):
        inequality([0.5], [1, 1])


def test_cosine_hand_values():
    assert cosine_mean(np.tile([1.0, 2.0, -1.0], (4, 1)), [1, 1, 2, 2]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_mean(np.array([[1.0, 0.0], [0.0, 3.0]]), [1, 1]) == 0.0
    # one orthogonal pair and one identical pair pooled: (0 + 1) / 2
    x = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
    assert cosine_mean(x, [1, 1, 2, 2]) == pytest.approx(0.5, abs=1e-15)


def test_cosine_errors():
    with pytest.raises(NoPairs):
        cosine_mean(np.eye(3), [1, 2, 3])
    with pytest.raises(ZeroNormRow):
        cosine_mean(np.array([[0.0, 0.0], [1.0, 0.0]]), [1, 1])


def test_homogeneity_hand_values():
    values = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9]
    assert homogeneity(values, [1, 1, 1, 2, 2, 2], bins=2) == 1.0
    assert homogeneity(values, [1] * 6, bins=2) == 0.0
    # one high node moved into the low cluster: clusters {0,0,0,1} and {1,1}
    h_c = math.log(2)
    h_ck = -(3 / 6 * math.log(3 / 4) + 1 / 6 * math.log(1 / 4))
    expected = 1 - h_ck / h_c
    got = homogeneity(values, [1, 1, 1, 1, 2, 2], bins=2)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(0.4591479170272448, abs=1e-12)


def test_homogeneity_single_class_convention():
    assert homogeneity_from_classes([0, 0, 0], [1, 2, 3]) == 1.0
    assert homogeneity([0.3] * 6, [1, 1, 2, 2, 3, 3]) == 1.0


def test_quantile_classes_upper_edge():
    assert quantile_classes([1, 2, 3, 4], bins=2).tolist() == [0, 0, 1, 1]
    assert quantile_classes([0, 1, 2, 3, 4], bins=5).tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        quantile_classes([1, 2], bins=1)
    with pytest.raises(ValueError):
        homogeneity([0.1, 0.2], [1, 2], bins=5)


def test_adjusted_rand_hand_values():
    assert adjusted_rand([1, 1, 2, 2, 3], [2, 2, 3, 3, 1]) == 1.0
    assert adjusted_rand([1, 1, 1, 1], [1, 2, 1, 2]) == 0.0
    assert adjusted_rand([1, 1, 1], [1, 1, 1]) == 1.0
    with pytest.raises(LengthMismatch):
        adjusted_rand([1, 2], [1, 2, 3])


# ---- brute-force oracles on random instances ----------------------------


@pytest.mark.parametrize("seed", range(50))
def test_metrics_match_pair_and_entropy_oracles(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 13))
    k = int(rng.integers(2, 5))
    labels = labels_with_all(rng, n, k)
    s = symmetric_flows(rng, n)
    s[0, 1] = s[1, 0] = 0
    if labels[0] == labels[1]:
        labels[1] = labels[1] % k + 1
    s[0, 1] = s[1, 0] = 5.0  # guarantees some inter-community flow
    values = rng.uniform(0.05, 0.95, n)
    x = rng.normal(size=(n, 3))
    bins = int(rng.integers(2, min(6, n) + 1))

    assert flow_ratio(s, labels) == pytest.approx(oracles.flow_ratio(s.tolist(), labels.tolist()), rel=1e-12)
    per, med = inequality(values, labels)
    ref_per, ref_med = oracles.inequality(values.tolist(), labels.tolist())
    np.testing.assert_allclose(per, ref_per, rtol=1e-12)
    assert med == pytest.approx(ref_med, rel=1e-12)
    if any(np.sum(labels == c) > 1 for c in range(1, k + 1)):
        assert cosine_mean(x, labels) == pytest.approx(oracles.cosine_mean(x.tolist(), labels.tolist()), abs=1e-12)
    classes = oracles.quantile_classes(values.tolist(), bins)
    assert quantile_classes(values, bins).tolist() == classes
    assert homogeneity(values, labels, bins) == pytest.approx(oracles.homogeneity(classes, labels.tolist()), abs=1e-12)
    other = labels_with_all(rng, n, int(rng.integers(1, 5)))
    assert adjusted_rand(labels, other) == pytest.approx(oracles.adjusted_rand(labels.tolist(), other.tolist()), abs=1e-12)


def test_sklearn_agrees_on_homogeneity_and_rand():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.integers(0, 4, 30)
        b = rng.integers(0, 5, 30)
        assert adjusted_rand(a, b) == pytest.approx(sk.adjusted_rand_score(a, b), abs=1e-12)
        assert homogeneity_from_classes(a, b) == pytest.approx(sk.homogeneity_score(a, b), abs=1e-12)


# ---- properties ----------------------------------------------------------


@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_flow_ratio_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    s = symmetric_flows(rng, 8, 1.0)
    labels = labels_with_all(rng, 8, 3)
    assert flow_ratio(s * c, labels) == pytest.approx(flow_ratio(s, labels), rel=1e-12)


@given(st.integers(0, 2**31))
def test_inequality_bounded_and_relabel_invariant(seed):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0, 1, 12)
    labels = labels_with_all(rng, 12, 3)
    # an endpoint value inside a community that also holds interior values
    values[np.flatnonzero(labels == labels[0])[0]] = rng.choice([0.0, 1.0])
    values[np.flatnonzero(labels == labels[0])[1:]] = rng.uniform(0.1, 0.9, np.sum(labels == labels[0]) - 1)
    if np.sum(labels == labels[0]) == 1:
        values[0] = 0.5
    relabel = rng.permutation(3) + 1
    per, med = inequality(values, labels)
    per2, med2 = inequality(values, relabel[labels - 1])
    assert all(0 <= p <= 1 + 1e-12 for p in per)
    assert sorted(per) == pytest.approx(sorted(per2), rel=1e-12)
    assert med == pytest.approx(med2, rel=1e-12)


@settings(max_examples=60)
@given(st.integers(0, 2**31))
def test_homogeneity_permutation_and_refinement(seed):
    rng = np.random.default_rng(seed)
    n = 20
    values = rng.uniform(0, 1, n)
    labels = labels_with_all(rng, n, 3)
    perm = rng.permutation(3) + 1
    h = homogeneity(values, labels)
    assert 0 <= h <= 1
    assert homogeneity(values, perm[labels - 1]) == pytest.approx(h, abs=1e-12)
    # split one cluster in two: the refinement cannot lose homogeneity
    refined = labels.copy()
    target = np.flatnonzero(labels == 1)
    refined[target[rng.random(len(target)) < 0.5]] = 4
    assert homogeneity(values, refined) >= h - 1e-12


@given(st.integers(0, 2**31))
def test_cosine_row_scale_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(10, 4))
    labels = labels_with_all(rng, 10, 3)
    scale = rng.uniform(0.01, 100, 10)[:, None]
    c = cosine_mean(x, labels)
    assert -1 <= c <= 1
    assert cosine_mean(x * scale, labels) == pytest.approx(c, abs=1e-12)


@given(st.integers(0, 2**31))
def test_adjusted_rand_bounds_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(1, 4, 15), rng.integers(1, 6, 15)
    r = adjusted_rand(a, b)
    assert -1 <= r <= 1
    assert adjusted_rand(b, a) == pytest.approx(r, abs=1e-15)


# ---- report --------------------------------------------------------------


def test_evaluate_report_round_trip():
    rng = np.random.default_rng(3)
    s = symmetric_flows(rng, 10, 1.0)
    x = rng.normal(size=(10, 3))
    values = rng.uniform(0.1, 0.9, 10)
    labels = labels_with_all(rng, 10, 3)
    report = evaluate(s, x, values, labels, truth=labels)
    assert report.adjusted_rand == 1.0
    assert report.flow_ratio == flow_ratio(s, labels)
    assert report.inequality_median == inequality(values, labels)[1]
    text = report.to_json()
    assert set(json.loads(text)) == {
        "flow_ratio",
        "inequality_median",
        "inequality_per_community",
        "cosine_mean",
        "homogeneity",
        "adjusted_rand",
    }
    assert MetricsReport.from_json(text) == report


def test_evaluate_lenient_marks_undefined_metrics():
    s = np.array([[0, 3], [3, 0]], dtype=float)
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NoInterFlow):
        evaluate(s, x, [0.2, 0.4], [1, 1], bins=2)
    report = evaluate(s, x, [0.2, 0.4], [1, 1], bins=2, strict=False)
    assert report.flow_ratio is None and report.cosine_mean == 0.0
    assert json.loads(report.to_json())["flow_ratio"] is None
