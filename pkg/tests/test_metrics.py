"""Metrics: confusion counting, per-class ratios with the 0/0 convention,
balanced accuracy, midrank AUC against a pair-counting oracle, the combined
metric's published-table arithmetic, and heatmap/CSV round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavenet import metrics as M
from cavenet.rng import Rng

# (avg AUC, avg balanced accuracy, combined) leaderboard rows
LEADERBOARD = [
    ("VGG19", 0.5255, 0.1445, 0.3349),
    ("Xception", 0.5341, 0.1313, 0.3327),
    ("ResNet50V2", 0.5422, 0.1773, 0.3597),
    ("MobileNetV2", 0.5485, 0.1140, 0.3312),
    ("InceptionV3", 0.5250, 0.1284, 0.3267),
    ("InceptionResNetV2", 0.5232, 0.1469, 0.33505),
    ("CAVE-Net", 0.7271482, 0.3359341, 0.5315),
]


# ---------------------------------------------------------------------------
# confusion


def test_confusion_perfect_diagonal():
    y = np.array([0, 0, 1, 2, 2, 2])
    cm = M.confusion(y, y, 3)
    assert np.array_equal(cm, np.diag([2, 1, 3]))


def test_confusion_hand_count():
    cm = M.confusion([0, 0, 1], [0, 1, 1], 2)
    assert np.array_equal(cm, [[1, 1], [0, 1]])


def test_confusion_row_sums_are_supports():
    rng = Rng(21)
    y = rng.integers(5, 300)
    p = rng.integers(5, 300)
    cm = M.confusion(y, p, 5)
    assert np.array_equal(cm.sum(axis=1), np.bincount(y, minlength=5))
    assert cm.sum() == 300


def test_confusion_rejects_out_of_range():
    with pytest.raises(M.MetricsError):
        M.confusion([0, 3], [0, 1], 3)


# ---------------------------------------------------------------------------
# per-class metrics


def test_perfect_diagonal_all_ones():
    cm = np.diag([5, 3, 7])
    for m in M.per_class_metrics(cm):
        assert m.sensitivity == m.specificity == m.precision == m.f1 == 1.0
        assert not m.undefined


def test_binary_hand_oracle():
    cm = np.array([[8, 2], [1, 9]])
    m0 = M.per_class_metrics(cm)[0]
    assert m0.sensitivity == pytest.approx(0.8)
    assert m0.precision == pytest.approx(8 / 9)
    assert m0.specificity == pytest.approx(0.9)
    assert m0.f1 == pytest.approx(2 * (8 / 9) * 0.8 / (8 / 9 + 0.8))
    assert M.accuracy(cm) == pytest.approx(17 / 20)
    assert M.balanced_accuracy(cm) == pytest.approx(0.85)


def test_zero_prediction_class_flagged():
    cm = np.array([[5, 0], [3, 0]])  # nothing predicted as class 1
    m1 = M.per_class_metrics(cm)[1]
    assert "precision" in m1.undefined
    assert m1.precision == 0.0


def test_metric_integer_identities():
    rng = Rng(77)
    y = rng.integers(4, 200)
    p = rng.integers(4, 200)
    cm = M.confusion(y, p, 4)
    for j, m in enumerate(M.per_class_metrics(cm)):
        support = int(cm[j].sum())
        assert m.tp + m.fn == support
        if support:
            assert m.sensitivity * support == pytest.approx(m.tp)


def test_balanced_accuracy_excludes_empty_support():
    cm = np.array([[4, 0, 0], [0, 6, 0], [0, 0, 0]])
    assert M.balanced_accuracy(cm) == 1.0


def test_uniform_random_balanced_accuracy_near_chance():
    rng = Rng(3030)
    c = 5
    y = rng.integers(c, 20_000)
    p = rng.integers(c, 20_000)
    cm = M.confusion(y, p, c)
    assert abs(M.balanced_accuracy(cm) - 1 / c) < 0.02


# ---------------------------------------------------------------------------
# AUC


def test_auc_perfect_separation():
    probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
    labels = np.array([0, 0, 1, 1])
    assert M.macro_auc(probs, labels) == 1.0


def test_auc_constant_scores_half():
    probs = np.full((10, 2), 0.5)
    labels = np.array([0, 1] * 5)
    assert M.macro_auc(probs, labels) == 0.5


def test_auc_skips_single_class_and_flags():
    probs = np.array([[0.6, 0.4], [0.7, 0.3]])
    aucs = M.one_vs_rest_aucs(probs, np.array([0, 0]))
    assert aucs == [None, None]
    with pytest.raises(M.MetricsError):
        M.macro_auc(probs, np.array([0, 0]))


def _pair_count_auc(scores, pos_mask):
    pos = scores[pos_mask]
    neg = scores[~pos_mask]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_auc_matches_pair_counting_oracle_exactly():
    rng = Rng(880)
    for i in range(50):
        r = rng.fork(i)
        n = 20
        labels = (r.uniform(n) < 0.5).astype(np.int64)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # quantised scores so ties actually occur
        scores = np.round(r.uniform(n), 1)
        probs = np.stack([1 - scores, scores], axis=1)
        ours = M.one_vs_rest_aucs(probs, labels)[1]
        oracle = _pair_count_auc(scores, labels == 1)
        assert ours == oracle, f"case {i}: {ours} != {oracle}"


def test_auc_invariant_under_monotone_transforms():
    rng = Rng(881)
    n = 40
    labels = rng.integers(2, n)
    scores = rng.uniform(n)
    base_probs = np.stack([1 - scores, scores], axis=1)
    base = M.one_vs_rest_aucs(base_probs, labels)[1]
    for transform in (np.exp, lambda s: 3.0 * s + 7.0):
        warped = transform(scores)
        probs = np.stack([warped.max() - warped, warped], axis=1)
        assert M.one_vs_rest_aucs(probs, labels)[1] == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# combined metric


def test_combined_metric_reproduces_leaderboard_rows():
    for name, auc, bal, expected in LEADERBOARD:
        got = M.combined_metric(auc, bal)
        assert abs(got - expected) <= 5e-4, f"{name}: {got} vs {expected}"


def test_combined_metric_extremes():
    assert M.combined_metric(1.0, 1.0) == 1.0
    with pytest.raises(M.MetricsError):
        M.combined_metric(1.2, 0.5)


# ---------------------------------------------------------------------------
# reports and exports


def test_report_values_in_range_and_macros():
    rng = Rng(99)
    labels = rng.integers(3, 200)
    raw = rng.uniform((200, 3)) + 1e-6
    probs = raw / raw.sum(axis=1, keepdims=True)
    report = M.report_from_predictions(labels, probs, 3)
    assert report.values_in_range()
    per = report.per_class
    assert report.macro_sensitivity == pytest.approx(
        np.mean([m.sensitivity for m in per]))
    assert report.combined == pytest.approx(
        (report.macro_auc + report.balanced_accuracy) / 2)


def test_heatmap_and_csv_roundtrip(tmp_path):
    cm = np.array([[5, 1, 0], [0, 7, 0], [0, 0, 0]])
    img = str(tmp_path / "h.ppm")
    csvp = str(tmp_path / "h.csv")
    M.export_heatmap(cm, img, csvp)
    assert np.array_equal(M.read_confusion_csv(csvp), cm)
    blob1 = open(img, "rb").read()
    M.export_heatmap(cm, img, csvp)
    assert open(img, "rb").read() == blob1  # bit-exact rerender
    # identity cm renders a max-intensity diagonal, zero rows stay dark
    from cavenet.data import io as dio
    ident = np.diag([3, 3])
    M.export_heatmap(ident, img)
    rendered = dio.read_ppm(img)
    cell = M.HEATMAP_CELL
    assert rendered[0, 0, 0] == 1.0
    assert rendered[0, 0, cell] == 0.0


def test_report_csv_layout(tmp_path):
    cm = np.diag([4, 4])
    report = M.report_from_confusion(cm)
    path = str(tmp_path / "report.csv")
    M.write_report_csv(path, [("perfect", report)])
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "model,avg_acc,avg_specificity,avg_sensitivity,avg_f1,avg_precision"
    assert lines[1].startswith("perfect,1.0,1.0,1.0,1.0,1.0")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(10, 60), st.integers(0, 2 ** 31))
def test_report_total_and_support_identities(c, n, seed):
    rng = Rng(seed)
    y = rng.integers(c, n)
    p = rng.integers(c, n)
    cm = M.confusion(y, p, c)
    assert cm.sum() == n
    per = M.per_class_metrics(cm)
    for j in range(c):
        assert per[j].tp + per[j].fn == int(cm[j].sum())
        assert per[j].tp + per[j].fp == int(cm[:, j].sum())
