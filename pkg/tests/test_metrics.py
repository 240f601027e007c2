"""Confusion-matrix and metric-suite tests.

The four-class golden matrix comes from the blood-smear ensemble run this
tool was sized against; its per-class ratios are checked as exact integer
fractions.
"""

import csv
import io
from fractions import Fraction

import numpy as np
import pytest

from smearkit.errors import DataError
from smearkit.metrics import (
    ConfusionMatrix,
    accuracy,
    build_confusion,
    confusion_to_csv,
    f1_per_class,
    full_report,
    parse_confusion_csv,
    percent,
    precision_per_class,
    recall_per_class,
    report_from_confusion,
    report_to_csv,
    report_to_text,
)

# Rows are predicted class, columns actual class.
GOLDEN_COUNTS = np.array([
    [1479, 3, 0, 0],
    [161, 3248, 0, 2],
    [26, 3, 3198, 2],
    [6, 0, 0, 2624],
])
GOLDEN_NAMES = ("benign", "early_pre_b", "pre_b", "pro_b")


def golden_matrix():
    return ConfusionMatrix(GOLDEN_COUNTS, GOLDEN_NAMES)


def test_golden_supports_are_column_sums():
    cm = golden_matrix()
    assert cm.support().tolist() == [1672, 3254, 3198, 2628]
    assert cm.predicted_totals().tolist() == [1482, 3411, 3229, 2630]
    assert cm.total == 10752


def test_golden_accuracy_is_exact_ratio():
    assert accuracy(golden_matrix()) == 10549 / 10752
    assert percent(accuracy(golden_matrix())) == "98.11%"


def test_golden_ratios_match_integer_fractions():
    cm = golden_matrix()
    precision = precision_per_class(cm)
    recall = recall_per_class(cm)
    diag = [1479, 3248, 3198, 2624]
    rows = [1482, 3411, 3229, 2630]
    cols = [1672, 3254, 3198, 2628]
    for j in range(4):
        assert precision[j] == diag[j] / rows[j]
        assert recall[j] == diag[j] / cols[j]
        expected_f1 = 2 * Fraction(diag[j], rows[j]) * Fraction(diag[j], cols[j]) \
            / (Fraction(diag[j], rows[j]) + Fraction(diag[j], cols[j]))
        assert f1_per_class(cm)[j] == pytest.approx(float(expected_f1), rel=1e-15)


def test_build_confusion_counts_pairs():
    actual = [0, 0, 1, 1, 1, 2]
    predicted = [0, 1, 1, 1, 0, 2]
    cm = build_confusion(actual, predicted, ("a", "b", "c"))
    assert cm.counts.tolist() == [[1, 1, 0], [1, 2, 0], [0, 0, 1]]
    assert cm.support().tolist() == [2, 3, 1]
    assert accuracy(cm) == pytest.approx(4 / 6)


def test_build_confusion_errors():
    with pytest.raises(DataError):
        build_confusion([0], [0, 1], ("a", "b"))
    with pytest.raises(DataError):
        build_confusion([], [], ("a", "b"))
    with pytest.raises(DataError):
        build_confusion([0, 2], [0, 0], ("a", "b"))
    with pytest.raises(DataError):
        build_confusion([0, 0], [0, -1], ("a", "b"))


def test_confusion_matrix_validation():
    with pytest.raises(DataError):
        ConfusionMatrix(np.zeros((2, 3), dtype=int), ("a", "b"))
    with pytest.raises(DataError):
        ConfusionMatrix(np.array([[1, -1], [0, 1]]), ("a", "b"))
    with pytest.raises(DataError):
        accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=int), ("a", "b")))


def test_reports_match_hand_computation():
    report = full_report([0, 0, 1, 1, 1, 2], [0, 1, 1, 1, 0, 2], ("a", "b", "c"))
    assert report.precision == pytest.approx([1 / 2, 2 / 3, 1.0])
    assert report.recall == pytest.approx([1 / 2, 2 / 3, 1.0])
    assert report.f1 == pytest.approx([1 / 2, 2 / 3, 1.0])
    assert report.support.tolist() == [2, 3, 1]
    assert report.accuracy == pytest.approx(4 / 6)
    assert report.macro_precision == pytest.approx((1 / 2 + 2 / 3 + 1) / 3)
    assert report.total == 6
    assert not report.precision_undefined.any()


def test_micro_averages_equal_accuracy():
    # Summed over classes, true positives / total predictions reduces to
    # accuracy in single-label classification.
    gen = np.random.Generator(np.random.Philox(21))
    for _ in range(50):
        m = int(gen.integers(2, 6))
        counts = gen.integers(0, 30, size=(m, m))
        counts[0, 0] += 1  # keep the matrix non-empty
        cm = ConfusionMatrix(counts, tuple(f"c{j}" for j in range(m)))
        micro = np.trace(cm.counts) / cm.total
        assert accuracy(cm) == pytest.approx(micro)


def test_never_predicted_class_flags_undefined_precision():
    counts = np.array([[3, 1], [0, 0]])
    report = report_from_confusion(ConfusionMatrix(counts, ("a", "b")))
    assert report.precision[1] == 0.0
    assert report.precision_undefined.tolist() == [False, True]
    assert report.recall_undefined.tolist() == [False, False]
    assert report.f1_undefined.tolist() == [False, True]


def test_zero_support_class_flags_undefined_recall():
    counts = np.array([[2, 0], [1, 0]])
    report = report_from_confusion(ConfusionMatrix(counts, ("a", "b")))
    assert report.recall[1] == 0.0
    assert report.recall_undefined.tolist() == [False, True]
    assert report.f1[1] == 0.0
    assert report.f1_undefined[1]


def test_percent_rounds_half_up():
    assert percent(0.98115) == "98.12%"
    assert percent(0.98114) == "98.11%"
    assert percent(0.5) == "50.00%"
    assert percent(1.0) == "100.00%"
    assert percent(0.005, digits=0) == "1%"
    assert percent(0.12345, digits=3) == "12.345%"


def test_report_csv_round_trip_values():
    report = report_from_confusion(golden_matrix())
    rows = {r[0]: r[1:] for r in csv.reader(io.StringIO(report_to_csv(report)))
            if r and r[0] != "metric"}
    assert [float(v) for v in rows["precision"][:4]] == report.precision.tolist()
    assert [float(v) for v in rows["recall"][:4]] == report.recall.tolist()
    assert [float(v) for v in rows["f1_score"][:4]] == report.f1.tolist()
    assert [int(v) for v in rows["support"][:4]] == [1672, 3254, 3198, 2628]
    assert int(rows["support"][4]) == 10752
    assert float(rows["accuracy"][4]) == 10549 / 10752
    assert rows["precision_undefined"][:4] == ["0", "0", "0", "0"]


def test_report_csv_header():
    report = full_report([0, 1], [0, 1], ("a", "b"))
    first = report_to_csv(report).splitlines()[0]
    assert first == "metric,a,b,overall"


def test_report_text_contents():
    report = report_from_confusion(golden_matrix())
    text = report_to_text(report)
    assert "accuracy: 98.11%" in text
    assert "samples: 10752" in text
    assert "benign" in text and "macro average" in text
    assert "*" not in text
    undef = report_from_confusion(ConfusionMatrix(np.array([[3, 1], [0, 0]]), ("a", "b")))
    marked = report_to_text(undef)
    assert "*" in marked
    assert "undefined" in marked


def test_confusion_csv_round_trip(tmp_path):
    cm = golden_matrix()
    text = confusion_to_csv(cm)
    assert text.splitlines()[0] == "predicted\\actual,benign,early_pre_b,pre_b,pro_b"
    back = parse_confusion_csv(text)
    assert np.array_equal(back.counts, cm.counts)
    assert back.class_names == cm.class_names
    p = tmp_path / "confusion.csv"
    p.write_text(text)
    assert np.array_equal(parse_confusion_csv(p).counts, cm.counts)


def test_parse_confusion_errors():
    with pytest.raises(DataError):
        parse_confusion_csv("a,b\n1,2\n")
    with pytest.raises(DataError):
        parse_confusion_csv("predicted\\actual,a,b\na,1,2\n")
    with pytest.raises(DataError):
        parse_confusion_csv("predicted\\actual,a,b\na,1,2\nwrong,3,4\n")
    with pytest.raises(DataError):
        parse_confusion_csv("predicted\\actual,a,b\na,1,x\nb,3,4\n")
