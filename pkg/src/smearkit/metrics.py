"""Multiclass confusion matrix and the evaluation metric suite.

Confusion-matrix orientation is fixed: ``counts[p][a]`` is the number of
samples of actual class ``a`` predicted as class ``p`` (rows predicted,
columns actual). Column sums are therefore the class supports. Accuracy is
trace over total; precision/recall/F1 are one-vs-rest per class. A zero
denominator yields value 0 plus an explicit undefined flag, so reports
keep a stable schema.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (m, m) int64, rows predicted, columns actual
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        m = len(self.class_names)
        if counts.shape != (m, m):
            raise DataError(f"counts shape {counts.shape} does not match {m} classes")
        if np.any(counts < 0):
            raise DataError("confusion counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        """Actual samples per class (column sums)."""
        return self.counts.sum(axis=0)

    def predicted_totals(self) -> np.ndarray:
        """Predicted samples per class (row sums)."""
        return self.counts.sum(axis=1)


def build_confusion(actual: list[int], predicted: list[int],
                    class_names: tuple[str, ...]) -> ConfusionMatrix:
    """Count (predicted, actual) pairs into an m x m matrix."""
    if len(actual) != len(predicted):
        raise DataError(
            f"actual/predicted length mismatch: {len(actual)} vs {len(predicted)}"
        )
    if len(actual) == 0:
        raise DataError("cannot build a confusion matrix from zero samples")
    m = len(class_names)
    counts = np.zeros((m, m), dtype=np.int64)
    for a, p in zip(actual, predicted):
        if not (0 <= a < m and 0 <= p < m):
            raise DataError(f"label pair ({a}, {p}) out of range for {m} classes")
        counts[p, a] += 1
    return ConfusionMatrix(counts, tuple(class_names))


def accuracy(cm: ConfusionMatrix) -> float:
    """Correctly classified over all samples (trace / total)."""
    total = cm.total
    if total == 0:
        raise DataError("empty confusion matrix")
    return float(np.trace(cm.counts)) / total


def _safe_ratios(numer: np.ndarray, denom: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    undefined = denom == 0
    values = np.zeros(len(numer), dtype=np.float64)
    ok = ~undefined
    values[ok] = numer[ok].astype(np.float64) / denom[ok].astype(np.float64)
    return values, undefined


def precision_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """diagonal / row sum per class; 0 where the class was never predicted."""
    values, _ = _safe_ratios(np.diag(cm.counts), cm.predicted_totals())
    return values


def recall_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """diagonal / column sum (support) per class; 0 for zero-support classes."""
    values, _ = _safe_ratios(np.diag(cm.counts), cm.support())
    return values


def f1_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """Harmonic mean of per-class precision and recall; 0 where degenerate."""
    p = precision_per_class(cm)
    r = recall_per_class(cm)
    out = np.zeros_like(p)
    ok = (p + r) > 0
    out[ok] = 2.0 * p[ok] * r[ok] / (p[ok] + r[ok])
    return out


@dataclass(frozen=True)
class MetricReport:
    class_names: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    precision_undefined: np.ndarray
    recall_undefined: np.ndarray
    f1_undefined: np.ndarray

    @property
    def total(self) -> int:
        return int(self.support.sum())


def report_from_confusion(cm: ConfusionMatrix) -> MetricReport:
    diag = np.diag(cm.counts)
    precision, p_undef = _safe_ratios(diag, cm.predicted_totals())
    recall, r_undef = _safe_ratios(diag, cm.support())
    f1 = np.zeros_like(precision)
    denom = precision + recall
    ok = denom > 0
    f1[ok] = 2.0 * precision[ok] * recall[ok] / denom[ok]
    f1_undef = p_undef | r_undef | ~ok
    return MetricReport(
        class_names=cm.class_names,
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.support(),
        accuracy=accuracy(cm),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        precision_undefined=p_undef,
        recall_undefined=r_undef,
        f1_undefined=f1_undef,
    )


def full_report(actual: list[int], predicted: list[int],
                class_names: tuple[str, ...]) -> MetricReport:
    """Confusion counts plus the whole metric suite in one pass."""
    return report_from_confusion(build_confusion(actual, predicted, class_names))


def percent(value: float, digits: int = 2) -> str:
    """Format a ratio as a percentage, rounding half-up at the last digit."""
    q = Decimal(1).scaleb(-digits) if digits > 0 else Decimal(1)
    d = (Decimal(repr(value)) * 100).quantize(q, rounding=ROUND_HALF_UP)
    return f"{d}%"


def report_to_csv(report: MetricReport) -> str:
    """Metric rows by class columns, raw ratios, plus macro/overall column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", *report.class_names, "overall"])
    writer.writerow(["precision", *(repr(float(v)) for v in report.precision),
                     repr(report.macro_precision)])
    writer.writerow(["recall", *(repr(float(v)) for v in report.recall),
                     repr(report.macro_recall)])
    writer.writerow(["f1_score", *(repr(float(v)) for v in report.f1),
                     repr(report.macro_f1)])
    writer.writerow(["support", *(int(v) for v in report.support), report.total])
    writer.writerow(["accuracy", *([""] * len(report.class_names)),
                     repr(report.accuracy)])
    writer.writerow(["precision_undefined",
                     *(int(v) for v in report.precision_undefined), ""])
    writer.writerow(["recall_undefined",
                     *(int(v) for v in report.recall_undefined), ""])
    writer.writerow(["f1_undefined", *(int(v) for v in report.f1_undefined), ""])
    return buf.getvalue()


def report_to_text(report: MetricReport) -> str:
    """Human-readable block; undefined entries are marked with ``*``."""
    name_w = max(len("macro average"), *(len(n) for n in report.class_names))
    lines = [
        f"samples: {report.total}    accuracy: {percent(report.accuracy)}",
        "",
        f"{'class':<{name_w}}  {'precision':>10} {'recall':>10} {'f1-score':>10} {'support':>8}",
    ]

    def cell(value, undefined):
        text = percent(float(value))
        return text + "*" if undefined else text

    for i, name in enumerate(report.class_names):
        lines.append(
            f"{name:<{name_w}}  "
            f"{cell(report.precision[i], report.precision_undefined[i]):>10} "
            f"{cell(report.recall[i], report.recall_undefined[i]):>10} "
            f"{cell(report.f1[i], report.f1_undefined[i]):>10} "
            f"{int(report.support[i]):>8}"
        )
    lines.append(
        f"{'macro average':<{name_w}}  "
        f"{percent(report.macro_precision):>10} "
        f"{percent(report.macro_recall):>10} "
        f"{percent(report.macro_f1):>10} "
        f"{report.total:>8}"
    )
    if (report.precision_undefined.any() or report.recall_undefined.any()
            or report.f1_undefined.any()):
        lines.append("")
        lines.append("* undefined (zero denominator), reported as 0")
    return "\n".join(lines) + "\n"


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    """Integer counts with class-name header row/column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["predicted\\actual", *cm.class_names])
    for i, name in enumerate(cm.class_names):
        writer.writerow([name, *(int(v) for v in cm.counts[i])])
    return buf.getvalue()


def parse_confusion_csv(path_or_text) -> ConfusionMatrix:
    """Read a confusion matrix written by :func:`confusion_to_csv`."""
    from pathlib import Path

    text = path_or_text
    p = Path(str(path_or_text))
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    rows = list(csv.reader(text.splitlines()))
    if not rows or not rows[0] or "\\" not in rows[0][0]:
        raise DataError("confusion CSV must start with a 'predicted\\actual' header")
    class_names = tuple(c.strip() for c in rows[0][1:])
    m = len(class_names)
    counts = np.zeros((m, m), dtype=np.int64)
    if len(rows) != m + 1:
        raise DataError(f"expected {m} matrix rows, got {len(rows) - 1}")
    for i, row in enumerate(rows[1:]):
        if len(row) != m + 1 or row[0].strip() != class_names[i]:
            raise DataError(f"confusion row {i + 1} does not match the header classes")
        try:
            counts[i] = [int(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"confusion row {i + 1}: {exc}") from None
    return ConfusionMatrix(counts, class_names)
