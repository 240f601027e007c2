"""Ensemble aggregation over aligned per-model probability matrices.

``sum_of_probabilities`` adds the n per-model probabilities of each class
and predicts the class with the largest sum. The normalized scores divide
each per-class sum by the per-sample total over classes and models, which
rescales every row to sum to 1 without ever changing the argmax. The
weighted variant scales each model's contribution first; majority vote
counts per-model argmax votes and falls back to the summed probabilities
(then lowest class index) on ties.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .predict_io import ModelBundle, ProbabilityMatrix
from .errors import DataError

STRATEGIES = ("sum_of_probabilities", "weighted_sum", "majority_vote")


@dataclass(frozen=True)
class EnsembleConfig:
    strategy: str = "sum_of_probabilities"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.strategy == "weighted_sum" and self.weights is None:
            raise ValueError("weighted_sum requires weights")


@dataclass(frozen=True)
class EnsembleResult:
    strategy: str
    class_names: tuple[str, ...]
    sample_ids: tuple[str, ...]
    raw_sums: np.ndarray      # (N, m); vote counts under majority_vote
    normalized: np.ndarray    # (N, m); rows sum to 1
    predictions: np.ndarray   # (N,) class indices
    ties: np.ndarray          # (N,) bool, tie-break engaged

    @property
    def predicted_labels(self) -> list[str]:
        return [self.class_names[i] for i in self.predictions]


def _argmax_with_ties(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax (lowest index wins) plus a flag for exact ties."""
    preds = np.argmax(scores, axis=1)
    top = scores[np.arange(scores.shape[0]), preds]
    ties = (scores == top[:, None]).sum(axis=1) > 1
    return preds.astype(np.int64), ties


def _summed(bundle: ModelBundle, weights: np.ndarray | None) -> np.ndarray:
    # Accumulate in model-index order for reproducible float64 sums.
    total = np.zeros_like(bundle.members[0].rows, dtype=np.float64)
    for j, pm in enumerate(bundle.members):
        w = 1.0 if weights is None else weights[j]
        total = total + w * pm.rows
    return total


def _result(strategy: str, bundle: ModelBundle, raw: np.ndarray) -> EnsembleResult:
    denom = raw.sum(axis=1)
    if np.any(denom <= 0.0):
        raise DataError("per-sample score total is not positive; cannot normalize")
    normalized = raw / denom[:, None]
    preds, ties = _argmax_with_ties(raw)
    return EnsembleResult(strategy, bundle.class_names, bundle.sample_ids,
                          raw, normalized, preds, ties)


def sum_of_probabilities(bundle: ModelBundle) -> EnsembleResult:
    """Per-class probability sums across models; argmax prediction."""
    return _result("sum_of_probabilities", bundle, _summed(bundle, None))


def weighted_sum(bundle: ModelBundle, weights: list[float]) -> EnsembleResult:
    """Weighted per-class probability sums; argmax prediction."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (bundle.num_models,):
        raise ValueError(
            f"expected {bundle.num_models} weights, got {w.size}"
        )
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if w.sum() <= 0:
        raise ValueError("weights must not all be zero")
    return _result("weighted_sum", bundle, _summed(bundle, w))


def majority_vote(bundle: ModelBundle) -> EnsembleResult:
    """One argmax vote per model; vote ties fall back to summed probabilities."""
    n_samples = len(bundle.sample_ids)
    m = len(bundle.class_names)
    votes = np.zeros((n_samples, m), dtype=np.float64)
    for pm in bundle.members:
        picks = np.argmax(pm.rows, axis=1)
        votes[np.arange(n_samples), picks] += 1.0
    sums = _summed(bundle, None)
    top_votes = votes.max(axis=1)
    vote_tied = (votes == top_votes[:, None]).sum(axis=1) > 1
    # Restrict the SoP fallback to the tied classes; argmax takes the lowest
    # index when the fallback scores tie as well.
    masked_sums = np.where(votes == top_votes[:, None], sums, -np.inf)
    preds = np.where(vote_tied,
                     np.argmax(masked_sums, axis=1),
                     np.argmax(votes, axis=1)).astype(np.int64)
    denom = votes.sum(axis=1)
    normalized = votes / denom[:, None]
    return EnsembleResult("majority_vote", bundle.class_names, bundle.sample_ids,
                          votes, normalized, preds, vote_tied)


def run_ensemble(bundle: ModelBundle, config: EnsembleConfig) -> EnsembleResult:
    if config.strategy == "sum_of_probabilities":
        return sum_of_probabilities(bundle)
    if config.strategy == "weighted_sum":
        return weighted_sum(bundle, list(config.weights))
    return majority_vote(bundle)


def result_scores_matrix(result: EnsembleResult) -> ProbabilityMatrix:
    """Normalized ensemble scores in the probability-file shape."""
    return ProbabilityMatrix(f"ensemble_{result.strategy}", result.class_names,
                             result.sample_ids, result.normalized)


def predictions_to_csv(result: EnsembleResult) -> str:
    """``sample_id,predicted_label,tie_flag`` rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "predicted_label", "tie_flag"])
    for sid, pred, tie in zip(result.sample_ids, result.predictions, result.ties):
        writer.writerow([sid, result.class_names[pred], int(tie)])
    return buf.getvalue()


def parse_predictions_csv(path_or_text) -> list[tuple[str, str, bool]]:
    """Read (sample_id, predicted_label, tie_flag) rows back from CSV."""
    text = str(path_or_text)
    p = Path(text)
    source = "<string>"
    if p.is_file():
        text = p.read_text(encoding="utf-8")
        source = str(p)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["sample_id", "predicted_label", "tie_flag"]:
        raise DataError(
            f"{source}: predictions must start with header 'sample_id,predicted_label,tie_flag'"
        )
    out = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{source}:{lineno}: expected 3 fields, got {len(row)}")
        sid = row[0].strip()
        if sid in seen:
            raise DataError(f"{source}:{lineno}: duplicate sample id {sid!r}")
        seen.add(sid)
        if row[2].strip() not in ("0", "1"):
            raise DataError(f"{source}:{lineno}: tie_flag must be 0 or 1")
        out.append((sid, row[1].strip(), row[2].strip() == "1"))
    if not out:
        raise DataError(f"{source}: no prediction rows")
    return out
