"""Bundled two-arcs toy dataset and the numeric feature-file format.

The dataset is two interleaved half-circles ("outer" and "inner") with
Gaussian jitter, generated deterministically from a seed. It is small
enough to train in seconds yet non-linear enough that the dense classifier
has real work to do, which makes it the fixture for end-to-end runs.

Feature files are CSV: an optional ``# classes=`` metadata line, a header
``sample_id,<feature names...>,label``, then one row per sample with float
features and a class-name label.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import SplitMix64

DEFAULT_PER_CLASS = 2000
DEFAULT_NOISE = 0.12
DEFAULT_TOY_SEED = 7
TOY_CLASS_NAMES = ("outer", "inner")
# Spreads the unit-circle geometry so gradients are not vanishingly small
# at the small learning rates the training defaults use.
FEATURE_SCALE = 4.0


@dataclass(frozen=True)
class FeatureSet:
    """Numeric features with aligned labels and stable sample ids."""

    sample_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    features: np.ndarray  # (N, d) float64
    labels: tuple[int, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        n, d = len(self.sample_ids), len(self.feature_names)
        if feats.shape != (n, d):
            raise DataError(f"feature block {feats.shape} does not match {n}x{d}")
        if len(self.labels) != n:
            raise DataError(f"{len(self.labels)} labels for {n} samples")
        if len(set(self.sample_ids)) != n:
            raise DataError("sample ids must be unique")
        if n == 0 or len(self.class_names) < 2:
            raise DataError("need at least one sample and two classes")
        if any(not 0 <= lab < len(self.class_names) for lab in self.labels):
            raise DataError("label index out of range")
        if not np.isfinite(feats).all():
            raise DataError("features must be finite")

    @property
    def num_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def num_features(self) -> int:
        return len(self.feature_names)

    def label_names(self) -> tuple[str, ...]:
        return tuple(self.class_names[lab] for lab in self.labels)


def two_arcs(per_class: int = DEFAULT_PER_CLASS, noise: float = DEFAULT_NOISE,
             seed: int = DEFAULT_TOY_SEED) -> FeatureSet:
    """Two interleaved noisy half-circles, one per class.

    The outer arc is the upper unit half-circle; the inner arc is the lower
    half-circle shifted right by 1 and up by 0.5. Angles and jitter come
    from one seeded stream: per class, ``per_class`` angle draws then
    ``2 * per_class`` normal draws, row-major over (sample, coordinate).
    """
    if per_class < 1:
        raise DataError(f"per_class must be >= 1, got {per_class}")
    if noise < 0:
        raise DataError(f"noise must be >= 0, got {noise}")
    rng = SplitMix64(seed)
    blocks = []
    for c in range(2):
        angles = rng.floats(per_class) * math.pi
        jitter = rng.normals(2 * per_class).reshape(per_class, 2) * noise
        if c == 0:
            base = np.column_stack([np.cos(angles), np.sin(angles)])
        else:
            base = np.column_stack([1.0 - np.cos(angles), 0.5 - np.sin(angles)])
        blocks.append(base + jitter)
    features = np.vstack(blocks) * FEATURE_SCALE
    labels = tuple([0] * per_class + [1] * per_class)
    width = len(str(2 * per_class - 1))
    sample_ids = tuple(f"arc{i:0{width}d}" for i in range(2 * per_class))
    return FeatureSet(sample_ids, ("x", "y"), features, labels, TOY_CLASS_NAMES)


def features_to_csv(fs: FeatureSet) -> str:
    buf = io.StringIO()
    buf.write(f"# classes={','.join(fs.class_names)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", *fs.feature_names, "label"])
    for sid, row, lab in zip(fs.sample_ids, fs.features, fs.labels):
        writer.writerow([sid, *(repr(float(v)) for v in row), fs.class_names[lab]])
    return buf.getvalue()


def parse_feature_csv(text: str, source: str = "<string>") -> FeatureSet:
    declared = None
    data_lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("classes="):
                declared = tuple(
                    name.strip() for name in body[len("classes="):].split(",")
                )
            continue
        data_lines.append(raw)
    rows = list(csv.reader(data_lines))
    if not rows or len(rows[0]) < 3 or rows[0][0].strip() != "sample_id" \
            or rows[0][-1].strip() != "label":
        raise DataError(f"{source}: header must be sample_id,<features...>,label")
    feature_names = tuple(c.strip() for c in rows[0][1:-1])

    class_order: list[str] = list(declared) if declared else []
    sample_ids, labels, feats = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise DataError(
                f"{source}:{lineno}: expected {len(rows[0])} fields, got {len(row)}"
            )
        sid, label_name = row[0].strip(), row[-1].strip()
        try:
            values = [float(v) for v in row[1:-1]]
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric feature value") from None
        if label_name not in class_order:
            if declared:
                raise DataError(
                    f"{source}:{lineno}: label {label_name!r} not in declared classes"
                )
            class_order.append(label_name)
        sample_ids.append(sid)
        labels.append(class_order.index(label_name))
        feats.append(values)
    if not sample_ids:
        raise DataError(f"{source}: no samples")
    if len(set(sample_ids)) != len(sample_ids):
        raise DataError(f"{source}: duplicate sample ids")
    return FeatureSet(
        tuple(sample_ids), feature_names,
        np.asarray(feats, dtype=np.float64), tuple(labels), tuple(class_order),
    )


def parse_feature_file(path) -> FeatureSet:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    return parse_feature_csv(text, source=str(path))


def subset(fs: FeatureSet, indices) -> FeatureSet:
    """A FeatureSet restricted to the given positions, order preserved."""
    idx = list(indices)
    return FeatureSet(
        tuple(fs.sample_ids[i] for i in idx),
        fs.feature_names,
        fs.features[idx],
        tuple(fs.labels[i] for i in idx),
        fs.class_names,
    )
