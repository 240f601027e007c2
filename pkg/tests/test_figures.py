"""Figure rendering tests: valid SVG output, byte determinism, no timestamps."""

import numpy as np

from smearkit.figures import confusion_matrix_svg, scores_heatmap_svg, training_curves_svg
from smearkit.metrics import ConfusionMatrix
from smearkit.trainer import EpochRecord

CM = ConfusionMatrix(np.array([[8, 2], [1, 9]]), ("benign", "malignant"))

HISTORY = (EpochRecord(1, 0.9, 0.55, 0.85, 0.60),
           EpochRecord(2, 0.6, 0.70, 0.58, 0.72),
           EpochRecord(3, 0.4, 0.85, 0.45, 0.80))


def test_confusion_matrix_svg_structure():
    data = confusion_matrix_svg(CM)
    assert data.startswith(b"<?xml")
    assert b"<svg" in data
    text = data.decode("utf-8")
    assert "benign" in text and "malignant" in text


def test_svg_rendering_is_byte_deterministic():
    assert confusion_matrix_svg(CM) == confusion_matrix_svg(CM)
    assert training_curves_svg(HISTORY) == training_curves_svg(HISTORY)


def test_svg_has_no_creation_date():
    data = confusion_matrix_svg(CM)
    assert b"<dc:date>" not in data


def test_training_curves_svg_renders():
    data = training_curves_svg(HISTORY)
    assert data.startswith(b"<?xml")
    assert b"Loss" in data and b"Accuracy" in data


def test_scores_heatmap_caps_rows():
    n = 55
    gen = np.random.Generator(np.random.Philox(1))
    raw = gen.random((n, 3))
    scores = raw / raw.sum(axis=1, keepdims=True)
    ids = [f"s{i}" for i in range(n)]
    data = scores_heatmap_svg(("a", "b", "c"), ids, scores)
    text = data.decode("utf-8")
    assert "first 40 samples" in text
    small = scores_heatmap_svg(("a", "b", "c"), ids[:5], scores[:5])
    assert "first" not in small.decode("utf-8")
