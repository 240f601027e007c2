"""Per-model class-probability matrices and their interchange format.

File format (UTF-8, comma separated):

    # model=DenseNet201
    # classes=Benign,Malignant Pre-B        (optional, must match the header)
    sample_id,Benign,Malignant Pre-B
    img_0001,0.9375,0.0625

Lines starting with ``#`` are metadata. Every probability lies in [0, 1]
and every row sums to 1 within 1e-6; with ``renormalize=True`` a row whose
sum is within 1e-3 of 1 is rescaled to sum exactly, anything worse is
rejected. Values are written with shortest round-trip formatting, so a
serialize/parse cycle is lossless.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

ROW_SUM_TOLERANCE = 1e-6
RENORMALIZE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class ProbabilityMatrix:
    """N x m class probabilities from one model."""

    model_name: str
    class_names: tuple[str, ...]
    sample_ids: tuple[str, ...]
    rows: np.ndarray  # (N, m) float64

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        object.__setattr__(self, "rows", rows)
        n, m = rows.shape
        if m < 2:
            raise DataError(f"need at least 2 classes, got {m}")
        if n < 1:
            raise DataError("need at least 1 sample")
        if len(self.class_names) != m or len(self.sample_ids) != n:
            raise DataError("class_names/sample_ids lengths do not match the matrix")
        if len(set(self.sample_ids)) != n:
            raise DataError("duplicate sample ids")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise DataError("probabilities must lie in [0, 1]")
        sums = rows.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOLERANCE
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DataError(
                f"row for sample {self.sample_ids[i]!r} sums to {sums[i]!r}, "
                f"outside 1 +/- {ROW_SUM_TOLERANCE}"
            )

    @property
    def num_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def num_classes(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ModelBundle:
    """Aligned probability matrices from n models over the same samples."""

    members: tuple[ProbabilityMatrix, ...]

    def __post_init__(self):
        if not self.members:
            raise DataError("a bundle needs at least one probability matrix")
        first = self.members[0]
        for pm in self.members[1:]:
            if pm.class_names != first.class_names:
                raise DataError(
                    f"class names of {pm.model_name!r} do not match "
                    f"{first.model_name!r} (order-sensitive)"
                )
            if pm.sample_ids != first.sample_ids:
                raise DataError(
                    f"sample ids of {pm.model_name!r} do not match "
                    f"{first.model_name!r} (order-sensitive)"
                )

    @property
    def num_models(self) -> int:
        return len(self.members)

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.members[0].class_names

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return self.members[0].sample_ids


def assemble_bundle(matrices: list[ProbabilityMatrix]) -> ModelBundle:
    """Validate alignment and wrap matrices into a bundle."""
    return ModelBundle(tuple(matrices))


def _parse_lines(text: str, source: str) -> tuple[dict[str, str], list[list[str]]]:
    meta: dict[str, str] = {}
    data_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
            continue
        if line.strip() == "":
            continue
        data_lines.append(line)
    if not data_lines:
        raise DataError(f"{source}: no header row")
    return meta, list(csv.reader(data_lines))


def parse_probability_text(text: str, source: str = "<string>",
                           renormalize: bool = False) -> ProbabilityMatrix:
    meta, rows = _parse_lines(text, source)
    header = rows[0]
    if len(header) < 3 or header[0].strip() != "sample_id":
        raise DataError(
            f"{source}: header must be 'sample_id,<class>,...' with >= 2 classes"
        )
    class_names = tuple(c.strip() for c in header[1:])
    if len(set(class_names)) != len(class_names):
        raise DataError(f"{source}: duplicate class name in header")
    if "classes" in meta:
        declared = tuple(c.strip() for c in meta["classes"].split(","))
        if declared != class_names:
            raise DataError(f"{source}: '# classes=' metadata does not match the header")
    sample_ids: list[str] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        sample_ids.append(row[0])
        try:
            values.append([float(cell) for cell in row[1:]])
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: non-numeric cell ({exc})") from None
    if not values:
        raise DataError(f"{source}: no data rows")
    if len(set(sample_ids)) != len(sample_ids):
        dupes = sorted({s for s in sample_ids if sample_ids.count(s) > 1})
        raise DataError(f"{source}: duplicate sample_id {dupes[0]!r}")
    matrix = np.array(values, dtype=np.float64)
    if np.any(matrix < 0.0) or np.any(matrix > 1.0):
        i, j = np.argwhere((matrix < 0.0) | (matrix > 1.0))[0]
        raise DataError(
            f"{source}: value {matrix[i, j]!r} for sample {sample_ids[i]!r} "
            f"outside [0, 1]"
        )
    if renormalize:
        sums = matrix.sum(axis=1)
        bad = np.abs(sums - 1.0) > RENORMALIZE_TOLERANCE
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DataError(
                f"{source}: row for sample {sample_ids[i]!r} sums to {sums[i]!r}, "
                f"beyond the renormalization tolerance {RENORMALIZE_TOLERANCE}"
            )
        matrix = matrix / sums[:, None]
    model_name = meta.get("model", Path(source).stem if source != "<string>" else "model")
    return ProbabilityMatrix(model_name, class_names, tuple(sample_ids), matrix)


def parse_probability_file(path: str | Path, renormalize: bool = False) -> ProbabilityMatrix:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"probability file does not exist: {p}")
    return parse_probability_text(p.read_text(encoding="utf-8"), str(p), renormalize)


def serialize_probability_matrix(pm: ProbabilityMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"# model={pm.model_name}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", *pm.class_names])
    for sid, row in zip(pm.sample_ids, pm.rows):
        writer.writerow([sid, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def labels_to_csv(sample_ids, label_names, class_names) -> str:
    """Ground-truth file: ``# classes=`` metadata plus sample_id,label rows."""
    if len(sample_ids) != len(label_names):
        raise DataError("sample_ids and label_names must have the same length")
    buf = io.StringIO()
    buf.write(f"# classes={','.join(class_names)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "label"])
    for sid, name in zip(sample_ids, label_names):
        writer.writerow([sid, name])
    return buf.getvalue()


def parse_labels_text(text: str, source: str = "<string>"):
    """Parse a ground-truth file into (sample_ids, label_names, class_names).

    Class order comes from the ``# classes=`` metadata line when present,
    otherwise from first appearance.
    """
    meta, rows = _parse_lines(text, source)
    if not rows or [c.strip() for c in rows[0]] != ["sample_id", "label"]:
        raise DataError(f"{source}: truth file must start with header 'sample_id,label'")
    declared = None
    if "classes" in meta:
        declared = tuple(name.strip() for name in meta["classes"].split(","))
    order: list[str] = list(declared) if declared else []
    sample_ids, label_names = [], []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{source}:{lineno}: expected 2 fields, got {len(row)}")
        sid, name = row[0].strip(), row[1].strip()
        if sid in seen:
            raise DataError(f"{source}:{lineno}: duplicate sample id {sid!r}")
        seen.add(sid)
        if name not in order:
            if declared:
                raise DataError(
                    f"{source}:{lineno}: label {name!r} not in declared classes"
                )
            order.append(name)
        sample_ids.append(sid)
        label_names.append(name)
    if not sample_ids:
        raise DataError(f"{source}: no label rows")
    return tuple(sample_ids), tuple(label_names), tuple(order)


def parse_labels_file(path):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"truth file does not exist: {p}")
    return parse_labels_text(p.read_text(encoding="utf-8"), str(p))
