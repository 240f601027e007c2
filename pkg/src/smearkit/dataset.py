"""Labeled image manifests and the deterministic stratified split.

The split rule: per class, records are shuffled by a generator seeded from
(manifest seed, class index), then the first ``floor(train_frac * N_c)``
go to train, the next ``floor(val_frac * N_c)`` to validation, and the
remainder to test. Fractions are interpreted as decimal literals (``0.7``
means exactly 7/10), so the floor arithmetic is exact for every class size.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import DataError
from .rng import SplitMix64, derive_seed

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png"}

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class ClassLabel:
    index: int
    name: str


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered classes plus (path, label-index) records and a split seed."""

    classes: tuple[ClassLabel, ...]
    records: tuple[tuple[str, int], ...]
    seed: int = 0

    def __post_init__(self):
        indices = [c.index for c in self.classes]
        if indices != list(range(len(self.classes))):
            raise DataError("class indices must be dense and start at 0")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise DataError("class names must be unique")
        counts = [0] * len(self.classes)
        for path, label in self.records:
            if not 0 <= label < len(self.classes):
                raise DataError(f"record {path!r} has invalid label index {label}")
            counts[label] += 1
        for cls, n in zip(self.classes, counts):
            if n == 0:
                raise DataError(f"class {cls.name!r} has no records")

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)

    def class_counts(self) -> list[int]:
        counts = [0] * len(self.classes)
        for _, label in self.records:
            counts[label] += 1
        return counts


@dataclass(frozen=True)
class SplitAssignment:
    """Record indices per split; the three sets partition the manifest."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]

    def as_dict(self) -> dict[str, tuple[int, ...]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def split_sizes(n_records: int, train_frac: float, val_frac: float) -> tuple[int, int, int]:
    """(train, validation, test) counts for one class of size n_records.

    Uses exact rational arithmetic on the decimal value of each fraction.
    """
    tf = Fraction(str(train_frac))
    vf = Fraction(str(val_frac))
    n_train = math.floor(tf * n_records)
    n_val = math.floor(vf * n_records)
    return n_train, n_val, n_records - n_train - n_val


def _check_fractions(train_frac: float, val_frac: float) -> None:
    if not 0 < train_frac:
        raise ValueError(f"train fraction must be > 0, got {train_frac}")
    if val_frac < 0:
        raise ValueError(f"validation fraction must be >= 0, got {val_frac}")
    if train_frac + val_frac > 1:
        raise ValueError(
            f"train + validation fractions exceed 1: {train_frac} + {val_frac}"
        )


def split_indices(labels: list[int], num_classes: int, seed: int,
                  train_frac: float, val_frac: float,
                  class_names: tuple[str, ...] | None = None) -> SplitAssignment:
    """Stratified split of positions 0..len(labels)-1 grouped by label."""
    _check_fractions(train_frac, val_frac)
    if not labels:
        raise ValueError("cannot split an empty record list")
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for c in range(num_classes):
        members = [i for i, lab in enumerate(labels) if lab == c]
        if not members:
            raise DataError(f"class index {c} has no records to split")
        rng = SplitMix64(derive_seed(seed, c))
        rng.shuffle(members)
        n_train, n_val, _ = split_sizes(len(members), train_frac, val_frac)
        if n_train == 0 or (val_frac > 0 and n_val == 0):
            name = class_names[c] if class_names else str(c)
            warnings.warn(
                f"class {name!r} has only {len(members)} records; "
                f"floor split gives train={n_train}, validation={n_val}",
                stacklevel=2,
            )
        train.extend(members[:n_train])
        val.extend(members[n_train:n_train + n_val])
        test.extend(members[n_train + n_val:])
    return SplitAssignment(tuple(train), tuple(val), tuple(test))


def stratified_split(manifest: DatasetManifest, train_frac: float, val_frac: float) -> SplitAssignment:
    """Deterministic per-class stratified split of a manifest."""
    labels = [label for _, label in manifest.records]
    return split_indices(labels, len(manifest.classes), manifest.seed,
                         train_frac, val_frac, manifest.class_names)


def _read_metadata_and_rows(path: Path) -> tuple[dict[str, str], list[list[str]]]:
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        data_lines = []
        for raw in fh:
            line = raw.rstrip("\n").rstrip("\r")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if line.strip() == "":
                continue
            data_lines.append(line)
        rows = list(csv.reader(data_lines))
    return meta, rows


def load_manifest(path: str | Path, seed: int = 0) -> DatasetManifest:
    """Load a manifest from a CSV file or a class-per-subdirectory tree.

    Directory mode orders classes by name; file mode keeps the order of
    first appearance (or the ``# classes=`` metadata line when present).
    """
    p = Path(path)
    if p.is_dir():
        return _load_manifest_dir(p, seed)
    if p.is_file():
        return _load_manifest_csv(p, seed)
    raise DataError(f"manifest path does not exist: {p}")


def _load_manifest_dir(root: Path, seed: int) -> DatasetManifest:
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DataError(f"no class subdirectories under {root}")
    classes = tuple(ClassLabel(i, d.name) for i, d in enumerate(class_dirs))
    records: list[tuple[str, int]] = []
    seen: set[str] = set()
    for label, d in enumerate(class_dirs):
        files = sorted(
            f for f in d.iterdir()
            if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise DataError(f"class directory {d} contains no images")
        for f in files:
            key = f.as_posix()
            if key in seen:
                raise DataError(f"duplicate image path: {key}")
            seen.add(key)
            records.append((key, label))
    return DatasetManifest(classes, tuple(records), seed)


def _load_manifest_csv(path: Path, seed: int) -> DatasetManifest:
    meta, rows = _read_metadata_and_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["path", "label"]:
        raise DataError(f"manifest {path} must start with header 'path,label'")
    declared = None
    if "classes" in meta:
        declared = [name.strip() for name in meta["classes"].split(",")]
    name_to_index: dict[str, int] = {}
    if declared:
        for i, name in enumerate(declared):
            name_to_index[name] = i
    records: list[tuple[str, int]] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        rec_path, label_name = row[0], row[1]
        if rec_path in seen:
            raise DataError(f"{path}:{lineno}: duplicate image path {rec_path!r}")
        seen.add(rec_path)
        if label_name not in name_to_index:
            if declared is not None:
                raise DataError(
                    f"{path}:{lineno}: label {label_name!r} not in declared classes"
                )
            name_to_index[label_name] = len(name_to_index)
        records.append((rec_path, name_to_index[label_name]))
    if not records:
        raise DataError(f"manifest {path} has no records")
    classes = tuple(ClassLabel(i, n) for n, i in sorted(name_to_index.items(), key=lambda kv: kv[1]))
    return DatasetManifest(classes, tuple(records), seed)


def split_to_csv(manifest: DatasetManifest, split: SplitAssignment) -> str:
    """Serialize a split as ``path,label,split`` rows in manifest record order."""
    assignment: dict[int, str] = {}
    for name, indices in split.as_dict().items():
        for i in indices:
            assignment[i] = name
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "label", "split"])
    for i, (path, label) in enumerate(manifest.records):
        writer.writerow([path, manifest.classes[label].name, assignment[i]])
    return buf.getvalue()


def parse_split_csv(path: str | Path) -> list[tuple[str, str, str]]:
    """Read a split file back as (path, label, split) tuples."""
    meta, rows = _read_metadata_and_rows(Path(path))
    if not rows or [c.strip() for c in rows[0]] != ["path", "label", "split"]:
        raise DataError(f"split file {path} must start with header 'path,label,split'")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        if row[2] not in SPLIT_NAMES:
            raise DataError(f"{path}:{lineno}: unknown split name {row[2]!r}")
        out.append((row[0], row[1], row[2]))
    if not out:
        raise DataError(f"split file {path} has no records")
    return out


def split_summary(manifest: DatasetManifest, split: SplitAssignment) -> list[dict]:
    """Per-class and total counts for each split, in class order."""
    per_class = {c.index: {"class": c.name, "images": 0, "train": 0, "validation": 0, "test": 0}
                 for c in manifest.classes}
    for name, indices in split.as_dict().items():
        for i in indices:
            label = manifest.records[i][1]
            per_class[label][name] += 1
            per_class[label]["images"] += 1
    rows = [per_class[c.index] for c in manifest.classes]
    total = {"class": "Total", "images": sum(r["images"] for r in rows),
             "train": sum(r["train"] for r in rows),
             "validation": sum(r["validation"] for r in rows),
             "test": sum(r["test"] for r in rows)}
    return rows + [total]
