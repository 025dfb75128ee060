"""Directory-per-class image discovery, stratified holdout splits and k-fold plans."""

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    ClassNotFound,
    DegenerateSplit,
    EmptyClass,
    InsufficientClassSize,
    InvalidFraction,
    InvalidK,
    PathNotFound,
)
from .rng import CounterStream, fisher_yates

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

# stream ids keep split and fold shuffles independent for the same seed
_SPLIT_STREAM = 0x5350_4C49_5400_0000
_FOLD_STREAM = 0x464F_4C44_0000_0000


@dataclass(frozen=True)
class ImageRecord:
    path: str
    class_index: int
    class_name: str


@dataclass(frozen=True)
class DatasetManifest:
    classes: tuple
    records: tuple
    per_class_counts: tuple = field(default=None)

    def __post_init__(self):
        counts = [0] * len(self.classes)
        for r in self.records:
            if not 0 <= r.class_index < len(self.classes):
                raise ValueError(f"record {r.path!r} has class_index {r.class_index} "
                                 f"outside {len(self.classes)} classes")
            counts[r.class_index] += 1
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if self.per_class_counts is None:
            object.__setattr__(self, "per_class_counts", tuple(counts))
        elif tuple(self.per_class_counts) != tuple(counts):
            raise ValueError("per_class_counts disagree with records")

    def __len__(self):
        return len(self.records)

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def labels(self):
        return np.array([r.class_index for r in self.records], dtype=np.int64)


@dataclass(frozen=True)
class SplitAssignment:
    train_indices: tuple
    test_indices: tuple
    seed: int
    test_fraction: Fraction


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple
    seed: int


def scan_dataset(root_dir, class_subset=None, recursive=False):
    """Build a manifest from ``root_dir/<class name>/<image files>``.

    Class indices follow sorted class-name order; records are ordered by
    (class name, path).  With ``recursive`` images in nested directories
    are included too.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise PathNotFound(f"dataset root not found: {root}")

    available = sorted(p.name for p in root.iterdir() if p.is_dir())
    if class_subset is None:
        classes = available
    else:
        wanted = list(dict.fromkeys(class_subset))
        missing = [c for c in wanted if c not in available]
        if missing:
            raise ClassNotFound(f"no directory for class(es) {missing} under {root}")
        classes = sorted(wanted)
    if not classes:
        raise EmptyClass(f"no class directories under {root}")

    records = []
    for idx, name in enumerate(classes):
        pattern = "**/*" if recursive else "*"
        files = sorted(
            str(p) for p in (root / name).glob(pattern)
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise EmptyClass(f"class directory {root / name} contains no images")
        records.extend(ImageRecord(f, idx, name) for f in files)
    return DatasetManifest(tuple(classes), tuple(records))


def _as_fraction(value):
    # str() first so 0.2 means 1/5 rather than its binary approximation
    frac = value if isinstance(value, Fraction) else Fraction(str(value))
    if not 0 < frac < 1:
        raise InvalidFraction(f"test fraction must be in (0, 1), got {value}")
    return frac


def round_half_up(value):
    value = Fraction(value)
    return int((value + Fraction(1, 2)) // 1)


def _class_members(labels, n_classes):
    members = [[] for _ in range(n_classes)]
    for i, c in enumerate(labels):
        members[int(c)].append(i)
    return members


def holdout_test_counts(per_class_counts, test_fraction):
    frac = _as_fraction(test_fraction)
    return [round_half_up(c * frac) for c in per_class_counts]


def stratified_split(manifest, test_fraction=0.2, seed=0):
    """Per-class holdout split.

    ``manifest`` is anything with ``labels`` and ``n_classes`` (a
    :class:`DatasetManifest` or a feature matrix).  Each class gets
    ``round_half_up(count * test_fraction)`` test records, drawn as the head
    of a Fisher-Yates shuffle keyed by ``(seed, stream + class index)``.
    """
    frac = _as_fraction(test_fraction)
    members = _class_members(manifest.labels, manifest.n_classes)
    train, test = [], []
    for k, idx in enumerate(members):
        if not idx:
            raise DegenerateSplit(f"class {k} has no records")
        n_test = round_half_up(len(idx) * frac)
        if n_test >= len(idx):
            raise DegenerateSplit(
                f"class {k}: {n_test} of {len(idx)} records would go to test, leaving train empty")
        shuffled = fisher_yates(idx, CounterStream(seed, _SPLIT_STREAM + k))
        test.extend(shuffled[:n_test])
        train.extend(shuffled[n_test:])
    return SplitAssignment(tuple(sorted(train)), tuple(sorted(test)), int(seed), frac)


def stratified_kfold(manifest, k=5, seed=0):
    """Stratified k-fold plan.

    Each class is shuffled, then dealt round-robin into the folds.  The
    starting fold for class c is offset by the number of records in classes
    before c, so overall fold sizes also differ by at most one.
    """
    if int(k) != k or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k}")
    k = int(k)
    members = _class_members(manifest.labels, manifest.n_classes)
    folds = [[] for _ in range(k)]
    offset = 0
    for c, idx in enumerate(members):
        if len(idx) < k:
            raise InsufficientClassSize(f"class {c} has {len(idx)} records, fewer than k={k}")
        shuffled = fisher_yates(idx, CounterStream(seed, _FOLD_STREAM + c))
        for j, rec in enumerate(shuffled):
            folds[(offset + j) % k].append(rec)
        offset += len(idx)
    return FoldPlan(k, tuple(tuple(sorted(f)) for f in folds), int(seed))


# CSV persistence ----------------------------------------------------------

def write_manifest_csv(manifest, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "class_index", "class_name"])
        for r in manifest.records:
            w.writerow([r.path, r.class_index, r.class_name])


def read_manifest_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    names = {}
    for row in rows:
        names[int(row["class_index"])] = row["class_name"]
    classes = tuple(names[i] for i in range(len(names)))
    records = tuple(ImageRecord(r["path"], int(r["class_index"]), r["class_name"]) for r in rows)
    return DatasetManifest(classes, records)


def write_split_csv(split, path):
    n = len(split.train_indices) + len(split.test_indices)
    which = ["train"] * n
    for i in split.test_indices:
        which[i] = "test"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_index", "split"])
        for i, s in enumerate(which):
            w.writerow([i, s])


def read_split_csv(path, seed=0, test_fraction=None):
    train, test = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            (test if row["split"] == "test" else train).append(int(row["record_index"]))
    n = len(train) + len(test)
    frac = Fraction(len(test), n) if test_fraction is None else Fraction(str(test_fraction))
    return SplitAssignment(tuple(train), tuple(test), seed, frac)
