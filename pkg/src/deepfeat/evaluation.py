"""Confusion matrices, per-class metrics, cross-validation and grid search over C."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FoldPlan, SplitAssignment
from .errors import DegenerateFold, EmptyInput, LabelRange
from .linear_head import TrainConfig, fit, predict

DEFAULT_GRID = (0.001, 0.01, 0.1, 1.0)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class
    class_names: tuple

    @property
    def k(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    """One-vs-rest metrics for a class; ``None`` marks a zero denominator."""

    precision: float
    recall: float
    specificity: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_specificity: float
    confusion: ConfusionMatrix


def confusion_matrix(y_true, y_pred, k, class_names=None):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} true vs {y_pred.size} predicted labels")
    if y_true.size == 0:
        raise EmptyInput("no labels to compare")
    both = np.concatenate([y_true, y_pred])
    if both.min() < 0 or both.max() >= k:
        raise LabelRange(f"labels must lie in [0, {k})")
    counts = np.bincount(y_true * k + y_pred, minlength=k * k).reshape(k, k)
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(k))
    return ConfusionMatrix(counts, names)


def _ratio(num, den):
    return None if den == 0 else num / den


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def metrics_from_cm(cm):
    counts = np.asarray(cm.counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise EmptyInput("confusion matrix is empty")
    per_class = []
    for c in range(counts.shape[0]):
        tp = int(counts[c, c])
        fn = int(counts[c].sum()) - tp
        fp = int(counts[:, c].sum()) - tp
        tn = total - tp - fn - fp
        p = _ratio(tp, tp + fp)
        r = _ratio(tp, tp + fn)
        if p is None or r is None:
            f1 = None
        else:
            f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        per_class.append(ClassMetrics(p, r, _ratio(tn, tn + fp), f1, tp + fn))
    return MetricsReport(
        accuracy=float(np.trace(counts)) / total,
        per_class=tuple(per_class),
        macro_precision=_mean_defined(m.precision for m in per_class),
        macro_recall=_mean_defined(m.recall for m in per_class),
        macro_f1=_mean_defined(m.f1 for m in per_class),
        macro_specificity=_mean_defined(m.specificity for m in per_class),
        confusion=cm,
    )


def evaluate(model, features, indices=None):
    sub = features if indices is None else features.subset(indices)
    pred = predict(model, sub.values)
    cm = confusion_matrix(sub.labels, pred, features.n_classes, features.class_names)
    return metrics_from_cm(cm), pred


# protocols --------------------------------------------------------------------

@dataclass
class FoldRun:
    report: MetricsReport
    test_indices: tuple
    iterations: int
    converged: bool


@dataclass
class CVResult:
    folds: list
    mean_accuracy: float

    @property
    def reports(self):
        return [f.report for f in self.folds]


def _train_on(features, train_idx, config):
    train = features.subset(train_idx)
    missing = sorted(set(range(features.n_classes)) - set(np.unique(train.labels).tolist()))
    if missing:
        raise DegenerateFold(f"classes {missing} absent from the training part")
    return fit(train, config=config)


def holdout_run(features, split, config):
    model = _train_on(features, split.train_indices, config)
    report, _ = evaluate(model, features, split.test_indices)
    return FoldRun(report, tuple(split.test_indices), model.info["iterations"],
                   model.info["converged"]), model


def cross_validate(features, plan, config):
    """Train on all folds but one, score the held-out fold, for every fold in order."""
    n = features.n
    runs = []
    for f, test_idx in enumerate(plan.folds):
        test_set = set(test_idx)
        train_idx = [i for i in range(n) if i not in test_set]
        try:
            model = _train_on(features, train_idx, config)
        except DegenerateFold as exc:
            raise DegenerateFold(f"fold {f}: {exc}") from exc
        report, _ = evaluate(model, features, test_idx)
        runs.append(FoldRun(report, tuple(test_idx), model.info["iterations"],
                            model.info["converged"]))
    mean = float(np.mean([r.report.accuracy for r in runs]))
    return CVResult(runs, mean)


@dataclass
class CScore:
    C: float
    mean_accuracy: float
    runs: list
    model: object = field(default=None, repr=False)  # holdout only

    @property
    def accuracies(self):
        return [r.report.accuracy for r in self.runs]


@dataclass
class GridSearchResult:
    grid: tuple
    per_C: list
    best_C: float
    protocol: str

    @property
    def best(self):
        return next(s for s in self.per_C if s.C == self.best_C)


def _score_one(features, protocol, config):
    if isinstance(protocol, SplitAssignment):
        run, model = holdout_run(features, protocol, config)
        return CScore(config.C, run.report.accuracy, [run], model)
    if isinstance(protocol, FoldPlan):
        cv = cross_validate(features, protocol, config)
        return CScore(config.C, cv.mean_accuracy, cv.folds)
    raise TypeError(f"protocol must be a SplitAssignment or FoldPlan, got {type(protocol).__name__}")


def select_best(scores):
    """Highest mean accuracy; ties go to the smallest C."""
    return min(scores, key=lambda s: (-s.mean_accuracy, s.C)).C


def grid_search(features, protocol, grid=DEFAULT_GRID, base_config=TrainConfig(), workers=1):
    grid = tuple(float(c) for c in grid)
    if not grid:
        raise ValueError("grid must not be empty")
    if any(not c > 0 for c in grid):
        raise ValueError("every C in the grid must be positive")
    configs = [replace(base_config, C=c) for c in grid]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda cfg: _score_one(features, protocol, cfg), configs))
    else:
        scores = [_score_one(features, protocol, cfg) for cfg in configs]
    name = "holdout" if isinstance(protocol, SplitAssignment) else "cv"
    return GridSearchResult(grid, scores, select_best(scores), name)


# serialization ------------------------------------------------------------------

def report_to_dict(report, protocol=None, C=None, iterations=None, converged=None):
    cm = report.confusion
    return {
        "protocol": protocol,
        "C": C,
        "accuracy": report.accuracy,
        "per_class": [
            {"class": name, "precision": m.precision, "recall": m.recall,
             "specificity": m.specificity, "f1": m.f1, "support": m.support}
            for name, m in zip(cm.class_names, report.per_class)
        ],
        "macro": {
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
            "specificity": report.macro_specificity,
        },
        "confusion_matrix": cm.counts.tolist(),
        "iterations": iterations,
        "converged": converged,
    }


def grid_result_to_dict(result):
    return {
        "protocol": result.protocol,
        "grid": list(result.grid),
        "best_C": result.best_C,
        "per_C": [
            {
                "C": s.C,
                "mean_accuracy": s.mean_accuracy,
                "accuracies": s.accuracies,
                "reports": [report_to_dict(r.report, result.protocol, s.C, r.iterations, r.converged)
                            for r in s.runs],
            }
            for s in result.per_C
        ],
    }


def summed_confusion(score):
    """Confusion counts pooled over every run (folds) of one C."""
    first = score.runs[0].report.confusion
    counts = sum(r.report.confusion.counts for r in score.runs)
    return ConfusionMatrix(np.asarray(counts), first.class_names)


def write_confusion_csv(cm, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\predicted", *cm.class_names])
        for name, row in zip(cm.class_names, cm.counts.tolist()):
            w.writerow([name, *row])
