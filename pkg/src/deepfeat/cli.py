"""Command-line entry point: ``deepfeat {scan,extract,train-eval,report}``.

Settings come from an optional JSON config file (``--config``) whose keys
match the long flag names with dashes turned into underscores, e.g.::

    {"data": "COVID-19 Radiography Database", "backbone": "resnet50_conv.onnx",
     "cache": "features.dfc", "protocol": "holdout", "test_fraction": 0.2,
     "grid": [0.001, 0.01, 0.1, 1], "out": "runs/three_class"}

Flags given on the command line override the file.

Exit codes: 0 success, 2 input/dataset problem, 3 backbone contract
violation, 4 refusal to overwrite, 5 training failure.
"""

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cache import load_cache, save_cache
from .dataset import (
    read_manifest_csv,
    scan_dataset,
    stratified_kfold,
    stratified_split,
    write_manifest_csv,
    write_split_csv,
)
from .errors import ContractViolation, DatasetError, DeepFeatError, FormatError
from .evaluation import (
    DEFAULT_GRID,
    ConfusionMatrix,
    grid_result_to_dict,
    grid_search,
    metrics_from_cm,
    report_to_dict,
    summed_confusion,
    write_confusion_csv,
)
from .extractor import PreprocessConfig, extract_features, load_backbone
from .figures import render_confusion_svg
from .linear_head import TrainConfig, fit
from .modelfile import save_model, save_model_json

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKBONE = 3
EXIT_EXISTS = 4
EXIT_TRAINING = 5


@dataclass
class PipelineConfig:
    data: str = None
    classes: list = None
    manifest: str = None
    backbone: str = None
    cache: str = None
    protocol: str = "holdout"
    test_fraction: float = 0.2
    folds: int = 5
    grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    mode: str = None
    seed: int = 0
    out: str = "out"
    force: bool = False
    batch_size: int = 16
    workers: int = 1
    standardize: bool = False
    max_iter: int = 1000
    recursive: bool = False


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _grid(text):
    return [float(t) for t in _csv_list(text)]


def build_parser():
    parser = argparse.ArgumentParser(prog="deepfeat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    def dataset_flags(p):
        p.add_argument("--data", default=argparse.SUPPRESS, help="dataset root (one directory per class)")
        p.add_argument("--classes", type=_csv_list, default=argparse.SUPPRESS,
                       help="comma-separated class subset, e.g. Normal,COVID")
        p.add_argument("--recursive", action="store_true", default=argparse.SUPPRESS,
                       help="include images in nested class sub-directories")

    p = sub.add_parser("scan", help="discover images and write manifest.csv")
    common(p)
    dataset_flags(p)

    p = sub.add_parser("extract", help="run images through the backbone into a DFC1 cache")
    common(p)
    dataset_flags(p)
    p.add_argument("--manifest", default=argparse.SUPPRESS, help="use an existing manifest CSV")
    p.add_argument("--backbone", default=argparse.SUPPRESS, help="ONNX file or mock:<seed>")
    p.add_argument("--cache", default=argparse.SUPPRESS)
    p.add_argument("--batch-size", type=int, default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    p.add_argument("--force", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("train-eval", help="grid-search C on a cached feature matrix")
    common(p)
    p.add_argument("--cache", default=argparse.SUPPRESS)
    p.add_argument("--protocol", choices=["holdout", "cv"], default=argparse.SUPPRESS)
    p.add_argument("--test-fraction", type=float, default=argparse.SUPPRESS)
    p.add_argument("--folds", type=int, default=argparse.SUPPRESS)
    p.add_argument("--grid", type=_grid, default=argparse.SUPPRESS, help="comma-separated C values")
    p.add_argument("--mode", choices=["binary", "multinomial", "one_vs_rest"], default=argparse.SUPPRESS)
    p.add_argument("--standardize", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--max-iter", type=int, default=argparse.SUPPRESS)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("report", help="summarize a train-eval output directory")
    common(p)
    return parser


def resolve_config(args):
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_INPUT)
    values.update({k: v for k, v in vars(args).items() if k not in ("config", "command")})
    known = PipelineConfig.__dataclass_fields__
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise CliError(f"unknown config keys: {unknown}", EXIT_INPUT)
    cfg = PipelineConfig(**values)
    if isinstance(cfg.classes, str):
        cfg.classes = _csv_list(cfg.classes)
    if isinstance(cfg.grid, str):
        cfg.grid = _grid(cfg.grid)
    if not cfg.grid:
        raise CliError("grid must not be empty", EXIT_INPUT)
    return cfg


def _run_info(started):
    return {
        "started_unix": round(started, 3),
        "elapsed_s": round(time.time() - started, 3),
        "deepfeat": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _require(value, flag):
    if value is None:
        raise CliError(f"missing required setting {flag}", EXIT_INPUT)
    return value


def _manifest(cfg):
    if cfg.manifest:
        try:
            return read_manifest_csv(cfg.manifest)
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot read manifest {cfg.manifest}: {exc}", EXIT_INPUT)
    try:
        return scan_dataset(_require(cfg.data, "--data"), cfg.classes, recursive=cfg.recursive)
    except DatasetError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_INPUT)


def cmd_scan(cfg):
    manifest = _manifest(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest_csv(manifest, out / "manifest.csv")
    for name, count in zip(manifest.classes, manifest.per_class_counts):
        print(f"{name}\t{count}")
    print(f"total\t{len(manifest)}")
    return EXIT_OK


def cmd_extract(cfg):
    cache = Path(_require(cfg.cache, "--cache"))
    if cache.exists() and not cfg.force:
        raise CliError(f"{cache} exists; pass --force to overwrite", EXIT_EXISTS)
    backbone_uri = _require(cfg.backbone, "--backbone")
    manifest = _manifest(cfg)
    try:
        backbone = load_backbone(backbone_uri)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_INPUT)
    except ContractViolation as exc:
        raise CliError(f"backbone contract violation: {exc}", EXIT_BACKBONE)

    def progress(done, total):
        print(f"extracted {done}/{total}", file=sys.stderr)

    try:
        features = extract_features(backbone, manifest, PreprocessConfig(),
                                    batch_size=cfg.batch_size, workers=cfg.workers,
                                    progress=progress)
    except ContractViolation as exc:
        raise CliError(f"backbone contract violation: {exc}", EXIT_BACKBONE)
    except DeepFeatError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_INPUT)
    cache.parent.mkdir(parents=True, exist_ok=True)
    save_cache(features, cache)
    print(f"wrote {features.n}x{features.d} features to {cache}")
    return EXIT_OK


def _c_tag(c):
    return f"C{c:g}"


def cmd_train_eval(cfg):
    started = time.time()
    cache = Path(_require(cfg.cache, "--cache"))
    if not cache.is_file():
        raise CliError(f"feature cache not found: {cache}", EXIT_INPUT)
    try:
        features = load_cache(cache)
    except (FormatError, DeepFeatError) as exc:
        raise CliError(f"cannot load cache {cache}: {exc}", EXIT_INPUT)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.protocol == "holdout":
            protocol = stratified_split(features, cfg.test_fraction, cfg.seed)
            write_split_csv(protocol, out / "split.csv")
        else:
            protocol = stratified_kfold(features, cfg.folds, cfg.seed)
            _dump_json({"k": protocol.k, "seed": protocol.seed,
                        "folds": [list(f) for f in protocol.folds]}, out / "folds.json")
    except DatasetError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_INPUT)

    base = TrainConfig(mode=cfg.mode, standardize=cfg.standardize, max_iter=cfg.max_iter)
    try:
        result = grid_search(features, protocol, cfg.grid, base, workers=cfg.workers)
        best = result.best
        model = best.model
        if model is None:
            # cross-validation: refit on everything at the selected C
            model = fit(features, config=TrainConfig(C=result.best_C, mode=cfg.mode,
                                                     standardize=cfg.standardize,
                                                     max_iter=cfg.max_iter))
    except (DeepFeatError, ValueError) as exc:
        raise CliError(f"training failed: {type(exc).__name__}: {exc}", EXIT_TRAINING)

    for score in result.per_C:
        cm = summed_confusion(score)
        write_confusion_csv(cm, out / f"confusion_{_c_tag(score.C)}.csv")
        render_confusion_svg(cm, out / f"confusion_{_c_tag(score.C)}.svg",
                             title=f"{result.protocol}, C = {score.C:g}")

    save_model(model, out / "best_model.dflm")
    save_model_json(model, out / "best_model.json")
    pooled = summed_confusion(best)
    best_report = report_to_dict(metrics_from_cm(pooled), result.protocol, result.best_C,
                                 model.info.get("iterations"), model.info.get("converged"))
    summary = grid_result_to_dict(result)
    summary["best"] = best_report
    summary["settings"] = {
        "cache": str(cache), "protocol": cfg.protocol, "test_fraction": cfg.test_fraction,
        "folds": cfg.folds, "seed": cfg.seed, "mode": model.mode,
        "standardize": cfg.standardize, "max_iter": cfg.max_iter,
        "n": features.n, "d": features.d, "classes": list(features.class_names),
    }
    summary["run_info"] = _run_info(started)
    _dump_json(summary, out / "grid_search.json")

    for score in result.per_C:
        marker = " *" if score.C == result.best_C else ""
        print(f"C={score.C:g}\taccuracy={score.mean_accuracy:.4f}{marker}")
    print(f"best C = {result.best_C:g}")
    return EXIT_OK


def _fmt(v):
    return "n/a" if v is None else f"{100 * v:.2f}"


def cmd_report(cfg):
    path = Path(cfg.out) / "grid_search.json"
    try:
        summary = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT)
    lines = ["| C | accuracy (%) |", "|---|---|"]
    for entry in summary["per_C"]:
        lines.append(f"| {entry['C']:g} | {_fmt(entry['mean_accuracy'])} |")
    best = summary["best"]
    lines += ["", f"Best C = {summary['best_C']:g} ({summary['protocol']})", "",
              "| class | precision | recall | specificity | F1 |", "|---|---|---|---|---|"]
    for row in best["per_class"]:
        lines.append(f"| {row['class']} | {_fmt(row['precision'])} | {_fmt(row['recall'])} | "
                     f"{_fmt(row['specificity'])} | {_fmt(row['f1'])} |")
    m = best["macro"]
    lines.append(f"| macro | {_fmt(m['precision'])} | {_fmt(m['recall'])} | "
                 f"{_fmt(m['specificity'])} | {_fmt(m['f1'])} |")
    text = "\n".join(lines) + "\n"
    (Path(cfg.out) / "report.md").write_text(text, encoding="utf-8")
    classes = summary["settings"]["classes"]
    cm = ConfusionMatrix(np.array(best["confusion_matrix"], dtype=np.int64), tuple(classes))
    render_confusion_svg(cm, Path(cfg.out) / "confusion_best.svg",
                         title=f"{summary['protocol']}, C = {summary['best_C']:g}")
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "scan": cmd_scan,
    "extract": cmd_extract,
    "train-eval": cmd_train_eval,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"deepfeat {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
