"""Command-line entry point: ``icureadmit <command> [options]``.

Commands run in pipeline order and pass data through files in the output
directory: synth -> cohort -> featurize -> evaluate (or train) -> report.
Exit codes: 0 success, 2 input/data error, 3 evaluation failure,
4 unsupported operation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional

from . import cohort, concepts, models, report, synth, text
from .config import BUILTIN, PipelineConfig, load_config
from .dataset import Dataset, read_dataset, write_dataset
from .errors import ContractError, EvaluationError, InputError, TrainingError, UnsupportedModelError
from .evaluation import evaluate_matrix, grid_search

log = logging.getLogger("icureadmit")

FEATURE_SETS = ("bow", "cui")
EXIT_OK, EXIT_INPUT, EXIT_EVAL, EXIT_UNSUPPORTED = 0, 2, 3, 4


def _open_write(path: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _open_read(path: str, mode: str = "r"):
    try:
        if "b" in mode:
            return open(path, mode)
        return open(path, mode, encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(cfg: PipelineConfig) -> int:
    spec = replace(cfg.synth, seed=cfg.seed)
    spec.validate()
    corpus = synth.generate(spec)
    with _open_write(cfg.path("admissions.csv")) as fh:
        synth.write_admissions(corpus.admissions, fh)
    with _open_write(cfg.path("noteevents.csv")) as fh:
        synth.write_notes(corpus.notes, fh)
    with _open_write(cfg.path("synth_truth.json")) as fh:
        synth.write_truth(corpus, fh)
    log.info("wrote %d admissions and %d notes to %s", len(corpus.admissions), len(corpus.notes), cfg.output_dir)
    return EXIT_OK


def cmd_cohort(cfg: PipelineConfig) -> int:
    adm_path = cfg.admissions or cfg.path("admissions.csv")
    notes_path = cfg.notes or cfg.path("noteevents.csv")
    with _open_read(adm_path, "rb") as fh:
        admissions = cohort.parse_admissions(fh, source=adm_path)
    with _open_read(notes_path, "rb") as fh:
        notes = cohort.parse_notes(fh, cfg.category, source=notes_path)
    subjects, stats = cohort.build_cohort(admissions, notes, cfg.window_days)
    with _open_write(cfg.path("cohort.jsonl")) as fh:
        cohort.write_cohort(subjects, fh)
    with _open_write(cfg.path("cohort_stats.json")) as fh:
        json.dump(stats.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with _open_write(cfg.path("interval_histogram.csv")) as fh:
        report.write_histogram_csv(stats.interval_histogram, fh)
    log.info(
        "cohort: %d subjects, %d positive (%d admissions excluded)",
        stats.retained_count,
        stats.positive_count,
        stats.excluded,
    )
    return EXIT_OK


def _read_subjects(cfg: PipelineConfig):
    path = cfg.path("cohort.jsonl")
    with _open_read(path) as fh:
        return cohort.read_cohort(fh, source=path)


def _write_features(cfg, name, vocab, vectors, subjects) -> None:
    data = Dataset.from_vectors(
        vectors, [s.label for s in subjects], len(vocab), row_ids=[s.hadm_id for s in subjects]
    )
    with _open_write(cfg.path(f"vocab_{name}.json")) as fh:
        fh.write(vocab.to_json())
    with _open_write(cfg.path(f"dataset_{name}.svm")) as fh:
        write_dataset(data, fh)
    log.info("%s: %d terms, %d rows", name, len(vocab), len(data))


def cmd_featurize(cfg: PipelineConfig) -> int:
    subjects = _read_subjects(cfg)
    if not subjects:
        raise InputError("cohort is empty; nothing to featurize")
    stopwords = text.load_stopwords(cfg.stopwords)
    vocab, vectors = text.bag_of_words(
        [s.summary_text for s in subjects], stopwords, cfg.min_doc_count, cfg.max_doc_fraction
    )
    _write_features(cfg, "bow", vocab, vectors, subjects)

    if cfg.annotations:
        with _open_read(cfg.annotations) as fh:
            annotations = concepts.import_annotations(fh, source=cfg.annotations)
    elif cfg.lexicon:
        if cfg.lexicon == BUILTIN:
            lexicon = concepts.default_lexicon()
        else:
            with _open_read(cfg.lexicon) as fh:
                lexicon = concepts.load_lexicon(fh, source=cfg.lexicon)
        annotations = concepts.annotate(subjects, lexicon)
        with _open_write(cfg.path("annotations_cui.jsonl")) as fh:
            for a in annotations:
                fh.write(a.to_json() + "\n")
    else:
        return EXIT_OK
    vocab, vectors = concepts.vectorize_cuis(annotations, subjects, cfg.min_doc_count, cfg.max_doc_fraction)
    _write_features(cfg, "cui", vocab, vectors, subjects)
    return EXIT_OK


def _load_feature_sets(cfg: PipelineConfig) -> dict[str, Dataset]:
    names = cfg.feature_sets
    if names is None:
        names = [n for n in FEATURE_SETS if os.path.exists(cfg.path(f"dataset_{n}.svm"))]
        if not names:
            raise InputError(f"no dataset_*.svm files in {cfg.output_dir}; run featurize first")
    out = {}
    for name in names:
        path = cfg.path(f"dataset_{name}.svm")
        with _open_read(path) as fh:
            out[name] = read_dataset(fh, source=path)
    return out


def _require_both_classes(features: dict[str, Dataset]) -> None:
    for name, data in features.items():
        n_pos = int(data.labels.sum())
        if n_pos < 2 or len(data) - n_pos < 2:
            raise EvaluationError(
                f"dataset {name!r} has {n_pos} positive and {len(data) - n_pos} negative rows; "
                "both classes need at least 2"
            )


def _progress(message: str) -> None:
    log.info("tuning %s", message)


def cmd_evaluate(cfg: PipelineConfig) -> int:
    features = _load_feature_sets(cfg)
    _require_both_classes(features)
    result = evaluate_matrix(
        features,
        cfg.roster,
        seed=cfg.seed,
        ratio=cfg.split_ratio,
        k=cfg.folds,
        threads=cfg.threads,
        progress=_progress,
    )

    with _open_write(cfg.path("report.json")) as fh:
        fh.write(result.to_json() + "\n")
    with _open_write(cfg.path("report.txt")) as fh:
        fh.write(result.to_table())
    for (clf, fs), points in sorted(result.roc.items()):
        with _open_write(cfg.path(os.path.join("roc", f"{clf}_{fs}.csv"))) as fh:
            report.write_roc_csv(points, fh)
    for (clf, fs), model in sorted(result.models.items()):
        with _open_write(cfg.path(os.path.join("models", f"{clf}_{fs}.json"))) as fh:
            fh.write(model.to_json() + "\n")
    sys.stdout.write(result.to_table())
    if result.all_failed():
        errors = "; ".join(f"{r.classifier}/{r.feature_set}: {r.error}" for r in result.results)
        raise EvaluationError(f"every configuration failed ({errors})")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig) -> int:
    """Tune on every row by k-fold CV and save the refit models.

    Unlike ``evaluate`` nothing is held out, so no test AUC is reported.
    """
    from concurrent.futures import ProcessPoolExecutor

    features = _load_feature_sets(cfg)
    _require_both_classes(features)
    executor = ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    summary, ok = [], 0
    try:
        for fs, data in features.items():
            for spec in cfg.roster(data.dimension):
                _progress(f"{spec.name} / {fs}")
                try:
                    best, cv = grid_search(data, spec, cfg.folds, cfg.seed, executor)
                    model = models.train(spec.family, data, best, seed=cfg.seed, feature_set=fs)
                except (EvaluationError, TrainingError, ContractError) as exc:
                    summary.append({"classifier": spec.name, "feature_set": fs, "status": "failed", "error": str(exc)})
                    continue
                ok += 1
                with _open_write(cfg.path(os.path.join("models", f"{spec.name}_{fs}.full.json"))) as fh:
                    fh.write(model.to_json() + "\n")
                summary.append(
                    {
                        "classifier": spec.name,
                        "feature_set": fs,
                        "status": "ok",
                        "best_params": best,
                        "cv_auc_mean": cv.mean(cv.best_index),
                        "cv_auc_sd": cv.sd(cv.best_index),
                    }
                )
    finally:
        if executor is not None:
            executor.shutdown()
    with _open_write(cfg.path("train_summary.json")) as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if not ok:
        raise EvaluationError("every configuration failed")
    return EXIT_OK


def cmd_report(cfg: PipelineConfig, model_path: Optional[str], vocab_path: Optional[str]) -> int:
    model_path = model_path or cfg.path(os.path.join("models", "logistic_regression_bow.json"))
    with _open_read(model_path):
        pass
    model = models.read_model(model_path)
    if vocab_path is None:
        vocab_path = cfg.path(f"vocab_{model.feature_set or 'bow'}.json")
    with _open_read(vocab_path):
        pass
    vocab = text.read_vocabulary(vocab_path)
    rows = models.feature_importance(model, vocab, cfg.top_k)
    stem = os.path.splitext(os.path.basename(model_path))[0]
    with _open_write(cfg.path(f"importance_{stem}.csv")) as fh:
        report.write_importance_csv(rows, fh)
    with _open_write(cfg.path(f"importance_{stem}.svg")) as fh:
        fh.write(report.tag_cloud_svg(rows, cfg.font_min, cfg.font_max))
    for i, r in enumerate(rows, start=1):
        sign = "" if r.sign is None else ("+" if r.sign > 0 else "-")
        sys.stdout.write(f"{i:3d}  {r.term:<24s} {r.importance:.6g} {sign}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument handling


def _global_options(defaults: bool) -> argparse.ArgumentParser:
    # Shared by the main parser and every subparser so global flags work on
    # either side of the command name. Subparsers use SUPPRESS so they never
    # clobber a value given before the command.
    p = argparse.ArgumentParser(add_help=False)
    d = None if defaults else argparse.SUPPRESS
    p.add_argument("--config", default=d, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--threads", type=int, default=d, help="worker processes (default: CPU count)")
    p.add_argument("--output-dir", default=d)
    p.add_argument("-v", "--verbose", action="store_true", default=False if defaults else argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icureadmit",
        description="30-day unplanned ICU readmission prediction from discharge summaries.",
        parents=[_global_options(True)],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_options(False)]

    p = sub.add_parser("synth", parents=common, help="generate synthetic ADMISSIONS/NOTEEVENTS tables")
    p.add_argument("--n-subjects", type=int)
    p.add_argument("--positive-rate", type=float)
    p.add_argument("--n-signal-terms", type=int)
    p.add_argument("--signal-strength", type=float)
    p.add_argument("--vocabulary-size", type=int)

    p = sub.add_parser("cohort", parents=common, help="build the labeled cohort")
    p.add_argument("--admissions")
    p.add_argument("--notes")
    p.add_argument("--window-days", type=int)

    p = sub.add_parser("featurize", parents=common, help="Bag-of-Words and Bag-of-CUIs datasets")
    p.add_argument("--lexicon", help=f"lexicon TSV, '{BUILTIN}', or '' to skip CUIs")
    p.add_argument("--annotations", help="external CUI annotations (JSON lines)")
    p.add_argument("--stopwords")
    p.add_argument("--min-doc-count", type=int)
    p.add_argument("--max-doc-fraction", type=float)

    for name, helptext in (
        ("evaluate", "split, tune, test and write the AUC report"),
        ("train", "tune on all rows and save the refit models"),
    ):
        p = sub.add_parser(name, parents=common, help=helptext)
        p.add_argument("--feature-sets", help="comma list, e.g. bow,cui")
        p.add_argument("--classifiers", help="comma list restricting the roster")
        p.add_argument("--folds", type=int)
        p.add_argument("--split-ratio", type=float)

    p = sub.add_parser("report", parents=common, help="top-k feature importance CSV and SVG")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("-k", "--top-k", type=int)
    p.add_argument("--font-min", type=float)
    p.add_argument("--font-max", type=float)
    return parser


_SYNTH_FLAGS = ("n_subjects", "positive_rate", "n_signal_terms", "signal_strength", "vocabulary_size")
_PLAIN_FLAGS = (
    "admissions",
    "notes",
    "window_days",
    "lexicon",
    "annotations",
    "stopwords",
    "min_doc_count",
    "max_doc_fraction",
    "folds",
    "split_ratio",
    "top_k",
    "font_min",
    "font_max",
    "seed",
    "threads",
    "output_dir",
)


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    for name in _PLAIN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            if name in ("lexicon", "annotations", "stopwords") and value == "":
                value = None
            setattr(cfg, name, value)
    for name in ("feature_sets", "classifiers"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, [v.strip() for v in value.split(",") if v.strip()] or None)
    overrides = {n: getattr(args, n) for n in _SYNTH_FLAGS if getattr(args, n, None) is not None}
    if overrides:
        cfg.synth = replace(cfg.synth, **overrides)
    cfg.validate()
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    cfg = config_from_args(args)
    if args.command == "synth":
        return cmd_synth(cfg)
    if args.command == "cohort":
        return cmd_cohort(cfg)
    if args.command == "featurize":
        return cmd_featurize(cfg)
    if args.command == "evaluate":
        return cmd_evaluate(cfg)
    if args.command == "train":
        return cmd_train(cfg)
    return cmd_report(cfg, args.model, args.vocab)


def main(argv=None) -> int:
    try:
        return run(argv)
    except (InputError, ContractError) as exc:
        print(f"icureadmit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EvaluationError, TrainingError) as exc:
        print(f"icureadmit: evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except UnsupportedModelError as exc:
        print(f"icureadmit: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
