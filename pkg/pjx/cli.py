"""
Command line entry point ``pjx``.

Every command reads a flat JSON configuration (``--config``), applies the
command line overrides, checks its paths and writes the resolved
configuration as ``run_config.json`` next to its outputs.

Exit status is 0 on success, 2 for invalid input (configuration, records,
feature shapes, vocabularies, checkpoints, files) and 3 for any other failure; the error is printed as one
line ``error: <kind>: <message>``.
"""
from __future__ import absolute_import, division, print_function

import argparse
import json
import logging
import os
import sys

import numpy as np
from sklearn.utils import check_random_state

from pjx import explainer, outputs, plots, training
from pjx.config import CONDITIONING_MODES, MODES, POINTING_METHODS, ModelConfig, RunConfig, load_run_config
from pjx.data.annotations import aggregate_annotations, load_heatmap
from pjx.data.dataset import EncodedDataset, encode_dataset
from pjx.data.features import FeatureStore
from pjx.data.records import complementary_pairs, load_records, select_split
from pjx.data.statistics import dataset_statistics
from pjx.data.synthetic import SyntheticConfig, synth_dataset, write_dataset
from pjx.data.vocabulary import Vocabularies, build_vocab
from pjx.metrics import pointing, text
from pjx.metrics.report import save_reports
from pjx.params import ModelParams
from pjx.utils import (
    CheckpointMismatchError,
    ConfigError,
    ContractError,
    RecordValidationError,
    ShapeError,
    TensorFileError,
    VocabularyError,
)

from typing import Any, Dict, List, Optional, Sequence

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
VALIDATION_ERRORS = (
    ConfigError,
    ContractError,
    RecordValidationError,
    CheckpointMismatchError,
    FileNotFoundError,
    TensorFileError,
    ShapeError,
    VocabularyError,
)

RECORDS_FILE = "records.jsonl"
VOCAB_FILE = "vocab.json"
FEATURES_DIR = "features"
RUN_CONFIG_FILE = "run_config.json"
CHECKPOINT_DIR = "checkpoint"
TRAINING_LOG_FILE = "training_log.jsonl"
HISTORY_PLOT_FILE = "training_history.pdf"
TEXT_REPORT_FILE = "text_scores.json"
POINTING_REPORT_FILE = "pointing_scores.json"
PAIRS_SUFFIX = "_pairs"


def _parse_assignment(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError("--set expects KEY=VALUE, got {!r}".format(text))
    try:
        return key, json.loads(value)
    except ValueError:
        return key, value


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration keys set on the command line; ``--set`` entries come last."""
    result = {
        "mode": args.mode,
        "seed": args.seed,
        "dataset": args.dataset,
        "features": args.features,
        "checkpoint": args.checkpoint,
        "answerer_checkpoint": args.answerer_checkpoint,
        "output": args.output,
        "predictions": args.predictions,
        "split": args.split,
        "method": args.method,
        "conditioning": args.conditioning,
        "beam_width": args.beam_width,
        "freeze_answerer": args.freeze_answerer,
    }
    for assignment in args.set or ():
        key, value = _parse_assignment(assignment)
        result[key] = value
    return result


def _prepare_output(config: RunConfig) -> str:
    if config.output is None:
        raise ConfigError("option 'output' is required")
    os.makedirs(config.output, exist_ok=True)
    config.save(os.path.join(config.output, RUN_CONFIG_FILE))
    return config.output


def _dataset_root(config: RunConfig) -> str:
    return config.dataset if os.path.isdir(config.dataset) else os.path.dirname(config.dataset)


def _load_records(config: RunConfig):
    path = os.path.join(config.dataset, RECORDS_FILE) if os.path.isdir(config.dataset) else config.dataset
    if not os.path.exists(path):
        raise FileNotFoundError("records not found: {}".format(path))
    return load_records(path, config.mode)


def _vocabularies(config: RunConfig, records) -> Vocabularies:
    path = os.path.join(_dataset_root(config), VOCAB_FILE)
    if os.path.exists(path):
        return Vocabularies.load(path)
    _logger.info("%s not found, building vocabularies from the records", path)
    return build_vocab(records)


def _features_dir(config: RunConfig) -> str:
    path = config.features or os.path.join(_dataset_root(config), FEATURES_DIR)
    if not os.path.isdir(path):
        raise FileNotFoundError("feature directory not found: {}".format(path))
    return path


def _encoded(config: RunConfig, model: ModelConfig, split: Optional[str]) -> EncodedDataset:
    """Records of ``split`` with their features, checked against the configured grid and channels."""
    all_records = _load_records(config)
    vocabularies = _vocabularies(config, all_records)
    records = select_split(all_records, split)
    if not records:
        raise ContractError("no records in split {!r}".format(split))
    store = FeatureStore(_features_dir(config), (model.grid_rows, model.grid_cols), model.channels)
    return encode_dataset(records, vocabularies, store)


def _checkpoint_model(params: ModelParams, config: RunConfig) -> ModelConfig:
    """Model configuration stored with a checkpoint, falling back to the run configuration."""
    mode = params.metadata.get("mode", config.mode)
    if mode != config.mode:
        raise ConfigError("checkpoint was trained in {} mode, run is configured for {}".format(mode, config.mode))
    if "model" not in params.metadata:
        return config.model
    return ModelConfig.from_dict(params.metadata["model"], act=mode == "act")


def _load_checkpoint(path: str) -> ModelParams:
    if not os.path.isdir(path):
        raise FileNotFoundError("checkpoint not found: {}".format(path))
    return ModelParams.load(path)


def _write_training(output: str, result: training.TrainingResult, plot: bool) -> None:
    result.params.save(os.path.join(output, CHECKPOINT_DIR))
    result.history.to_json(os.path.join(output, TRAINING_LOG_FILE), orient="records", lines=True)
    if plot:
        plots.plot_training_history(result.history, os.path.join(output, HISTORY_PLOT_FILE))


def cmd_train_answerer(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset")
    dataset = _encoded(config, config.model, config.split or "train")
    output = _prepare_output(config)
    result = training.train_answerer(dataset, config.train, config.model)
    _write_training(output, result, args.plot)
    _logger.info("train accuracy %.4f", training.evaluate_answerer(result.params, dataset))


def cmd_train_explainer(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset")
    if not config.train.joint:
        config.validate_paths("answerer_checkpoint")
    dataset = _encoded(config, config.model, config.split or "train")
    output = _prepare_output(config)
    if config.train.joint:
        result = training.train_joint(dataset, config.train, config.model)
    else:
        answer_params = _load_checkpoint(config.answerer_checkpoint)
        result = training.train_explainer(dataset, answer_params, config.train, config.model)
    _write_training(output, result, args.plot)
    scores = training.evaluate_explainer(
        result.params, dataset, config.train.conditioning, config.train.max_len, config.model.use_pointing
    )
    _logger.info("token accuracy %.4f, exact greedy matches %.4f", scores["token_accuracy"], scores["exact_match"])


def cmd_explain(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset", "checkpoint")
    params = _load_checkpoint(config.checkpoint)
    model = _checkpoint_model(params, config)
    dataset = _encoded(config, model, config.split)
    params.check_vocabularies(dataset.vocabularies.fingerprints())
    explanations = explainer.explain_dataset(
        params,
        dataset,
        config.train.conditioning,
        config.train.max_len,
        config.train.beam_width,
        model.use_pointing,
    )
    header = {
        "conditioning": config.train.conditioning,
        "beam_width": config.train.beam_width,
        "max_len": config.train.max_len,
        "use_pointing": model.use_pointing,
        "split": config.split,
        "mode": config.mode,
        "vocabularies": dataset.vocabularies.fingerprints(),
    }
    output = _prepare_output(config)
    outputs.write_explanations(output, [ex.id for ex in dataset.examples], explanations, dataset.vocabularies, header)


def _pair_members(records) -> set:
    return {i for pair in complementary_pairs(records) for i in pair}


def cmd_eval_text(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset", "predictions")
    predictions = outputs.read_explanations(config.predictions)
    split = config.split or predictions.header.get("split")
    records = select_split(_load_records(config), split)
    corpus = text.corpus_from_explanations(records, predictions.justifications())
    output = _prepare_output(config)
    reports = text.score_text(corpus, config.metrics)
    save_reports(list(reports.values()), os.path.join(output, TEXT_REPORT_FILE))

    members = _pair_members(records)
    paired = [instance for instance in corpus if instance.id in members]
    if len(paired) >= 2:
        pair_reports = text.score_text(paired, config.metrics)
        save_reports(list(pair_reports.values()), os.path.join(output, _with_suffix(TEXT_REPORT_FILE)))


def _with_suffix(filename: str) -> str:
    stem, ext = os.path.splitext(filename)
    return stem + PAIRS_SUFFIX + ext


def _ground_truths(config: RunConfig, records) -> Dict[str, np.ndarray]:
    root = _dataset_root(config)
    result = {}
    for record in records:
        heatmap = load_heatmap(record, root)
        if heatmap is not None:
            result[record.id] = heatmap
    if not result:
        raise ContractError("no record carries annotator masks")
    return result


def _pointing_predictions(config: RunConfig, records, ground_truths) -> Dict[str, np.ndarray]:
    ids = sorted(ground_truths)
    if config.method == "uniform":
        return {i: pointing.baseline_uniform(*ground_truths[i].shape) for i in ids}
    if config.method == "random-point":
        random_state = check_random_state(config.seed)
        return {i: pointing.baseline_random_point(*ground_truths[i].shape, seed=random_state) for i in ids}
    if config.method == "answering":
        config.validate_paths("checkpoint")
        params = _load_checkpoint(config.checkpoint)
        dataset = _encoded(config, _checkpoint_model(params, config), config.split)
        params.check_vocabularies(dataset.vocabularies.fingerprints())
        return {
            ex.id: pointing.baseline_answering(params, ex.features, ex.question_ids)
            for ex in dataset.examples
            if ex.id in ground_truths
        }
    config.validate_paths("predictions")
    maps = outputs.read_explanations(config.predictions).pointing_maps()
    unknown = sorted(set(maps) - {r.id for r in records})
    if unknown:
        raise ContractError("predictions for ids outside of the evaluated records: {}".format(unknown))
    return {i: m for i, m in maps.items() if i in ground_truths}


def cmd_eval_pointing(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset")
    records = select_split(_load_records(config), config.split)
    ground_truths = _ground_truths(config, records)
    predictions = _pointing_predictions(config, records, ground_truths)
    score = pointing.score_pointing(predictions, ground_truths)
    output = _prepare_output(config)
    reports = list(pointing.pointing_report(score))
    for report in reports:
        report.notes["method"] = config.method
    save_reports(reports, os.path.join(output, POINTING_REPORT_FILE))
    _logger.info(
        "%s: EMD %.4f, rank correlation %s", config.method, score.mean_emd, score.mean_rank_correlation
    )

    pairs = complementary_pairs(records)
    if pairs:
        sliced = pointing.pair_slice(score, pairs)
        if sliced.ids:
            pair_reports = list(pointing.pointing_report(sliced))
            for report in pair_reports:
                report.notes["method"] = config.method
                report.notes["slice"] = "complementary_pairs"
            save_reports(pair_reports, os.path.join(output, _with_suffix(POINTING_REPORT_FILE)))


def cmd_build_vocab(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset")
    records = _load_records(config)
    vocabularies = build_vocab(records, top_k=args.top_k, min_count=args.min_count)
    output = _prepare_output(config)
    vocabularies.save(os.path.join(output, VOCAB_FILE))
    statistics = dataset_statistics(records)
    statistics.to_json(os.path.join(output, "statistics.json"), orient="index", indent=2)
    _logger.info("dataset statistics:\n%s", statistics.to_string())


def cmd_aggregate_annotations(config: RunConfig, args: argparse.Namespace) -> None:
    config.validate_paths("dataset")
    records = select_split(_load_records(config), config.split)
    output = _prepare_output(config)
    aggregate_annotations(records, _dataset_root(config), output)


def cmd_synth_dataset(config: RunConfig, args: argparse.Namespace) -> None:
    synthetic = SyntheticConfig(
        n_instances=args.n_instances,
        n_val=args.n_val,
        channels=config.model.channels,
        grid_rows=config.model.grid_rows,
        grid_cols=config.model.grid_cols,
        n_answers=args.n_answers,
        mode=config.mode,
    )
    output = _prepare_output(config)
    write_dataset(synth_dataset(synthetic, seed=config.seed), output)


COMMANDS = {
    "train-answerer": cmd_train_answerer,
    "train-explainer": cmd_train_explainer,
    "explain": cmd_explain,
    "eval-text": cmd_eval_text,
    "eval-pointing": cmd_eval_pointing,
    "build-vocab": cmd_build_vocab,
    "aggregate-annotations": cmd_aggregate_annotations,
    "synth-dataset": cmd_synth_dataset,
}


def _run_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="flat JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--dataset", help="dataset directory or records file")
    parser.add_argument("--features", help="feature directory (default: <dataset>/features)")
    parser.add_argument("--checkpoint")
    parser.add_argument("--answerer-checkpoint", dest="answerer_checkpoint")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--predictions", help="explanation file written by 'explain'")
    parser.add_argument("--split", choices=("train", "val", "test"))
    parser.add_argument("--method", choices=POINTING_METHODS)
    parser.add_argument("--conditioning", choices=CONDITIONING_MODES)
    parser.add_argument("--beam-width", dest="beam_width", type=int)
    freeze = parser.add_mutually_exclusive_group()
    freeze.add_argument("--freeze-answerer", dest="freeze_answerer", action="store_true", default=None)
    freeze.add_argument("--finetune", dest="freeze_answerer", action="store_false")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any configuration key")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _run_options()
    parser = argparse.ArgumentParser(prog="pjx", description="Pointing and justification explanation models.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name, parents=[common])
        if name.startswith("train-"):
            sub.add_argument("--plot", action="store_true", help="write " + HISTORY_PLOT_FILE)
        elif name == "build-vocab":
            sub.add_argument("--top-k", dest="top_k", type=int, default=3000)
            sub.add_argument("--min-count", dest="min_count", type=int, default=1)
        elif name == "synth-dataset":
            sub.add_argument("--n-instances", dest="n_instances", type=int, default=50)
            sub.add_argument("--n-val", dest="n_val", type=int, default=0)
            sub.add_argument("--n-answers", dest="n_answers", type=int, default=4)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    levels: List[int] = [logging.WARNING, logging.INFO, logging.DEBUG]
    logging.basicConfig(
        level=levels[min(args.verbose, len(levels) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_run_config(args.config, _overrides(args))
        COMMANDS[args.command](config, args)
    except VALIDATION_ERRORS as e:
        print("error: {}: {}".format(type(e).__name__, e), file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        _logger.debug("command failed", exc_info=True)
        print("error: {}: {}".format(type(e).__name__, e), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
