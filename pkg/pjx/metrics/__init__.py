"""Pointing and text metrics with their score reports."""
from __future__ import absolute_import, division, print_function

from pjx.metrics.pointing import (
    PointingScore,
    baseline_answering,
    baseline_random_point,
    baseline_uniform,
    emd,
    emd_1d_oracle,
    pointing_report,
    rank_correlation,
    resample,
    score_pointing,
)
from pjx.metrics.report import ScoreReport, load_reports, save_reports
from pjx.metrics.text import (
    CommandMetric,
    CorpusInstance,
    ExternalMetric,
    bleu4,
    cider,
    corpus_from_explanations,
    load_corpus,
    make_corpus,
    rouge_l,
    score_text,
)

__all__ = [
    "PointingScore",
    "baseline_answering",
    "baseline_random_point",
    "baseline_uniform",
    "emd",
    "emd_1d_oracle",
    "pointing_report",
    "rank_correlation",
    "resample",
    "score_pointing",
    "ScoreReport",
    "load_reports",
    "save_reports",
    "CommandMetric",
    "CorpusInstance",
    "ExternalMetric",
    "bleu4",
    "cider",
    "corpus_from_explanations",
    "load_corpus",
    "make_corpus",
    "rouge_l",
    "score_text",
]
