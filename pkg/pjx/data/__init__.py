"""
Dataset records, vocabularies, features and annotator masks.

Directory layout of a dataset::

    records.jsonl      one ExplanationRecord per line
    vocab.json         answer, question and explanation vocabularies
    features/<image_id>.pjxt
    masks/<record_id>_<k>.pjxt
"""
from __future__ import absolute_import, division, print_function

from pjx.data.annotations import aggregate_annotations, aggregate_masks, load_heatmap, load_heatmaps
from pjx.data.features import FeatureStore, load_features, save_features
from pjx.data.records import ExplanationRecord, complementary_pairs, load_records, save_records, validate_records
from pjx.data.tokenize import normalize_answer, tokenize
from pjx.data.vocabulary import Vocabularies, Vocabulary, build_vocab

__all__ = [
    "aggregate_annotations",
    "aggregate_masks",
    "load_heatmap",
    "load_heatmaps",
    "FeatureStore",
    "load_features",
    "save_features",
    "ExplanationRecord",
    "complementary_pairs",
    "load_records",
    "save_records",
    "validate_records",
    "normalize_answer",
    "tokenize",
    "Vocabularies",
    "Vocabulary",
    "build_vocab",
]
