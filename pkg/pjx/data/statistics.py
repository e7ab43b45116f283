"""Dataset summary per split."""
from __future__ import absolute_import, division, print_function

import numpy as np
import pandas as pd

from pjx.data.records import SPLITS, ExplanationRecord, complementary_pairs
from pjx.data.tokenize import tokenize

from typing import Sequence

STATISTICS_COLUMNS = [
    "images",
    "qa_pairs",
    "explanations",
    "complementary_pairs",
    "visual_annotations",
    "explanation_vocab_size",
    "mean_explanation_length",
]


def dataset_statistics(records: Sequence[ExplanationRecord]) -> pd.DataFrame:
    """Counts of one row per split present in ``records``.

    ``visual_annotations`` counts records with at least one annotator mask,
    ``complementary_pairs`` counts pair ids with exactly two members in the
    split.
    """
    rows = {}
    for split in SPLITS:
        subset = [r for r in records if r.split == split]
        if not subset:
            continue
        lengths = [len(tokenize(e)) for r in subset for e in r.explanations]
        rows[split] = {
            "images": len({r.image_id for r in subset}),
            "qa_pairs": len(subset),
            "explanations": len(lengths),
            "complementary_pairs": len(complementary_pairs(subset)),
            "visual_annotations": sum(1 for r in subset if r.masks),
            "explanation_vocab_size": len({w for r in subset for e in r.explanations for w in tokenize(e)}),
            "mean_explanation_length": float(np.mean(lengths)),
        }
    return pd.DataFrame.from_dict(rows, orient="index", columns=STATISTICS_COLUMNS)


__all__ = ["STATISTICS_COLUMNS", "dataset_statistics"]
