"""
Encoding of records into model inputs.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np

from dataclasses import dataclass, field

from pjx.data.records import ExplanationRecord
from pjx.data.tokenize import normalize_answer, tokenize
from pjx.data.vocabulary import Vocabularies

from typing import List, Mapping, Optional, Sequence

_logger = logging.getLogger(__name__)


@dataclass
class EncodedExample:
    """Model inputs of one record.

    ``answer_id`` is ``None`` if the answer is not in the answer vocabulary.
    Every justification ends with the end-of-sequence id.
    """

    id: str
    image_id: str
    split: str
    features: np.ndarray
    question_ids: Optional[List[int]]
    answer_id: Optional[int]
    justifications: List[List[int]]
    complementary_pair_id: Optional[str] = None


@dataclass
class EncodedDataset:
    examples: List[EncodedExample]
    vocabularies: Vocabularies
    records: List[ExplanationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def n_answers(self) -> int:
        return len(self.vocabularies.answers)

    @property
    def question_vocab_size(self) -> Optional[int]:
        return None if self.vocabularies.questions is None else len(self.vocabularies.questions)

    @property
    def explanation_vocab_size(self) -> int:
        return len(self.vocabularies.explanations)

    def answerable(self) -> List[EncodedExample]:
        """Examples whose answer is in the answer vocabulary."""
        return [ex for ex in self.examples if ex.answer_id is not None]

    def split(self, name: Optional[str]) -> "EncodedDataset":
        if name is None:
            return self
        return EncodedDataset(
            [ex for ex in self.examples if ex.split == name],
            self.vocabularies,
            [r for r in self.records if r.split == name],
        )


def encode_record(record: ExplanationRecord, vocabularies: Vocabularies, features: np.ndarray) -> EncodedExample:
    question_ids = None
    if record.question is not None and vocabularies.questions is not None:
        question_ids = vocabularies.questions.encode(tokenize(record.question))
    return EncodedExample(
        id=record.id,
        image_id=record.image_id,
        split=record.split,
        features=features,
        question_ids=question_ids,
        answer_id=vocabularies.answers.get(normalize_answer(record.answer)),
        justifications=[vocabularies.explanations.encode(tokenize(e), add_eos=True) for e in record.explanations],
        complementary_pair_id=record.complementary_pair_id,
    )


def encode_dataset(
    records: Sequence[ExplanationRecord], vocabularies: Vocabularies, features: Mapping[str, np.ndarray]
) -> EncodedDataset:
    """Encode records with their features.

    Parameters
    ----------
    features: mapping
        image id -> ``C x N x M`` array, e.g. a
        :class:`~pjx.data.features.FeatureStore`

    Raises
    ------
    FileNotFoundError
        naming the record whose features are missing
    """
    examples = []
    for record in records:
        try:
            image_features = features[record.image_id]
        except (KeyError, FileNotFoundError) as e:
            raise FileNotFoundError("record {!r}: {}".format(record.id, e))
        examples.append(encode_record(record, vocabularies, np.asarray(image_features, dtype=np.float64)))
    unknown = sum(ex.answer_id is None for ex in examples)
    if unknown:
        _logger.warning("%d of %d records have an answer outside of the answer vocabulary", unknown, len(examples))
    return EncodedDataset(examples, vocabularies, list(records))


__all__ = ["EncodedExample", "EncodedDataset", "encode_record", "encode_dataset"]
