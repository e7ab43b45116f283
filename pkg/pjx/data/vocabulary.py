"""
Vocabularies of answers, question words and explanation words.

Word vocabularies reserve the ids ``0`` (begin of sequence), ``1`` (end of
sequence) and ``2`` (unknown word). The answer vocabulary is a plain list of
answer labels without reserved entries. Entries are ordered by decreasing
frequency, ties broken lexicographically, so rebuilding from the same records
gives identical ids.
"""
from __future__ import absolute_import, division, print_function

import collections
import json
import logging

from dataclasses import dataclass

from pjx.data.tokenize import normalize_answer, tokenize
from pjx.utils import ContractError, VocabularyError, fingerprint

from typing import Counter, Dict, Iterable, List, Optional, Sequence

_logger = logging.getLogger(__name__)

BOS, EOS, UNK = "<bos>", "<eos>", "<unk>"
BOS_ID, EOS_ID, UNK_ID = 0, 1, 2
RESERVED = (BOS, EOS, UNK)


class Vocabulary(object):
    """Bijective map between words and ids.

    Parameters
    ----------
    words: sequence of str
        entries in id order, without the reserved words
    reserved: bool
        prepend the begin, end and unknown words (ids 0, 1, 2)

    >>> vocab = Vocabulary(["red", "cat"])
    >>> vocab.encode(["red", "dog"], add_eos=True)
    [3, 2, 1]
    >>> vocab.decode([3, 4, 1])
    ['red', 'cat']
    """

    def __init__(self, words: Sequence[str], reserved: bool = True):
        words = list(words)
        self.reserved = reserved
        self.words: List[str] = (list(RESERVED) if reserved else []) + words
        self._ids: Dict[str, int] = {}
        for i, word in enumerate(self.words):
            if word in self._ids:
                raise VocabularyError("duplicate vocabulary entry {!r}".format(word))
            self._ids[word] = i

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.reserved == other.reserved and self.words == other.words

    def __repr__(self) -> str:
        return "Vocabulary({} entries, reserved={})".format(len(self), self.reserved)

    def id(self, word: str) -> int:
        """Id of ``word``; unknown words map to the unknown id if reserved ids exist."""
        try:
            return self._ids[word]
        except KeyError:
            if self.reserved:
                return UNK_ID
            raise VocabularyError("{!r} is not in the vocabulary".format(word))

    def get(self, word: str) -> Optional[int]:
        return self._ids.get(word)

    def word(self, index: int) -> str:
        if not 0 <= index < len(self.words):
            raise VocabularyError("id {} outside of vocabulary of size {}".format(index, len(self.words)))
        return self.words[index]

    def encode(self, tokens: Iterable[str], add_eos: bool = False) -> List[int]:
        ids = [self.id(token) for token in tokens]
        if add_eos:
            ids.append(EOS_ID)
        return ids

    def decode(self, ids: Iterable[int], strip: bool = True) -> List[str]:
        """Words of ``ids``; with ``strip`` decoding stops at the end id and skips the begin id."""
        words = []
        for index in ids:
            index = int(index)
            if strip and self.reserved and index == EOS_ID:
                break
            if strip and self.reserved and index == BOS_ID:
                continue
            words.append(self.word(index))
        return words

    def fingerprint(self) -> str:
        return fingerprint(self.words)

    def to_list(self) -> List[str]:
        """Entries without the reserved words."""
        return self.words[len(RESERVED) :] if self.reserved else list(self.words)


def vocabulary_from_counts(
    counts: Counter, top_k: Optional[int] = None, min_count: int = 1, reserved: bool = True
) -> Vocabulary:
    """Keep entries with at least ``min_count`` occurrences, at most ``top_k`` of them.

    >>> vocabulary_from_counts(collections.Counter({"a": 3, "b": 2, "c": 1}), top_k=2, reserved=False).words
    ['a', 'b']
    >>> vocabulary_from_counts(collections.Counter({"b": 2, "a": 2}), top_k=1, reserved=False).words
    ['a']
    """
    ordered = sorted((item for item in counts.items() if item[1] >= min_count), key=lambda item: (-item[1], item[0]))
    if top_k is not None:
        ordered = ordered[:top_k]
    return Vocabulary([word for word, _ in ordered], reserved=reserved)


@dataclass
class Vocabularies:
    """Answer, question and explanation vocabularies of a dataset.

    ``questions`` is ``None`` for ACT datasets.
    """

    answers: Vocabulary
    explanations: Vocabulary
    questions: Optional[Vocabulary] = None

    def fingerprints(self) -> Dict[str, str]:
        result = {"answers": self.answers.fingerprint(), "explanations": self.explanations.fingerprint()}
        if self.questions is not None:
            result["questions"] = self.questions.fingerprint()
        return result

    def to_dict(self) -> dict:
        return {
            "answers": self.answers.to_list(),
            "questions": None if self.questions is None else self.questions.to_list(),
            "explanations": self.explanations.to_list(),
        }

    @classmethod
    def from_dict(cls, values: dict) -> "Vocabularies":
        questions = values.get("questions")
        return cls(
            answers=Vocabulary(values["answers"], reserved=False),
            explanations=Vocabulary(values["explanations"]),
            questions=None if questions is None else Vocabulary(questions),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        _logger.info(
            "wrote vocabularies to %s (%d answers, %d explanation words)",
            path,
            len(self.answers),
            len(self.explanations),
        )

    @classmethod
    def load(cls, path: str) -> "Vocabularies":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def build_vocab(records, top_k: int = 3000, min_count: int = 1) -> Vocabularies:
    """Build all vocabularies from dataset records.

    The answer vocabulary keeps the ``top_k`` most frequent answers; question
    and explanation vocabularies keep words occurring at least ``min_count``
    times. If the records contain a training split only those are counted.

    Raises
    ------
    ContractError
        for an empty record set
    """
    records = list(records)
    if not records:
        raise ContractError("cannot build vocabularies from an empty record set")
    train = [r for r in records if r.split == "train"]
    if train:
        records = train
    answers = collections.Counter(normalize_answer(r.answer) for r in records)
    explanation_words = collections.Counter(w for r in records for e in r.explanations for w in tokenize(e))
    with_question = [r for r in records if r.question is not None]
    questions = None
    if with_question:
        question_words = collections.Counter(w for r in with_question for w in tokenize(r.question))
        questions = vocabulary_from_counts(question_words, min_count=min_count)
    result = Vocabularies(
        answers=vocabulary_from_counts(answers, top_k=top_k, reserved=False),
        explanations=vocabulary_from_counts(explanation_words, min_count=min_count),
        questions=questions,
    )
    _logger.info(
        "built vocabularies from %d records: %d of %d answers kept, %d explanation words",
        len(records),
        len(result.answers),
        len(answers),
        len(result.explanations),
    )
    return result


__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "BOS_ID",
    "EOS_ID",
    "UNK_ID",
    "RESERVED",
    "Vocabulary",
    "vocabulary_from_counts",
    "Vocabularies",
    "build_vocab",
]
