"""
Dataset records in JSON-lines format.

One JSON object per line::

    {"id": "q1", "image_id": "img1", "split": "train",
     "question": "what is he doing",            # absent in ACT mode
     "answer": "skiing",
     "explanations": ["because he is going down a snowy slope"],
     "complementary_pair_id": "p7",             # optional
     "masks": ["masks/q1_0.pjxt"]}              # optional

Validation never raises on the first problem: every rejected line is reported
as :class:`~pjx.utils.RecordRejection` with its line number.
"""
from __future__ import absolute_import, division, print_function

import json
import logging

from dataclasses import dataclass, field

from pjx.data.tokenize import tokenize
from pjx.utils import RecordRejection, RecordValidationError

from typing import List, Optional, Sequence, Tuple

_logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
MAX_EXPLANATIONS = 3
_KNOWN_FIELDS = {"id", "image_id", "split", "question", "answer", "explanations", "complementary_pair_id", "masks"}


@dataclass
class ExplanationRecord:
    """One question-answer pair with its textual explanations and annotator masks."""

    id: str
    image_id: str
    split: str
    answer: str
    explanations: List[str]
    question: Optional[str] = None
    complementary_pair_id: Optional[str] = None
    masks: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        result = {"id": self.id, "image_id": self.image_id, "split": self.split}
        if self.question is not None:
            result["question"] = self.question
        result["answer"] = self.answer
        result["explanations"] = list(self.explanations)
        if self.complementary_pair_id is not None:
            result["complementary_pair_id"] = self.complementary_pair_id
        if self.masks:
            result["masks"] = list(self.masks)
        return result


def _non_empty_string(value) -> bool:
    return isinstance(value, str) and value.strip() != ""


def parse_record(values, line: int, mode: str = "vqa") -> Tuple[Optional[ExplanationRecord], List[RecordRejection]]:
    """Validate one decoded JSON value; returns the record or the rejections."""
    if not isinstance(values, dict):
        return None, [RecordRejection(line, None, "expected a JSON object")]
    problems = []

    def reject(name, message):
        problems.append(RecordRejection(line, name, message))

    for name in ("id", "image_id", "answer"):
        if name not in values:
            reject(name, "missing required field")
        elif not _non_empty_string(values[name]):
            reject(name, "must be a non-empty string")

    if "split" not in values:
        reject("split", "missing required field")
    elif values["split"] not in SPLITS:
        reject("split", "must be one of {}, got {!r}".format(SPLITS, values["split"]))

    explanations = values.get("explanations")
    if explanations is None:
        reject("explanations", "missing required field")
    elif not isinstance(explanations, list) or not 1 <= len(explanations) <= MAX_EXPLANATIONS:
        reject("explanations", "must be a list of 1 to {} strings".format(MAX_EXPLANATIONS))
    elif not all(_non_empty_string(e) and tokenize(e) for e in explanations):
        reject("explanations", "every explanation must contain at least one word")

    if mode == "act":
        if "question" in values:
            reject("question", "ACT records carry no question")
    elif "question" not in values:
        reject("question", "missing required field")
    elif not isinstance(values["question"], str) or not tokenize(values["question"]):
        reject("question", "must contain at least one word")

    pair_id = values.get("complementary_pair_id")
    if pair_id is not None and not _non_empty_string(pair_id):
        reject("complementary_pair_id", "must be a non-empty string or null")
    masks = values.get("masks", [])
    if not isinstance(masks, list) or not all(_non_empty_string(m) for m in masks):
        reject("masks", "must be a list of paths")

    unknown = sorted(set(values) - _KNOWN_FIELDS)
    if unknown:
        _logger.debug("line %d: ignoring unknown fields %s", line, unknown)

    if problems:
        return None, problems
    record = ExplanationRecord(
        id=values["id"],
        image_id=values["image_id"],
        split=values["split"],
        answer=values["answer"],
        explanations=list(explanations),
        question=values.get("question") if mode != "act" else None,
        complementary_pair_id=pair_id,
        masks=list(masks),
    )
    return record, []


def read_records(path: str, mode: str = "vqa") -> Tuple[List[ExplanationRecord], List[RecordRejection]]:
    """Parse a JSON-lines file into valid records and rejections. Blank lines are skipped."""
    records = []
    rejections = []
    seen = {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                values = json.loads(line)
            except ValueError as e:
                rejections.append(RecordRejection(line_number, None, "invalid JSON: {}".format(e)))
                continue
            record, problems = parse_record(values, line_number, mode)
            if problems:
                rejections.extend(problems)
                continue
            if record.id in seen:
                rejections.append(
                    RecordRejection(
                        line_number, "id", "duplicate id {!r} (first on line {})".format(record.id, seen[record.id])
                    )
                )
                continue
            seen[record.id] = line_number
            records.append(record)
    return records, rejections


def validate_records(path: str, mode: str = "vqa") -> List[RecordRejection]:
    return read_records(path, mode)[1]


def load_records(path: str, mode: str = "vqa", on_error: str = "raise") -> List[ExplanationRecord]:
    """Load and validate a JSON-lines dataset file.

    Parameters
    ----------
    path: str
        file to read
    mode: str
        ``"vqa"`` requires a question per record, ``"act"`` forbids it
    on_error: str
        ``"raise"`` raises :class:`~pjx.utils.RecordValidationError` listing
        all rejections; ``"skip"`` drops rejected lines with a warning

    Raises
    ------
    FileNotFoundError
        if ``path`` does not exist
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip', got {!r}".format(on_error))
    records, rejections = read_records(path, mode)
    if rejections:
        if on_error == "raise":
            raise RecordValidationError(rejections, path)
        for rejection in rejections:
            _logger.warning("%s: skipping %s", path, rejection)
    _logger.info("loaded %d records from %s", len(records), path)
    return records


def save_records(records: Sequence[ExplanationRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), sort_keys=False) + "\n")
    _logger.info("wrote %d records to %s", len(records), path)


def select_split(records: Sequence[ExplanationRecord], split: Optional[str]) -> List[ExplanationRecord]:
    """Records of one split; ``None`` keeps all."""
    if split is None:
        return list(records)
    return [r for r in records if r.split == split]


def complementary_pairs(records: Sequence[ExplanationRecord]) -> List[Tuple[str, str]]:
    """Id pairs of records sharing a complementary pair id, sorted.

    Pair ids with more or fewer than two members are ignored.
    """
    members = {}
    for record in records:
        if record.complementary_pair_id is not None:
            members.setdefault(record.complementary_pair_id, []).append(record.id)
    pairs = []
    for pair_id in sorted(members):
        ids = sorted(members[pair_id])
        if len(ids) == 2:
            pairs.append((ids[0], ids[1]))
        else:
            _logger.debug("complementary pair %s has %d members, ignored", pair_id, len(ids))
    return pairs


__all__ = [
    "SPLITS",
    "MAX_EXPLANATIONS",
    "ExplanationRecord",
    "parse_record",
    "read_records",
    "validate_records",
    "load_records",
    "save_records",
    "select_split",
    "complementary_pairs",
]
