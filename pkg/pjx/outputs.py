"""
Explanation output files.

``explain`` writes one JSON-lines file whose first line is a header echoing
how the explanations were produced, followed by one line per record::

    {"header": {"conditioning": "gt", "beam_width": 1, "max_len": 20, "use_pointing": true, "n": 2}}
    {"id": "q1", "answer_id": 3, "answer": "skiing",
     "justification": "he is going down a snowy slope",
     "pointing": "pointing/q1.pjxt", "answer_attention": "attention/q1.pjxt"}

Map paths are relative to the directory of the file.
"""
from __future__ import absolute_import, division, print_function

import json
import logging
import os

import numpy as np

from dataclasses import dataclass, field

from pjx.tensor.container import SUFFIX, load_tensor, save_tensor
from pjx.utils import ContractError

from typing import Dict, List, Optional, Sequence

_logger = logging.getLogger(__name__)

EXPLANATIONS_FILE = "explanations.jsonl"
POINTING_DIR = "pointing"
ATTENTION_DIR = "attention"
ATTENTION_TOLERANCE = 1e-9


@dataclass
class ExplanationEntry:
    """One output line. ``answer`` is the conditioning answer, ``predicted_answer`` the model's prediction."""

    id: str
    answer_id: int
    answer: str
    justification: str
    pointing: str
    answer_attention: str
    predicted_answer_id: Optional[int] = None
    predicted_answer: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "answer_id": self.answer_id,
            "answer": self.answer,
            "predicted_answer_id": self.predicted_answer_id,
            "predicted_answer": self.predicted_answer,
            "justification": self.justification,
            "pointing": self.pointing,
            "answer_attention": self.answer_attention,
        }


@dataclass
class ExplanationFile:
    """Header and entries of an explanation output file; ``root`` resolves the map paths."""

    header: dict
    entries: List[ExplanationEntry]
    root: str = "."
    _maps: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def conditioning(self) -> str:
        return self.header["conditioning"]

    def justifications(self) -> Dict[str, str]:
        return {e.id: e.justification for e in self.entries}

    def pointing_maps(self) -> Dict[str, np.ndarray]:
        return {e.id: self._load(e.pointing) for e in self.entries}

    def attention_maps(self) -> Dict[str, np.ndarray]:
        return {e.id: self._load(e.answer_attention) for e in self.entries}

    def _load(self, relative: str) -> np.ndarray:
        if relative not in self._maps:
            self._maps[relative] = load_tensor(os.path.join(self.root, relative), expected_rank=2)
        return self._maps[relative]


def check_attention_map(grid: np.ndarray, name: str) -> None:
    """Raise :class:`~pjx.utils.ContractError` unless ``grid`` is non-negative with unit sum."""
    if grid.min() < 0.0 or abs(grid.sum() - 1.0) > ATTENTION_TOLERANCE:
        raise ContractError("{}: not a unit-mass map (min {!r}, sum {!r})".format(name, grid.min(), grid.sum()))


def write_explanations(directory: str, ids: Sequence[str], explanations, vocabularies, header: dict) -> str:
    """Write explanations of the records ``ids`` with their maps below ``directory``.

    Parameters
    ----------
    explanations: sequence of :class:`~pjx.explainer.Explanation`
        aligned with ``ids``
    vocabularies: :class:`~pjx.data.vocabulary.Vocabularies`
        to turn ids into words
    header: dict
        written as the first line; must name the ``conditioning``

    Returns
    -------
    str
        path of the JSON-lines file

    Raises
    ------
    ContractError
        if a map is not a unit-mass distribution
    """
    if len(ids) != len(explanations):
        raise ContractError("{} ids for {} explanations".format(len(ids), len(explanations)))
    if "conditioning" not in header:
        raise ContractError("the header must echo the conditioning mode")
    for sub in (POINTING_DIR, ATTENTION_DIR):
        os.makedirs(os.path.join(directory, sub), exist_ok=True)
    path = os.path.join(directory, EXPLANATIONS_FILE)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"header": dict(header, n=len(ids))}, sort_keys=True) + "\n")
        for record_id, explanation in zip(ids, explanations):
            check_attention_map(explanation.pointing, "pointing map of {}".format(record_id))
            check_attention_map(explanation.answer_attention, "answer attention of {}".format(record_id))
            pointing = "/".join((POINTING_DIR, record_id + SUFFIX))
            attention = "/".join((ATTENTION_DIR, record_id + SUFFIX))
            save_tensor(os.path.join(directory, pointing), explanation.pointing)
            save_tensor(os.path.join(directory, attention), explanation.answer_attention)
            entry = ExplanationEntry(
                id=record_id,
                answer_id=int(explanation.answer_id),
                answer=vocabularies.answers.word(explanation.answer_id),
                predicted_answer_id=explanation.predicted_answer_id,
                predicted_answer=vocabularies.answers.word(explanation.predicted_answer_id),
                justification=" ".join(vocabularies.explanations.decode(explanation.justification)),
                pointing=pointing,
                answer_attention=attention,
            )
            f.write(json.dumps(entry.to_dict()) + "\n")
    _logger.info("wrote %d explanations to %s", len(ids), path)
    return path


def read_explanations(path: str) -> ExplanationFile:
    """Read a file written by :func:`write_explanations`; ``path`` may be the file or its directory.

    Raises
    ------
    FileNotFoundError
        if there is no such file
    ContractError
        for a missing header, a malformed line or a duplicate id, naming the line
    """
    if os.path.isdir(path):
        path = os.path.join(path, EXPLANATIONS_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError("explanation file not found: {}".format(path))
    header = None
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                values = json.loads(line)
            except ValueError as e:
                raise ContractError("{} line {}: invalid JSON: {}".format(path, line_number, e))
            if header is None:
                if not isinstance(values, dict) or "header" not in values:
                    raise ContractError("{} line {}: expected the header line".format(path, line_number))
                header = values["header"]
                continue
            try:
                entry = ExplanationEntry(**values)
            except TypeError as e:
                raise ContractError("{} line {}: {}".format(path, line_number, e))
            if entry.id in seen:
                raise ContractError("{} line {}: duplicate id {!r}".format(path, line_number, entry.id))
            seen.add(entry.id)
            entries.append(entry)
    if header is None:
        raise ContractError("{}: empty explanation file".format(path))
    return ExplanationFile(header, entries, os.path.dirname(path))


__all__ = [
    "EXPLANATIONS_FILE",
    "ExplanationEntry",
    "ExplanationFile",
    "check_attention_map",
    "write_explanations",
    "read_explanations",
]
