"""
Synthetic explanation corpus for desk-scale training and tests.

Every instance has a square hot region at a random grid position. Feature
channels are laid out as

- channel 0: saliency marker, 1 inside the hot region
- channels ``1 .. n_answers``: one-hot answer, inside the hot region only
- the next ``n_attributes`` channels: one-hot attribute of the object inside
  the hot region; every background cell carries one distractor attribute
- remaining channels: small Gaussian noise (all channels receive noise)

The justification names the attribute and the answer, ``"because it is a
red cat"``, so the attribute word can only be read from the hot region, which
the pointing attention has to find. Annotator masks mark the hot region.
"""
from __future__ import absolute_import, division, print_function

import json
import logging
import os

import numpy as np
from sklearn.utils import check_random_state

from dataclasses import dataclass, field

from pjx.data.annotations import save_mask
from pjx.data.features import save_features
from pjx.data.records import ExplanationRecord, save_records
from pjx.data.vocabulary import build_vocab
from pjx.tensor.container import SUFFIX
from pjx.utils import ContractError

from typing import Dict, List, Tuple

_logger = logging.getLogger(__name__)

ANSWERS = ("cat", "dog", "bird", "car", "boat", "horse", "tree", "bus")
ATTRIBUTES = ("red", "blue", "green", "yellow", "white", "black", "small", "large")
QUESTIONS = ("what is this", "what is in the picture", "what can you see", "what object is shown")
TEMPLATES = (
    "because it is a {attribute} {answer}",
    "because the {answer} is {attribute}",
    "because there is a {attribute} {answer}",
)


@dataclass
class SyntheticConfig:
    """Sizes of the synthetic corpus; ``n_val`` instances get three explanations."""

    n_instances: int = 50
    n_val: int = 0
    channels: int = 16
    grid_rows: int = 14
    grid_cols: int = 14
    n_answers: int = 4
    n_attributes: int = 4
    region_size: int = 3
    noise: float = 0.05
    n_annotators: int = 3
    mode: str = "vqa"

    def __post_init__(self):
        if self.n_instances < 1 or self.region_size < 1 or self.n_annotators < 1:
            raise ContractError("synthetic sizes must be positive")
        if not 1 <= self.n_answers <= len(ANSWERS) or not 2 <= self.n_attributes <= len(ATTRIBUTES):
            raise ContractError(
                "at most {} answers and between 2 and {} attributes".format(len(ANSWERS), len(ATTRIBUTES))
            )
        if self.channels < 1 + self.n_answers + self.n_attributes:
            raise ContractError(
                "{} channels cannot hold marker, {} answers and {} attributes".format(
                    self.channels, self.n_answers, self.n_attributes
                )
            )
        if self.region_size > min(self.grid_rows, self.grid_cols):
            raise ContractError("hot region does not fit into the grid")
        if self.mode not in ("vqa", "act"):
            raise ContractError("mode must be 'vqa' or 'act', got {!r}".format(self.mode))


@dataclass
class SyntheticCorpus:
    """Records with features keyed by image id, masks keyed by record id, hot regions."""

    records: List[ExplanationRecord]
    features: Dict[str, np.ndarray]
    masks: Dict[str, List[np.ndarray]]
    regions: Dict[str, Tuple[int, int, int]] = field(default_factory=dict)
    config: SyntheticConfig = field(default_factory=SyntheticConfig)

    def region_map(self, record_id: str) -> np.ndarray:
        """Unit-mass map uniform over the hot region of a record."""
        row, col, size = self.regions[record_id]
        grid = np.zeros((self.config.grid_rows, self.config.grid_cols))
        grid[row : row + size, col : col + size] = 1.0
        return grid / grid.sum()


def _annotator_mask(row, col, size, config, annotator, random_state) -> np.ndarray:
    mask = np.zeros((config.grid_rows, config.grid_cols))
    mask[row : row + size, col : col + size] = 1.0
    if annotator > 0:
        # later annotators also mark one neighbouring cell
        r = int(np.clip(row + random_state.randint(-1, size + 1), 0, config.grid_rows - 1))
        c = int(np.clip(col + random_state.randint(-1, size + 1), 0, config.grid_cols - 1))
        mask[r, c] = 1.0
    return mask


def synth_dataset(config: SyntheticConfig = None, seed=0) -> SyntheticCorpus:
    """Generate a synthetic corpus; the same seed gives an identical corpus.

    Consecutive instances ``2k`` and ``2k + 1`` share the question and form a
    complementary pair with different answers.
    """
    config = config or SyntheticConfig()
    random_state = check_random_state(seed)
    n_total = config.n_instances + config.n_val
    first_attribute = 1 + config.n_answers

    records, features, masks, regions = [], {}, {}, {}
    answer = 0
    question = QUESTIONS[0]
    for i in range(n_total):
        if i % 2 == 0:
            answer = random_state.randint(config.n_answers)
            question = QUESTIONS[random_state.randint(len(QUESTIONS))]
        else:
            shift = 1 + random_state.randint(config.n_answers - 1) if config.n_answers > 1 else 0
            answer = (answer + shift) % config.n_answers
        attribute = random_state.randint(config.n_attributes)
        distractor = (attribute + 1 + random_state.randint(config.n_attributes - 1)) % config.n_attributes
        size = config.region_size
        row = random_state.randint(config.grid_rows - size + 1)
        col = random_state.randint(config.grid_cols - size + 1)

        grid = config.noise * random_state.standard_normal((config.channels, config.grid_rows, config.grid_cols))
        grid[first_attribute + distractor] += 1.0
        hot = (slice(row, row + size), slice(col, col + size))
        grid[(first_attribute + distractor,) + hot] -= 1.0
        grid[(0,) + hot] += 1.0
        grid[(1 + answer,) + hot] += 1.0
        grid[(first_attribute + attribute,) + hot] += 1.0

        record_id = "syn{:05d}".format(i)
        image_id = "img{:05d}".format(i)
        split = "train" if i < config.n_instances else "val"
        words = {"attribute": ATTRIBUTES[attribute], "answer": ANSWERS[answer]}
        templates = TEMPLATES if split == "val" else TEMPLATES[:1]
        mask_paths = ["masks/{}_{}{}".format(record_id, k, SUFFIX) for k in range(config.n_annotators)]
        records.append(
            ExplanationRecord(
                id=record_id,
                image_id=image_id,
                split=split,
                answer=ANSWERS[answer],
                explanations=[t.format(**words) for t in templates],
                question=question if config.mode == "vqa" else None,
                complementary_pair_id="pair{:05d}".format(i // 2) if i // 2 * 2 + 1 < n_total else None,
                masks=mask_paths,
            )
        )
        features[image_id] = grid
        masks[record_id] = [
            _annotator_mask(row, col, size, config, k, random_state) for k in range(config.n_annotators)
        ]
        regions[record_id] = (row, col, size)
    return SyntheticCorpus(records, features, masks, regions, config)


def write_dataset(corpus: SyntheticCorpus, root: str, top_k: int = 3000) -> None:
    """Write the directory layout ``features/``, ``masks/``, ``records.jsonl``, ``vocab.json``.

    ``regions.json`` additionally stores the hot region of every record.
    """
    os.makedirs(os.path.join(root, "masks"), exist_ok=True)
    for image_id, grid in corpus.features.items():
        save_features(image_id, os.path.join(root, "features"), grid)
    for record in corpus.records:
        for path, mask in zip(record.masks, corpus.masks[record.id]):
            save_mask(os.path.join(root, path), mask)
    save_records(corpus.records, os.path.join(root, "records.jsonl"))
    build_vocab(corpus.records, top_k=top_k).save(os.path.join(root, "vocab.json"))
    with open(os.path.join(root, "regions.json"), "w") as f:
        json.dump({k: list(v) for k, v in corpus.regions.items()}, f, indent=2, sort_keys=True)
    _logger.info("wrote synthetic dataset of %d records to %s", len(corpus.records), root)


__all__ = [
    "ANSWERS",
    "ATTRIBUTES",
    "QUESTIONS",
    "TEMPLATES",
    "SyntheticConfig",
    "SyntheticCorpus",
    "synth_dataset",
    "write_dataset",
]
