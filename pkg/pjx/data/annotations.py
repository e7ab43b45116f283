"""
Ground-truth pointing heatmaps from annotator masks.

Each annotator contributes one binary mask at feature resolution. The masks
of one record are summed cell by cell and divided by the total, which gives a
unit-mass distribution over the grid. Every annotator counts with equal
weight.
"""
from __future__ import absolute_import, division, print_function

import logging
import os

import numpy as np

from pjx.tensor.container import SUFFIX, load_tensor, save_tensor
from pjx.utils import ContractError, ShapeError, shape_str

from typing import Dict, Optional, Sequence

_logger = logging.getLogger(__name__)


def aggregate_masks(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Sum binary masks and normalize to unit mass.

    >>> a = np.array([[1, 0]])
    >>> b = np.array([[1, 1]])
    >>> aggregate_masks([a, b])
    array([[0.66666667, 0.33333333]])

    Raises
    ------
    ContractError
        no masks, non-binary values, or no annotated cell at all
    ShapeError
        masks of different shapes
    """
    if len(masks) == 0:
        raise ContractError("at least one mask is needed")
    masks = [np.asarray(m, dtype=np.float64) for m in masks]
    shape = masks[0].shape
    if len(shape) != 2 or any(m.shape != shape for m in masks):
        raise ShapeError("masks must be N x M grids of one shape, got {}".format(shape_str(*masks)))
    total = np.zeros(shape)
    for mask in masks:
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ContractError("masks must be binary")
        total += mask
    mass = total.sum()
    if mass == 0:
        raise ContractError("all masks are empty, no evidence annotated")
    return total / mass


def save_mask(path: str, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise ShapeError("a mask must be an N x M grid, got {}".format(mask.shape))
    save_tensor(path, mask)


def load_mask(path: str) -> np.ndarray:
    return load_tensor(path, expected_rank=2)


def load_heatmap(record, root: str = ".") -> Optional[np.ndarray]:
    """Aggregated ground-truth heatmap of a record; ``None`` if it has no masks.

    Mask paths are relative to ``root``.
    """
    if not record.masks:
        return None
    return aggregate_masks([load_mask(os.path.join(root, path)) for path in record.masks])


def aggregate_annotations(records, root: str, output_dir: str) -> Dict[str, str]:
    """Write one aggregated heatmap per annotated record to ``output_dir/<id>.pjxt``.

    Returns
    -------
    dict
        record id -> written path
    """
    os.makedirs(output_dir, exist_ok=True)
    written = {}
    for record in records:
        heatmap = load_heatmap(record, root)
        if heatmap is None:
            continue
        path = os.path.join(output_dir, record.id + SUFFIX)
        save_tensor(path, heatmap)
        written[record.id] = path
    _logger.info("aggregated annotations of %d records into %s", len(written), output_dir)
    return written


def load_heatmaps(directory: str, ids: Sequence[str]) -> Dict[str, np.ndarray]:
    """Read heatmaps written by :func:`aggregate_annotations`; missing ids are skipped."""
    result = {}
    for record_id in ids:
        path = os.path.join(directory, record_id + SUFFIX)
        if os.path.exists(path):
            result[record_id] = load_tensor(path, expected_rank=2)
    return result


__all__ = [
    "aggregate_masks",
    "save_mask",
    "load_mask",
    "load_heatmap",
    "aggregate_annotations",
    "load_heatmaps",
]
