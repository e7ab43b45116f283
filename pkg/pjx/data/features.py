"""Precomputed spatial image features stored as ``<feature_dir>/<image_id>.pjxt``."""
from __future__ import absolute_import, division, print_function

import logging
import os

import numpy as np

from pjx.tensor.container import SUFFIX, load_tensor, save_tensor
from pjx.utils import ShapeError

from typing import Dict, Optional, Tuple

_logger = logging.getLogger(__name__)


def feature_path(image_id: str, feature_dir: str) -> str:
    return os.path.join(feature_dir, image_id + SUFFIX)


def load_features(
    image_id: str, feature_dir: str, grid: Optional[Tuple[int, int]] = None, channels: Optional[int] = None
) -> np.ndarray:
    """Load the ``C x N x M`` features of an image.

    Raises
    ------
    FileNotFoundError
        no file for ``image_id``
    CorruptTensorFileError
        damaged file
    TensorRankError
        stored tensor is not of rank 3
    ShapeError
        grid or channel count differ from the expected ones
    """
    path = feature_path(image_id, feature_dir)
    if not os.path.exists(path):
        raise FileNotFoundError("features of image {!r} not found: {}".format(image_id, path))
    features = load_tensor(path, expected_rank=3)
    if grid is not None and tuple(features.shape[1:]) != tuple(grid):
        raise ShapeError("{}: grid {} differs from configured {}".format(path, features.shape[1:], tuple(grid)))
    if channels is not None and features.shape[0] != channels:
        raise ShapeError("{}: {} channels, configured {}".format(path, features.shape[0], channels))
    return features


def save_features(image_id: str, feature_dir: str, features: np.ndarray) -> str:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ShapeError("features must be C x N x M, got {}".format(features.shape))
    os.makedirs(feature_dir, exist_ok=True)
    path = feature_path(image_id, feature_dir)
    save_tensor(path, features)
    return path


class FeatureStore(object):
    """Loads features on first access and keeps them in memory."""

    def __init__(self, feature_dir: str, grid: Optional[Tuple[int, int]] = None, channels: Optional[int] = None):
        self.feature_dir = feature_dir
        self.grid = grid
        self.channels = channels
        self._cache: Dict[str, np.ndarray] = {}

    def __getitem__(self, image_id: str) -> np.ndarray:
        if image_id not in self._cache:
            self._cache[image_id] = load_features(image_id, self.feature_dir, self.grid, self.channels)
        return self._cache[image_id]

    def __len__(self) -> int:
        return len(self._cache)


__all__ = ["feature_path", "load_features", "save_features", "FeatureStore"]
