r"""
Evaluation of pointing maps against ground-truth heatmaps.

Earth Mover's Distance is solved exactly as a transportation problem between
the nonzero cells of both maps, with the Euclidean distance between cell
centers as ground distance:

.. math::

   \operatorname{EMD}(p, q) = \min_{f \geq 0} \sum_{i, j} f_{ij} \lVert c_i - c_j \rVert_2
   \quad \text{s.t.} \quad \sum_j f_{ij} = p_i, \; \sum_i f_{ij} = q_j

A constant cell spacing only scales the distance linearly. Rank correlation
is Spearman's coefficient with average ranks for ties, computed on both
maps rescaled to 14 x 14.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata
from sklearn.utils import check_random_state

from dataclasses import dataclass

from pjx import answering
from pjx.metrics._min_cost_flow import transport_cost
from pjx.metrics.report import ScoreReport
from pjx.utils import ContractError, MassMismatchError, ShapeError, standard_error

from typing import List, Mapping, Optional, Tuple

_logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-6
RESAMPLE_SIZE = 14
POINTING_METRICS = ("EMD", "RankCorrelation")


def _distribution(grid, name: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise ContractError("{} must be finite and non-negative".format(name))
    return grid


def _check_masses(p: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    sum_p, sum_q = p.sum(), q.sum()
    if abs(sum_p - 1.0) > MASS_TOLERANCE or abs(sum_q - 1.0) > MASS_TOLERANCE:
        raise MassMismatchError("distributions must have unit mass, sums are {!r} and {!r}".format(sum_p, sum_q))
    if abs(sum_p - 1.0) > 1e-9 or abs(sum_q - 1.0) > 1e-9:
        _logger.warning("renormalizing distributions with sums %r and %r", sum_p, sum_q)
    return p / sum_p, q / sum_q


def emd(p, q, cell_spacing: float = 1.0) -> float:
    """Exact Earth Mover's Distance between two unit-mass grids.

    Parameters
    ----------
    p, q: array
        ``N x M`` distributions; sums within ``1e-6`` of one are renormalized
    cell_spacing: float
        distance between neighbouring cell centers

    >>> emd([[1.0, 0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0, 1.0]])
    3.0

    Raises
    ------
    ShapeError
        if the grids differ in shape
    MassMismatchError
        if a sum deviates from one by more than the tolerance, naming both sums
    """
    p = _distribution(p, "p")
    q = _distribution(q, "q")
    if p.shape != q.shape or p.ndim != 2:
        raise ShapeError("EMD needs two N x M grids of one shape, got {} and {}".format(p.shape, q.shape))
    p, q = _check_masses(p, q)
    if np.array_equal(p, q):
        return 0.0
    supply_cells = np.argwhere(p > 0)
    demand_cells = np.argwhere(q > 0)
    cost = cdist(supply_cells.astype(np.float64), demand_cells.astype(np.float64)) * float(cell_spacing)
    supply = p[tuple(supply_cells.T)]
    demand = q[tuple(demand_cells.T)]
    return float(transport_cost(supply, demand, np.ascontiguousarray(cost)))


def emd_1d_oracle(p, q) -> float:
    r"""Closed form :math:`\sum_i |F_p(i) - F_q(i)|` of the EMD on a line with unit spacing.

    >>> emd_1d_oracle([0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5])
    2.0
    """
    p = _distribution(p, "p").ravel()
    q = _distribution(q, "q").ravel()
    if p.shape != q.shape:
        raise ShapeError("vectors of different length {} and {}".format(p.shape, q.shape))
    p, q = _check_masses(p, q)
    return float(np.abs(np.cumsum(p - q))[:-1].sum())


def rank_correlation(a, b) -> Optional[float]:
    """Spearman correlation of two grids of one shape with average ranks for ties.

    Returns ``None`` if either grid is constant.

    >>> rank_correlation([[1.0, 2.0], [3.0, 4.0]], [[10.0, 20.0], [30.0, 40.0]])
    1.0
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("rank correlation needs grids of one shape, got {} and {}".format(a.shape, b.shape))
    ra = rankdata(a.ravel(), method="average")
    rb = rankdata(b.ravel(), method="average")
    ra -= ra.mean()
    rb -= rb.mean()
    denominator = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if denominator == 0.0:
        return None
    return float(np.clip(np.dot(ra, rb) / denominator, -1.0, 1.0))


def _overlap(n_in: int, n_out: int) -> np.ndarray:
    edges_in = np.linspace(0.0, 1.0, n_in + 1)
    edges_out = np.linspace(0.0, 1.0, n_out + 1)
    upper = np.minimum.outer(edges_out[1:], edges_in[1:])
    lower = np.maximum.outer(edges_out[:-1], edges_in[:-1])
    return np.clip(upper - lower, 0.0, None)


def resample(grid, target: int = RESAMPLE_SIZE) -> np.ndarray:
    """Area-weighted rescaling to ``target x target`` followed by renormalization to unit sum.

    A grid already at the target size is returned as an identical copy.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ShapeError("resample needs an N x M grid, got {}".format(grid.shape))
    if grid.shape == (target, target):
        return grid.copy()
    rows = _overlap(grid.shape[0], target)
    cols = _overlap(grid.shape[1], target)
    out = rows @ grid @ cols.T
    mass = out.sum()
    return out / mass if mass != 0.0 else out


def baseline_uniform(n_rows: int = RESAMPLE_SIZE, n_cols: int = RESAMPLE_SIZE) -> np.ndarray:
    return np.full((n_rows, n_cols), 1.0 / (n_rows * n_cols))


def baseline_random_point(n_rows: int = RESAMPLE_SIZE, n_cols: int = RESAMPLE_SIZE, seed=None) -> np.ndarray:
    """All mass on one uniformly drawn cell."""
    grid = np.zeros((n_rows, n_cols))
    grid.flat[check_random_state(seed).randint(n_rows * n_cols)] = 1.0
    return grid


def baseline_answering(params, features, question_ids=None) -> np.ndarray:
    """The latent answer attention of the answering model used as pointing map."""
    return answering.predict(params, features, question_ids).attention


@dataclass
class PointingScore:
    """Per-instance EMD and rank correlation of aligned maps.

    ``rank_correlation`` holds ``None`` where it is undefined; those instances
    are excluded from its aggregate.
    """

    ids: List[str]
    emd: List[float]
    rank_correlation: List[Optional[float]]
    cell_spacing: float = 1.0

    @property
    def mean_emd(self) -> float:
        return float(np.mean(self.emd))

    @property
    def emd_std_error(self) -> float:
        return standard_error(self.emd)[0]

    @property
    def defined_rank_correlations(self) -> List[float]:
        return [v for v in self.rank_correlation if v is not None]

    @property
    def mean_rank_correlation(self) -> Optional[float]:
        values = self.defined_rank_correlations
        return float(np.mean(values)) if values else None

    @property
    def rank_correlation_std_error(self) -> Optional[float]:
        values = self.defined_rank_correlations
        return standard_error(values)[0] if values else None

    @property
    def excluded_count(self) -> int:
        return len(self.rank_correlation) - len(self.defined_rank_correlations)


def score_pointing(
    predictions: Mapping[str, np.ndarray],
    ground_truths: Mapping[str, np.ndarray],
    cell_spacing: float = 1.0,
    resample_size: int = RESAMPLE_SIZE,
) -> PointingScore:
    """Score predicted maps against ground-truth heatmaps, aligned by instance id.

    EMD is computed at the common grid resolution; maps of different shapes
    are first rescaled to ``resample_size``. Rank correlation always compares
    the rescaled maps.

    Raises
    ------
    ContractError
        if the id sets differ, listing the missing ids
    """
    missing_predictions = sorted(set(ground_truths) - set(predictions))
    missing_truths = sorted(set(predictions) - set(ground_truths))
    if missing_predictions or missing_truths:
        raise ContractError(
            "ids not aligned: no prediction for {}, no ground truth for {}".format(missing_predictions, missing_truths)
        )
    if not ground_truths:
        raise ContractError("nothing to score")
    ids = sorted(ground_truths)
    emds = []
    correlations = []
    for instance_id in ids:
        predicted = np.asarray(predictions[instance_id], dtype=np.float64)
        truth = np.asarray(ground_truths[instance_id], dtype=np.float64)
        if predicted.shape != truth.shape:
            predicted = resample(predicted, resample_size)
            truth = resample(truth, resample_size)
        emds.append(emd(predicted, truth, cell_spacing))
        correlations.append(rank_correlation(resample(predicted, resample_size), resample(truth, resample_size)))
        _logger.debug("%s: EMD %.6f, rank correlation %s", instance_id, emds[-1], correlations[-1])
    score = PointingScore(ids, emds, correlations, cell_spacing)
    if score.excluded_count:
        _logger.warning("rank correlation undefined for %d of %d instances", score.excluded_count, len(ids))
    return score


#: Full-scale results of the pointing-and-justification model, documentation only.
REFERENCE_RESULTS = {
    "VQA-X": {"EMD": 2.64, "RankCorrelation": 0.3423},
    "ACT-X": {"EMD": 2.54, "RankCorrelation": 0.3933},
}


def pointing_report(score: PointingScore) -> Tuple[ScoreReport, ScoreReport]:
    """EMD and rank correlation reports of a :class:`PointingScore`."""
    emd_report = ScoreReport.from_values("EMD", score.ids, score.emd)
    emd_report.notes = {"cell_spacing": score.cell_spacing, "lower_is_better": True}
    rank_report = ScoreReport.from_values("RankCorrelation", score.ids, score.rank_correlation)
    rank_report.notes = {"lower_is_better": False, "resample_size": RESAMPLE_SIZE}
    return emd_report, rank_report


def pair_slice(score: PointingScore, pairs) -> PointingScore:
    """Restrict a score to the members of complementary pairs."""
    members = {i for pair in pairs for i in pair}
    keep = [k for k, i in enumerate(score.ids) if i in members]
    return PointingScore(
        [score.ids[k] for k in keep],
        [score.emd[k] for k in keep],
        [score.rank_correlation[k] for k in keep],
        score.cell_spacing,
    )


__all__ = [
    "MASS_TOLERANCE",
    "RESAMPLE_SIZE",
    "POINTING_METRICS",
    "REFERENCE_RESULTS",
    "emd",
    "emd_1d_oracle",
    "rank_correlation",
    "resample",
    "baseline_uniform",
    "baseline_random_point",
    "baseline_answering",
    "PointingScore",
    "score_pointing",
    "pointing_report",
    "pair_slice",
]
