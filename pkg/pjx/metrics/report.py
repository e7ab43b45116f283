"""Score reports shared by the text and pointing metrics."""
from __future__ import absolute_import, division, print_function

import json
import logging

import numpy as np
import pandas as pd

from dataclasses import dataclass, field

from pjx.utils import standard_error

from typing import Dict, List, Mapping, Optional, Sequence

_logger = logging.getLogger(__name__)


@dataclass
class ScoreReport:
    """Aggregate and per-instance values of one metric.

    JSON shape::

        {"metric": "EMD", "n": 2, "mean": 1.5, "std_error": 0.5,
         "excluded_count": 0,
         "per_instance": [{"id": "a", "value": 1.0}, {"id": "b", "value": 2.0}]}

    ``n`` counts the instances entering the aggregate; instances whose
    value is ``None`` are excluded and counted in ``excluded_count``.
    Placeholders of metrics that are not computed carry
    ``available=False`` and no values.
    """

    metric: str
    n: int
    mean: Optional[float]
    std_error: Optional[float]
    excluded_count: int = 0
    per_instance: List[dict] = field(default_factory=list)
    available: bool = True
    single_instance: bool = False
    notes: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_values(
        cls, metric: str, ids: Sequence[str], values: Sequence[Optional[float]], mean: Optional[float] = None
    ) -> "ScoreReport":
        """Aggregate per-instance values; ``mean`` overrides the plain average (corpus-level metrics)."""
        kept = [v for v in values if v is not None]
        if kept:
            se, convention = standard_error(kept)
            average = float(np.mean(kept)) if mean is None else float(mean)
        else:
            se, convention, average = None, False, None
        return cls(
            metric=metric,
            n=len(kept),
            mean=average,
            std_error=se,
            excluded_count=len(values) - len(kept),
            per_instance=[{"id": i, "value": None if v is None else float(v)} for i, v in zip(ids, values)],
            single_instance=convention,
        )

    @classmethod
    def unavailable(cls, metric: str, reason: str) -> "ScoreReport":
        return cls(metric=metric, n=0, mean=None, std_error=None, available=False, notes={"reason": reason})

    def to_dict(self) -> dict:
        result = {
            "metric": self.metric,
            "n": self.n,
            "mean": self.mean,
            "std_error": self.std_error,
            "excluded_count": self.excluded_count,
            "per_instance": list(self.per_instance),
        }
        if not self.available:
            result["available"] = False
        if self.single_instance:
            result["single_instance"] = True
        if self.notes:
            result["notes"] = dict(self.notes)
        return result

    @classmethod
    def from_dict(cls, values: Mapping) -> "ScoreReport":
        return cls(
            metric=values["metric"],
            n=values["n"],
            mean=values["mean"],
            std_error=values["std_error"],
            excluded_count=values.get("excluded_count", 0),
            per_instance=list(values.get("per_instance", [])),
            available=values.get("available", True),
            single_instance=values.get("single_instance", False),
            notes=dict(values.get("notes", {})),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_instance, columns=["id", "value"])

    def value_of(self, instance_id: str) -> Optional[float]:
        for entry in self.per_instance:
            if entry["id"] == instance_id:
                return entry["value"]
        raise KeyError(instance_id)


def save_reports(reports: Sequence[ScoreReport], path: str) -> None:
    """Write a JSON list of reports."""
    with open(path, "w") as f:
        json.dump([r.to_dict() for r in reports], f, indent=2)
    _logger.info("wrote %s to %s", ", ".join(r.metric for r in reports), path)


def load_reports(path: str) -> List[ScoreReport]:
    with open(path) as f:
        return [ScoreReport.from_dict(values) for values in json.load(f)]


__all__ = ["ScoreReport", "save_reports", "load_reports"]
