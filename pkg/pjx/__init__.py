"""This package contains a pointing and justification explanation model for
visual question answering and activity recognition.

The answering model predicts an answer from spatial image features and a
question through a latent attention map. The explanation model, conditioned
on the answer, points at the image evidence with a second attention map and
generates a textual justification.

API reference

Models and training

- :func:`~.train_answerer`
- :func:`~.train_explainer`
- :func:`~.train_joint`
- :class:`~.AnswererEstimator`
- :class:`~.ExplainerEstimator`
- :func:`~.explain_instance`

Evaluation

- :func:`~.score_pointing`
- :func:`~.score_text`

Data

- :func:`~.load_records`
- :func:`~.build_vocab`
- :func:`~.synth_dataset`
"""

from __future__ import division, print_function


from pjx.config import ModelConfig, RunConfig, TrainConfig, load_run_config
from pjx.data.records import ExplanationRecord, load_records
from pjx.data.synthetic import SyntheticConfig, synth_dataset
from pjx.data.vocabulary import build_vocab
from pjx.explainer import explain_instance
from pjx.metrics.pointing import score_pointing
from pjx.metrics.text import score_text
from pjx.params import ModelParams
from pjx.training import (
    AnswererEstimator,
    ExplainerEstimator,
    train_answerer,
    train_explainer,
    train_joint,
)

__all__ = [
    "ModelConfig",
    "RunConfig",
    "TrainConfig",
    "load_run_config",
    "ExplanationRecord",
    "load_records",
    "SyntheticConfig",
    "synth_dataset",
    "build_vocab",
    "explain_instance",
    "score_pointing",
    "score_text",
    "ModelParams",
    "AnswererEstimator",
    "ExplainerEstimator",
    "train_answerer",
    "train_explainer",
    "train_joint",
]

__version__ = "0.1.0"
