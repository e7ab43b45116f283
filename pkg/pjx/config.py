"""
Run configuration.

A run is configured by one flat JSON object. Keys of :class:`ModelConfig`
and :class:`TrainConfig` live at the top level next to the paths of the run;
the question encoder is configured with ``question_embed_size`` and
``question_hidden_size`` and must be absent in ACT mode, where the question
representation is the all-ones vector.

>>> config = RunConfig.from_dict({"mode": "act", "epochs": 3})
>>> config.model.question is None, config.train.epochs
(True, 3)
"""
from __future__ import absolute_import, division, print_function

import dataclasses
import json
import logging
import os

from dataclasses import dataclass, field

from pjx.utils import ConfigError

from typing import Any, Dict, Mapping, Optional, Tuple

_logger = logging.getLogger(__name__)

MODES = ("vqa", "act")
CONDITIONING_MODES = ("gt", "pred")
TEXT_METRICS = ("BLEU4", "ROUGEL", "CIDEr")
POINTING_METHODS = ("model", "answering", "uniform", "random-point")
_QUESTION_PREFIX = "question_"


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _from_mapping(cls, values: Mapping[str, Any]):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError("unknown {} option(s): {}".format(cls.__name__, ", ".join(unknown)))
    return cls(**values)


@dataclass
class QuestionConfig:
    """Question encoder sizes: word embedding and hidden size of the 2-layer LSTM."""

    embed_size: int = 16
    hidden_size: int = 32

    def __post_init__(self):
        _check(self.embed_size >= 1 and self.hidden_size >= 1, "question sizes must be positive")


@dataclass
class ModelConfig:
    """Layer sizes of the answering and explanation models.

    Parameters
    ----------
    channels: int
        number of channels ``C`` of the spatial image features
    grid_rows, grid_cols: int
        spatial extent ``N x M`` of the features
    pooled_size: int
        size of the fused image-question representation
    attention_hidden: int
        hidden channels between the two 1x1 convolutions of the answer attention
    answer_embed_size: int
        size ``d`` of the answer embedding and of the explanation context
    pointing_hidden: int
        hidden channels of the pointing attention
    decoder_embed_size, decoder_hidden: int
        word embedding and hidden size of the justification decoder
    use_pointing: bool
        ``False`` replaces the pointing map by the uniform map in the
        explanation context (ablation without attention)
    question: :class:`QuestionConfig` or None
        ``None`` selects ACT mode
    """

    channels: int = 16
    grid_rows: int = 14
    grid_cols: int = 14
    pooled_size: int = 32
    attention_hidden: int = 32
    answer_embed_size: int = 32
    pointing_hidden: int = 32
    decoder_embed_size: int = 16
    decoder_hidden: int = 32
    use_pointing: bool = True
    question: Optional[QuestionConfig] = field(default_factory=QuestionConfig)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type is int:
                _check(int(value) >= 1, "{} must be positive, got {}".format(f.name, value))

    @property
    def act(self) -> bool:
        return self.question is None

    @property
    def question_size(self) -> int:
        """Size of the question representation; the pooled size in ACT mode."""
        return self.pooled_size if self.question is None else self.question.hidden_size

    @classmethod
    def full_scale(cls, act: bool = False) -> "ModelConfig":
        """Sizes of the full model on ResNet-152 features."""
        return cls(
            channels=2048,
            pooled_size=2048,
            attention_hidden=512,
            answer_embed_size=300,
            pointing_hidden=512,
            decoder_embed_size=300,
            decoder_hidden=1024,
            question=None if act else QuestionConfig(embed_size=300, hidden_size=512),
        )

    def to_dict(self) -> Dict[str, Any]:
        result = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "question"}
        if self.question is not None:
            for key, value in dataclasses.asdict(self.question).items():
                result[_QUESTION_PREFIX + key] = value
        return result

    @classmethod
    def from_dict(cls, values: Mapping[str, Any], act: bool = False) -> "ModelConfig":
        values = dict(values)
        question_values = {
            k[len(_QUESTION_PREFIX) :]: values.pop(k) for k in list(values) if k.startswith(_QUESTION_PREFIX)
        }
        if act:
            _check(
                not question_values,
                "ACT mode uses no question encoder, remove: {}".format(
                    ", ".join(_QUESTION_PREFIX + k for k in sorted(question_values))
                ),
            )
            question = None
        else:
            question = _from_mapping(QuestionConfig, question_values)
        values["question"] = question
        return _from_mapping(cls, values)


@dataclass
class TrainConfig:
    """Optimization and decoding settings.

    ``conditioning`` selects whether the explanation model consumes the
    ground-truth answer one-hot (``"gt"``) or the predicted answer
    distribution (``"pred"``). ``joint`` trains answering and explanation
    model together on the summed loss.
    """

    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    dropout: float = 0.3
    freeze_answerer: bool = True
    conditioning: str = "gt"
    joint: bool = False
    max_len: int = 20
    beam_width: int = 1

    def __post_init__(self):
        _check(self.learning_rate > 0, "learning_rate must be positive, got {}".format(self.learning_rate))
        _check(self.batch_size >= 1, "batch_size must be positive, got {}".format(self.batch_size))
        _check(self.epochs >= 0, "epochs must not be negative, got {}".format(self.epochs))
        _check(0.0 <= self.dropout < 1.0, "dropout must lie in [0, 1), got {}".format(self.dropout))
        _check(
            self.conditioning in CONDITIONING_MODES,
            "conditioning must be one of {}, got {!r}".format(CONDITIONING_MODES, self.conditioning),
        )
        _check(self.max_len >= 1, "max_len must be positive, got {}".format(self.max_len))
        _check(self.beam_width >= 1, "beam_width must be positive, got {}".format(self.beam_width))

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "TrainConfig":
        return _from_mapping(cls, values)


@dataclass
class RunConfig:
    """Everything a CLI command needs: mode, paths, model, training and metrics."""

    mode: str = "vqa"
    dataset: Optional[str] = None
    features: Optional[str] = None
    checkpoint: Optional[str] = None
    answerer_checkpoint: Optional[str] = None
    output: Optional[str] = None
    predictions: Optional[str] = None
    split: Optional[str] = None
    method: str = "model"
    metrics: Tuple[str, ...] = TEXT_METRICS
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        _check(self.mode in MODES, "mode must be one of {}, got {!r}".format(MODES, self.mode))
        _check(
            self.model.act == (self.mode == "act"),
            "mode {!r} does not match the model configuration (question encoder {})".format(
                self.mode, "absent" if self.model.act else "present"
            ),
        )
        _check(
            self.method in POINTING_METHODS,
            "method must be one of {}, got {!r}".format(POINTING_METHODS, self.method),
        )
        self.metrics = tuple(self.metrics)
        unknown = sorted(set(self.metrics) - set(TEXT_METRICS))
        _check(not unknown, "unknown text metric(s): {}".format(", ".join(unknown)))

    @property
    def seed(self) -> int:
        return self.train.seed

    def to_dict(self) -> Dict[str, Any]:
        result = {
            f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in ("model", "train")
        }
        result["metrics"] = list(self.metrics)
        result.update(self.model.to_dict())
        result.update(self.train.to_dict())
        return result

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "RunConfig":
        values = dict(values)
        run_names = {f.name for f in dataclasses.fields(cls)} - {"model", "train"}
        train_names = {f.name for f in dataclasses.fields(TrainConfig)}
        run_values = {k: values.pop(k) for k in list(values) if k in run_names}
        train_values = {k: values.pop(k) for k in list(values) if k in train_names}
        mode = run_values.get("mode", "vqa")
        _check(mode in MODES, "mode must be one of {}, got {!r}".format(MODES, mode))
        model = ModelConfig.from_dict(values, act=mode == "act")
        return cls(model=model, train=TrainConfig.from_dict(train_values), **run_values)

    def validate_paths(self, *names: str) -> None:
        """Check that the named path options are set and exist.

        Raises
        ------
        ConfigError
            if an option is unset
        FileNotFoundError
            if the path does not exist
        """
        for name in names:
            path = getattr(self, name)
            _check(path is not None, "option '{}' is required".format(name))
            if not os.path.exists(path):
                raise FileNotFoundError("{} not found: {}".format(name, path))

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        _logger.info("wrote run configuration to %s", path)


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read a flat JSON configuration and apply overrides (``None`` values are ignored).

    Question options are rejected in ACT mode no matter where they come from.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        with open(path) as f:
            try:
                values = json.load(f)
            except ValueError as e:
                raise ConfigError("{} is not valid JSON: {}".format(path, e))
        _check(isinstance(values, dict), "{} must contain a JSON object".format(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig.from_dict(values)


__all__ = [
    "MODES",
    "CONDITIONING_MODES",
    "TEXT_METRICS",
    "POINTING_METHODS",
    "QuestionConfig",
    "ModelConfig",
    "TrainConfig",
    "RunConfig",
    "load_run_config",
]
