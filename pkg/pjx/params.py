"""
Named model tensors with freeze flags, initialization and checkpoints.

Tensor names are dotted, the prefix before the first dot names the layer:

Answering model
    ``q_embed``, ``q_lstm1.*``, ``q_lstm2.*`` (question encoder, absent in
    ACT mode), ``iq.*`` (image-question pooling), ``att.*`` (answer
    attention), ``pred.*`` (answer head)
Explanation model
    ``ans.*`` (answer embedding), ``iqa.*`` (answer-conditioned pooling),
    ``point.*`` (pointing attention), ``ctx.*`` (explanation context),
    ``dec.*`` (justification decoder)

A checkpoint is a directory with one PJXT file per tensor and a
``manifest.json``::

    {"tensors": {name: {"file": ..., "shape": [...], "frozen": bool}},
     "order": [name, ...],
     "metadata": {...}}
"""
from __future__ import absolute_import, division, print_function

import json
import logging
import os

import numpy as np
from sklearn.utils import check_random_state

from pjx.config import ModelConfig
from pjx.tensor.container import SUFFIX, load_tensor, save_tensor
from pjx.tensor.core import Graph, Node
from pjx.utils import CheckpointMismatchError, ContractError, ShapeError

from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

_logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ANSWERER_LAYERS = ("q_embed", "q_lstm1", "q_lstm2", "iq", "att", "pred")
EXPLAINER_LAYERS = ("ans", "iqa", "point", "ctx", "dec")

#: Fixed architecture choices written into every checkpoint.
ARCHITECTURE_METADATA = {
    "answer_head_layers": 1,
    "explainer_iq_source": "post-normalization-pre-dropout",
    "lstm_gate_order": "ifgo",
}


def layer_of(name: str) -> str:
    """
    >>> layer_of("q_lstm1.W_x")
    'q_lstm1'
    """
    return name.split(".", 1)[0]


def xavier_uniform(shape: Tuple[int, ...], random_state) -> np.ndarray:
    r"""Uniform in :math:`\pm\sqrt{6 / (\mathrm{fan_{in}} + \mathrm{fan_{out}})}`."""
    fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return random_state.uniform(-limit, limit, size=shape)


class ModelParams(object):
    """Ordered collection of named float64 tensors with freeze flags.

    Parameters
    ----------
    tensors: mapping
        name -> array
    frozen: iterable of str
        names of tensors excluded from optimization
    metadata: dict
        free-form JSON-serializable information stored in checkpoints
    """

    def __init__(
        self,
        tensors: Optional[Mapping[str, np.ndarray]] = None,
        frozen: Iterable[str] = (),
        metadata: Optional[dict] = None,
    ):
        self._tensors: Dict[str, np.ndarray] = {}
        for name, value in (tensors or {}).items():
            self._tensors[name] = np.array(value, dtype=np.float64)
        self.frozen = set(frozen)
        unknown = self.frozen - set(self._tensors)
        if unknown:
            raise KeyError("cannot freeze unknown tensors: {}".format(sorted(unknown)))
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        value = np.array(value, dtype=np.float64)
        if name in self._tensors and self._tensors[name].shape != value.shape:
            raise ShapeError(
                "tensor {} has shape {}, cannot assign {}".format(name, self._tensors[name].shape, value.shape)
            )
        self._tensors[name] = value

    def items(self):
        return self._tensors.items()

    def names(self, layers: Optional[Iterable[str]] = None):
        if layers is None:
            return list(self._tensors)
        layers = set(layers)
        return [name for name in self._tensors if layer_of(name) in layers]

    def has_layer(self, layer: str) -> bool:
        return any(layer_of(name) == layer for name in self._tensors)

    @property
    def trainable(self):
        return [name for name in self._tensors if name not in self.frozen]

    def freeze(self, layers: Iterable[str]) -> "ModelParams":
        self.frozen.update(self.names(layers))
        return self

    def unfreeze(self, layers: Iterable[str]) -> "ModelParams":
        self.frozen.difference_update(self.names(layers))
        return self

    def copy(self) -> "ModelParams":
        tensors = {name: value.copy() for name, value in self._tensors.items()}
        return ModelParams(tensors, self.frozen, json.loads(json.dumps(self.metadata)))

    def merged(self, other: "ModelParams") -> "ModelParams":
        """New collection with the tensors of both; names must not overlap."""
        overlap = set(self) & set(other)
        if overlap:
            raise ContractError("cannot merge parameter sets sharing {}".format(sorted(overlap)))
        result = self.copy()
        for name, value in other.items():
            result[name] = value.copy()
        result.frozen.update(other.frozen)
        result.metadata.update(other.metadata)
        return result

    def subset(self, layers: Iterable[str]) -> "ModelParams":
        names = self.names(layers)
        return ModelParams(
            {name: self._tensors[name].copy() for name in names}, self.frozen & set(names), dict(self.metadata)
        )

    def bind(self, graph: Graph, constant: bool = False) -> Dict[str, Node]:
        """Add every tensor to ``graph``: trainable ones as leaves, frozen ones as constants.

        With ``constant=True`` no tensor receives gradients (evaluation).
        """
        return {
            name: graph.leaf(value, name=name, requires_grad=not constant and name not in self.frozen)
            for name, value in self._tensors.items()
        }

    def equal(self, other: "ModelParams") -> bool:
        """Bitwise equality of names and values."""
        if list(self) != list(other):
            return False
        return all(np.array_equal(self[name], other[name]) for name in self)

    def save(self, directory: str) -> None:
        """Write a checkpoint directory."""
        os.makedirs(directory, exist_ok=True)
        tensors = {}
        for name, value in self._tensors.items():
            filename = name + SUFFIX
            save_tensor(os.path.join(directory, filename), value)
            tensors[name] = {"file": filename, "shape": list(value.shape), "frozen": name in self.frozen}
        with open(os.path.join(directory, MANIFEST), "w") as f:
            manifest = {"tensors": tensors, "order": list(self._tensors), "metadata": self.metadata}
            json.dump(manifest, f, indent=2, sort_keys=True)
        _logger.info("wrote %d tensors to %s", len(tensors), directory)

    @classmethod
    def load(cls, directory: str) -> "ModelParams":
        manifest_path = os.path.join(directory, MANIFEST)
        with open(manifest_path) as f:
            manifest = json.load(f)
        tensors = {}
        frozen = []
        for name, entry in manifest["tensors"].items():
            value = load_tensor(os.path.join(directory, entry["file"]), expected_rank=len(entry["shape"]))
            if list(value.shape) != list(entry["shape"]):
                raise ShapeError(
                    "{}: tensor {} has shape {}, manifest says {}".format(directory, name, value.shape, entry["shape"])
                )
            tensors[name] = value
            if entry.get("frozen", False):
                frozen.append(name)
        ordered = {name: tensors[name] for name in manifest.get("order", sorted(tensors))}
        return cls(ordered, frozen, manifest.get("metadata", {}))

    def check_vocabularies(self, fingerprints: Mapping[str, str]) -> None:
        """Compare vocabulary fingerprints stored in the metadata with ``fingerprints``.

        Raises
        ------
        CheckpointMismatchError
            naming both hashes of the first differing vocabulary
        """
        stored = self.metadata.get("vocabularies", {})
        for kind, value in fingerprints.items():
            if kind in stored and stored[kind] != value:
                raise CheckpointMismatchError(
                    "{} vocabulary differs: checkpoint {} vs data {}".format(kind, stored[kind], value)
                )


def _lstm_shapes(prefix: str, input_size: int, hidden: int) -> Dict[str, Tuple[int, ...]]:
    return {
        prefix + ".W_x": (4 * hidden, input_size),
        prefix + ".W_h": (4 * hidden, hidden),
        prefix + ".b": (4 * hidden,),
    }


def answerer_shapes(
    config: ModelConfig, n_answers: int, question_vocab_size: Optional[int] = None
) -> Dict[str, Tuple[int, ...]]:
    """Tensor shapes of the answering model."""
    shapes: Dict[str, Tuple[int, ...]] = {}
    Q = config.question_size
    P = config.pooled_size
    if config.question is not None:
        if not question_vocab_size:
            raise ContractError("the question encoder needs a question vocabulary size")
        shapes["q_embed"] = (question_vocab_size, config.question.embed_size)
        shapes.update(_lstm_shapes("q_lstm1", config.question.embed_size, Q))
        shapes.update(_lstm_shapes("q_lstm2", Q, Q))
    for prefix in ("iq", "pred"):
        shapes[prefix + ".W_img"] = (P, config.channels)
        shapes[prefix + ".b_img"] = (P,)
        shapes[prefix + ".W_q"] = (P, Q)
        shapes[prefix + ".b_q"] = (P,)
        if prefix == "iq":
            shapes["att.W1"] = (config.attention_hidden, P)
            shapes["att.b1"] = (config.attention_hidden,)
            shapes["att.W2"] = (1, config.attention_hidden)
            shapes["att.b2"] = (1,)
    shapes["pred.W"] = (n_answers, P)
    shapes["pred.b"] = (n_answers,)
    return shapes


def explainer_shapes(config: ModelConfig, n_answers: int, explanation_vocab_size: int) -> Dict[str, Tuple[int, ...]]:
    """Tensor shapes of the explanation model."""
    d = config.answer_embed_size
    K = config.pointing_hidden
    E = config.decoder_embed_size
    D = config.decoder_hidden
    shapes = {
        "ans.W5": (d, n_answers),
        "ans.b5": (d,),
        "ans.W6": (d, d),
        "ans.b6": (d,),
        "iqa.W7": (d, config.pooled_size),
        "iqa.b7": (d,),
        "point.W8": (K, d),
        "point.b8": (K,),
        "point.W9": (1, K),
        "point.b9": (1,),
        "ctx.W10": (d, config.channels),
        "ctx.b10": (d,),
        "ctx.W11": (d, config.question_size),
        "ctx.b11": (d,),
        "dec.embed": (explanation_vocab_size, E),
    }
    shapes.update(_lstm_shapes("dec", d + E, D))
    shapes["dec.W_pred"] = (explanation_vocab_size, D)
    shapes["dec.b_pred"] = (explanation_vocab_size,)
    return shapes


def initialize(
    shapes: Mapping[str, Tuple[int, ...]], random_state=None, metadata: Optional[dict] = None
) -> ModelParams:
    """Xavier-uniform weights and zero biases; LSTM forget-gate biases start at 1.

    Tensors are drawn in the order of ``shapes`` from one
    :class:`numpy.random.RandomState`, so a fixed seed reproduces them
    bitwise.
    """
    random_state = check_random_state(random_state)
    tensors = {}
    for name, shape in shapes.items():
        if len(shape) == 1:
            value = np.zeros(shape)
            if name.endswith(".b") and layer_of(name) in ("q_lstm1", "q_lstm2", "dec"):
                hidden = shape[0] // 4
                value[hidden : 2 * hidden] = 1.0
        else:
            value = xavier_uniform(shape, random_state)
        tensors[name] = value
    result = ModelParams(tensors, metadata=dict(ARCHITECTURE_METADATA))
    result.metadata.update(metadata or {})
    return result


def init_answerer(config: ModelConfig, n_answers: int, question_vocab_size: Optional[int] = None, random_state=None):
    return initialize(
        answerer_shapes(config, n_answers, question_vocab_size),
        random_state,
        {"model": config.to_dict(), "mode": "act" if config.act else "vqa"},
    )


def init_explainer(config: ModelConfig, n_answers: int, explanation_vocab_size: int, random_state=None):
    return initialize(
        explainer_shapes(config, n_answers, explanation_vocab_size),
        random_state,
        {"model": config.to_dict(), "mode": "act" if config.act else "vqa"},
    )


__all__ = [
    "MANIFEST",
    "ANSWERER_LAYERS",
    "EXPLAINER_LAYERS",
    "ARCHITECTURE_METADATA",
    "layer_of",
    "xavier_uniform",
    "ModelParams",
    "answerer_shapes",
    "explainer_shapes",
    "initialize",
    "init_answerer",
    "init_explainer",
]
