r"""
Answering model.

The question is encoded by a 2-layer LSTM (or replaced by the all-ones vector
in ACT mode), fused with the spatial image features at every grid location by
an elementwise product followed by signed square root and L2 normalization,
and a latent attention map over the grid selects the image evidence for the
answer classifier:

.. math::

   \bar f^{IQ}_{n,m} = L2\left(\operatorname{sign}(z)\sqrt{|z|}\right),\quad
   z = (W_{img} f^I_{n,m} + b_{img}) \odot (W_q f^Q + b_q)

All functions operate on bound parameters, a mapping from tensor name to
:class:`~pjx.tensor.core.Node` as returned by
:meth:`pjx.params.ModelParams.bind`.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np
from scipy.special import softmax
from sklearn.utils import check_random_state

from dataclasses import dataclass

from pjx.params import ModelParams
from pjx.tensor import ops
from pjx.tensor.core import Graph, Node
from pjx.utils import ContractError, ShapeError

from typing import Dict, Optional, Sequence

_logger = logging.getLogger(__name__)

Bound = Dict[str, Node]


def encode_question(tokens: Sequence[int], p: Bound) -> Node:
    """Final top-layer hidden state of the 2-layer question LSTM.

    Raises
    ------
    ContractError
        for an empty token sequence
    VocabularyError
        for token ids outside of the question vocabulary
    """
    if len(tokens) == 0:
        raise ContractError("cannot encode an empty question")
    graph = p["q_embed"].graph
    hidden = p["q_lstm1.W_h"].shape[1]
    h1 = c1 = h2 = c2 = graph.constant(np.zeros(hidden))
    for token in tokens:
        x = ops.embedding(p["q_embed"], token)
        h1, c1 = ops.lstm_step(x, h1, c1, p["q_lstm1.W_x"], p["q_lstm1.W_h"], p["q_lstm1.b"])
        h2, c2 = ops.lstm_step(h1, h2, c2, p["q_lstm2.W_x"], p["q_lstm2.W_h"], p["q_lstm2.b"])
    return h2


def ones_question(size: int) -> np.ndarray:
    """Question representation of ACT mode: the all-ones vector.

    >>> ones_question(3)
    array([1., 1., 1.])
    """
    if size < 1:
        raise ContractError("question size must be positive, got {}".format(size))
    return np.ones(size)


def fuse(image: Node, q: Node, p: Bound, prefix: str) -> Node:
    """Project image and question to a common size, multiply, signed square root and L2.

    ``image`` is either a ``C`` vector or a ``C x N x M`` map; for maps the
    normalization runs over the channels of every location.
    """
    projected_image = ops.linear(image, p[prefix + ".W_img"], p[prefix + ".b_img"])
    projected_q = ops.linear(q, p[prefix + ".W_q"], p[prefix + ".b_q"])
    fused = ops.signed_sqrt(ops.elementwise_mul(projected_q, projected_image))
    return ops.l2_normalize(fused, axis=0 if image.value.ndim == 3 else None)


def fuse_iq(features: Node, q: Node, p: Bound) -> Node:
    r"""Pooled image-question map :math:`\bar f^{IQ}` before dropout."""
    if features.value.ndim != 3:
        raise ShapeError("spatial features must be C x N x M, got {}".format(features.shape))
    return fuse(features, q, p, "iq")


def pool_iq(
    features: Node, q: Node, p: Bound, train: bool = False, dropout: float = 0.0, random_state=None
) -> Node:
    """Pooled image-question map with dropout at training time."""
    fused = fuse_iq(features, q, p)
    return ops.dropout(fused, dropout, check_random_state(random_state), train)


def answer_attention(pooled: Node, p: Bound) -> Node:
    """1x1 convolution, ReLU, 1x1 convolution to one channel, softmax over the grid."""
    hidden = ops.relu(ops.conv1x1(pooled, p["att.W1"], p["att.b1"]))
    logits = ops.conv1x1(hidden, p["att.W2"], p["att.b2"])
    return ops.softmax_grid(ops.reshape(logits, logits.shape[1:]))


def attend(features: Node, alpha: Node) -> Node:
    """Attention-weighted feature vector, see :func:`pjx.tensor.ops.attend`."""
    return ops.attend(features, alpha)


def predict_answer(
    attended: Node, q: Node, p: Bound, train: bool = False, dropout: float = 0.0, random_state=None
) -> Node:
    """Answer logits: fusion of attended feature and question, then one linear layer."""
    fused = fuse(attended, q, p, "pred")
    fused = ops.dropout(fused, dropout, check_random_state(random_state), train)
    return ops.linear(fused, p["pred.W"], p["pred.b"])


@dataclass
class AnsweringOutput:
    """Intermediate results of one forward pass of the answering model."""

    question: Node
    fused: Node
    attention: Node
    logits: Node


def question_node(graph: Graph, p: Bound, question_ids: Optional[Sequence[int]]) -> Node:
    """Encoded question, or the all-ones vector if the model has no question encoder."""
    if "q_embed" in p:
        if question_ids is None:
            raise ContractError("the answering model needs question tokens")
        return encode_question(question_ids, p)
    return graph.constant(ones_question(p["iq.W_q"].shape[1]), name="ones_question")


def answer_forward(
    graph: Graph,
    p: Bound,
    features,
    question_ids: Optional[Sequence[int]] = None,
    train: bool = False,
    dropout: float = 0.0,
    random_state=None,
) -> AnsweringOutput:
    """Run the answering model on one instance.

    In ACT mode (no ``q_embed`` tensor) ``question_ids`` are ignored.
    """
    random_state = check_random_state(random_state)
    features = graph.lift(features)
    q = question_node(graph, p, question_ids)
    fused = fuse_iq(features, q, p)
    pooled = ops.dropout(fused, dropout, random_state, train)
    alpha = answer_attention(pooled, p)
    logits = predict_answer(attend(features, alpha), q, p, train, dropout, random_state)
    return AnsweringOutput(question=q, fused=fused, attention=alpha, logits=logits)


@dataclass
class AnswerPrediction:
    answer_id: int
    probabilities: np.ndarray
    attention: np.ndarray
    question: np.ndarray
    fused: np.ndarray


def predict(params: ModelParams, features: np.ndarray, question_ids: Optional[Sequence[int]] = None):
    """Evaluation-mode prediction of one instance.

    Returns
    -------
    :class:`AnswerPrediction`
        arg-max answer id (lowest id on ties), answer distribution, answer
        attention map, question representation and the pre-dropout pooled map
    """
    graph = Graph()
    out = answer_forward(graph, params.bind(graph, constant=True), features, question_ids)
    logits = out.logits.value
    return AnswerPrediction(
        answer_id=int(np.argmax(logits)),
        probabilities=softmax(logits),
        attention=np.array(out.attention.value),
        question=np.array(out.question.value),
        fused=np.array(out.fused.value),
    )


__all__ = [
    "encode_question",
    "ones_question",
    "fuse",
    "fuse_iq",
    "pool_iq",
    "answer_attention",
    "attend",
    "predict_answer",
    "AnsweringOutput",
    "question_node",
    "answer_forward",
    "AnswerPrediction",
    "predict",
]
