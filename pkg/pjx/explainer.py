r"""
Multimodal explanation model.

Given the pooled image-question map of the answering model and an answer, the
explanation model points at the image evidence with an answer-conditioned
attention map and generates a textual justification:

.. math::

   f^{yEmbed}(y) &= W_6 \tanh(W_5 y + b_5) + b_6 \\
   f^{IQA}_{n,m} &= L2\left(\operatorname{ssqrt}\left((W_7 \bar f^{IQ}_{n,m} + b_7)
                    \odot f^{yEmbed}(y)\right)\right) \\
   \alpha^{point} &= \operatorname{softmax}\left(W_9 \max(W_8 f^{IQA} + b_8, 0) + b_9\right) \\
   f^X &= (W_{10} \textstyle\sum_{n,m} \alpha^{point}_{n,m} f^I_{n,m} + b_{10})
          \odot (W_{11} f^Q + b_{11}) \odot f^{yEmbed}(y)

The decoder is a single LSTM whose input at every step is the concatenation
of :math:`f^X` and the embedding of the previous word.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np
from scipy.special import softmax
from sklearn.utils import check_random_state

from dataclasses import dataclass

from pjx import answering, decoding
from pjx.data.vocabulary import BOS_ID
from pjx.params import ModelParams
from pjx.tensor import ops
from pjx.tensor.core import Graph, Node
from pjx.utils import ContractError, ShapeError, VocabularyError

from typing import Dict, List, Optional, Sequence

_logger = logging.getLogger(__name__)

Bound = Dict[str, Node]


def embed_answer(y, p: Bound) -> Node:
    """Answer embedding of a one-hot answer or a predicted answer distribution."""
    y = p["ans.W5"].graph.lift(y)
    if y.shape != (p["ans.W5"].shape[1],):
        raise ShapeError("answer vector has shape {}, expected ({},)".format(y.shape, p["ans.W5"].shape[1]))
    hidden = ops.tanh(ops.linear(y, p["ans.W5"], p["ans.b5"]))
    return ops.linear(hidden, p["ans.W6"], p["ans.b6"])


def pool_iqa(
    fused_iq: Node, e: Node, p: Bound, train: bool = False, dropout: float = 0.0, random_state=None
) -> Node:
    """Answer-conditioned pooling: project, multiply with the answer embedding, ssqrt, per-location L2."""
    projected = ops.conv1x1(fused_iq, p["iqa.W7"], p["iqa.b7"])
    fused = ops.l2_normalize(ops.signed_sqrt(ops.elementwise_mul(e, projected)), axis=0)
    return ops.dropout(fused, dropout, check_random_state(random_state), train)


def pointing_attention(f_iqa: Node, p: Bound) -> Node:
    hidden = ops.relu(ops.conv1x1(f_iqa, p["point.W8"], p["point.b8"]))
    logits = ops.conv1x1(hidden, p["point.W9"], p["point.b9"])
    return ops.softmax_grid(ops.reshape(logits, logits.shape[1:]))


def explanation_context(features: Node, alpha: Node, q: Node, e: Node, p: Bound) -> Node:
    """Triple product of projected attended feature, projected question and answer embedding."""
    attended = ops.attend(features, alpha)
    visual = ops.linear(attended, p["ctx.W10"], p["ctx.b10"])
    question = ops.linear(q, p["ctx.W11"], p["ctx.b11"])
    return ops.elementwise_mul(ops.elementwise_mul(visual, question), e)


def decode_teacher_forced(fx: Node, tokens: Sequence[int], p: Bound) -> List[Node]:
    """Per-step logits given the ground-truth justification.

    ``tokens`` is the justification terminated by the end-of-sequence id; the
    begin-of-sequence id is fed before the first word.
    """
    if len(tokens) == 0:
        raise ContractError("cannot decode an empty justification")
    vocab_size = p["dec.W_pred"].shape[0]
    for token in tokens:
        if not 0 <= int(token) < vocab_size:
            raise VocabularyError("token id {} outside of explanation vocabulary of size {}".format(token, vocab_size))
    state = decoding.decoder_initial_state(p)
    previous = BOS_ID
    step_logits = []
    for token in tokens:
        logits, state = decoding.decoder_step(fx, previous, state, p)
        step_logits.append(logits)
        previous = int(token)
    return step_logits


def answer_vector(answer, n_answers: int) -> np.ndarray:
    """One-hot vector of an answer id; distributions are passed through."""
    if np.ndim(answer) == 0:
        answer = int(answer)
        if not 0 <= answer < n_answers:
            raise ContractError("answer id {} outside of [0, {})".format(answer, n_answers))
        one_hot = np.zeros(n_answers)
        one_hot[answer] = 1.0
        return one_hot
    return np.asarray(answer, dtype=np.float64)


@dataclass
class ExplainerOutput:
    """Intermediate results of one forward pass of the explanation model."""

    answer_embedding: Node
    f_iqa: Node
    pointing: Node
    context: Node


def explain_forward(
    graph: Graph,
    p: Bound,
    features,
    question: Node,
    fused_iq: Node,
    answer: Node,
    use_pointing: bool = True,
    train: bool = False,
    dropout: float = 0.0,
    random_state=None,
) -> ExplainerOutput:
    """Answer embedding, pointing map and explanation context of one instance.

    ``answer`` is a one-hot vector (ground-truth conditioning) or the
    predicted answer distribution. With ``use_pointing=False`` the context is
    built from the uniform map; the reported pointing map is uniform as well.
    """
    features = graph.lift(features)
    e = embed_answer(answer, p)
    f_iqa = pool_iqa(fused_iq, e, p, train, dropout, random_state)
    if use_pointing:
        alpha = pointing_attention(f_iqa, p)
    else:
        grid = features.shape[1:]
        alpha = graph.constant(np.full(grid, 1.0 / (grid[0] * grid[1])), name="uniform_pointing")
    fx = explanation_context(features, alpha, question, e, p)
    return ExplainerOutput(answer_embedding=e, f_iqa=f_iqa, pointing=alpha, context=fx)


@dataclass
class Explanation:
    """Answer, justification and pointing map of one instance.

    ``answer_id`` is the answer the explanation is conditioned on: the
    ground-truth answer under ``"gt"`` conditioning, the predicted one under
    ``"pred"``. The answering model's own prediction is always
    :attr:`predicted_answer_id`.
    """

    answer_id: int
    answer_distribution: np.ndarray
    justification: List[int]
    pointing: np.ndarray
    answer_attention: np.ndarray
    log_probability: float

    @property
    def predicted_answer_id(self) -> int:
        return int(np.argmax(self.answer_distribution))


def explain_instance(
    params: ModelParams,
    features: np.ndarray,
    question_ids: Optional[Sequence[int]] = None,
    answer: Optional[int] = None,
    conditioning: str = "gt",
    max_len: int = 20,
    beam_width: int = 1,
    use_pointing: bool = True,
) -> Explanation:
    """Predict the answer and explain it (evaluation mode).

    Parameters
    ----------
    params: :class:`~pjx.params.ModelParams`
        answering and explanation tensors
    answer: int or None
        ground-truth answer id, required for ``conditioning="gt"``
    conditioning: str
        ``"gt"`` conditions the explanation on the one-hot ground-truth
        answer, ``"pred"`` on the predicted answer distribution
    """
    graph = Graph()
    p = params.bind(graph, constant=True)
    features = graph.constant(features)
    out = answering.answer_forward(graph, p, features, question_ids)
    distribution = softmax(out.logits.value)
    n_answers = distribution.shape[0]
    if conditioning == "gt":
        if answer is None:
            raise ContractError("ground-truth conditioning needs the ground-truth answer")
        conditioning_vector = answer_vector(answer, n_answers)
        answer_id = int(answer)
    elif conditioning == "pred":
        conditioning_vector = ops.softmax(out.logits)
        answer_id = int(np.argmax(out.logits.value))
    else:
        raise ContractError("unknown conditioning {!r}".format(conditioning))
    expl = explain_forward(graph, p, features, out.question, out.fused, conditioning_vector, use_pointing)
    if beam_width == 1:
        tokens = decoding.decode_greedy(expl.context, p, max_len)
    else:
        tokens = decoding.decode_beam(expl.context, p, beam_width, max_len)
    return Explanation(
        answer_id=answer_id,
        answer_distribution=distribution,
        justification=tokens,
        pointing=np.array(expl.pointing.value),
        answer_attention=np.array(out.attention.value),
        log_probability=decoding.sequence_log_probability(expl.context, tokens, p),
    )


def explain_dataset(
    params: ModelParams,
    dataset,
    conditioning: str = "gt",
    max_len: int = 20,
    beam_width: int = 1,
    use_pointing: bool = True,
) -> List[Explanation]:
    """:func:`explain_instance` for every example of an :class:`~pjx.data.dataset.EncodedDataset`, in order."""
    explanations = []
    for example in dataset.examples:
        if conditioning == "gt" and example.answer_id is None:
            raise ContractError(
                "record {!r}: ground-truth conditioning needs an in-vocabulary answer".format(example.id)
            )
        explanations.append(
            explain_instance(
                params,
                example.features,
                example.question_ids,
                example.answer_id,
                conditioning,
                max_len,
                beam_width,
                use_pointing,
            )
        )
    _logger.info("explained %d records (%s conditioning)", len(explanations), conditioning)
    return explanations


__all__ = [
    "embed_answer",
    "pool_iqa",
    "pointing_attention",
    "explanation_context",
    "decode_teacher_forced",
    "answer_vector",
    "ExplainerOutput",
    "explain_forward",
    "Explanation",
    "explain_instance",
    "explain_dataset",
]
