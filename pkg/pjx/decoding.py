"""
Justification decoding: greedy and beam search over the explanation decoder.

A hypothesis is scored by the sum of the full-softmax log-probabilities of its
words including the final end-of-sequence id; beams are ranked by that sum
divided by the number of tokens. The begin-of-sequence id is never emitted.
``max_len`` counts words; a hypothesis reaching it is closed with the
end-of-sequence id, which is scored at the following decoder step.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np
from scipy.special import logsumexp

from pjx.data.vocabulary import BOS_ID, EOS_ID
from pjx.tensor import ops
from pjx.tensor.core import Node
from pjx.utils import ContractError

from typing import Dict, List, Sequence, Tuple

_logger = logging.getLogger(__name__)

Bound = Dict[str, Node]
State = Tuple[Node, Node]


def decoder_initial_state(p: Bound) -> State:
    graph = p["dec.W_h"].graph
    zeros = np.zeros(p["dec.W_h"].shape[1])
    return graph.constant(zeros), graph.constant(zeros)


def decoder_step(fx: Node, previous: int, state: State, p: Bound) -> Tuple[Node, State]:
    """One decoder step: returns the word logits and the new ``(h, c)`` state."""
    x = ops.concat([fx, ops.embedding(p["dec.embed"], previous)])
    h, c = ops.lstm_step(x, state[0], state[1], p["dec.W_x"], p["dec.W_h"], p["dec.b"])
    return ops.linear(h, p["dec.W_pred"], p["dec.b_pred"]), (h, c)


def _log_probabilities(logits: Node) -> np.ndarray:
    v = logits.value
    return v - logsumexp(v)


def _best_word(log_probs: np.ndarray) -> int:
    masked = np.array(log_probs)
    masked[BOS_ID] = -np.inf
    return int(np.argmax(masked))


def sequence_log_probability(fx: Node, tokens: Sequence[int], p: Bound, normalized: bool = False) -> float:
    """Log-probability of a justification terminated by the end-of-sequence id.

    With ``normalized=True`` the sum is divided by the number of tokens.
    """
    if len(tokens) == 0 or tokens[-1] != EOS_ID:
        raise ContractError("justification must end with the end-of-sequence id")
    state = decoder_initial_state(p)
    previous = BOS_ID
    total = 0.0
    for token in tokens:
        logits, state = decoder_step(fx, previous, state, p)
        total += float(_log_probabilities(logits)[token])
        previous = int(token)
    return total / len(tokens) if normalized else total


def decode_greedy(fx: Node, p: Bound, max_len: int = 20) -> List[int]:
    """Feed back the most likely word (lowest id on ties) until end-of-sequence or ``max_len`` words.

    Returns
    -------
    list of int
        at most ``max_len`` word ids followed by the end-of-sequence id, so
        up to ``max_len + 1`` ids in total
    """
    if max_len < 1:
        raise ContractError("max_len must be positive, got {}".format(max_len))
    state = decoder_initial_state(p)
    previous = BOS_ID
    tokens = []
    for _ in range(max_len):
        logits, state = decoder_step(fx, previous, state, p)
        word = _best_word(_log_probabilities(logits))
        tokens.append(word)
        if word == EOS_ID:
            return tokens
        previous = word
    tokens.append(EOS_ID)
    return tokens


class _Hypothesis(object):
    __slots__ = ("tokens", "score", "state")

    def __init__(self, tokens, score, state):
        self.tokens = tokens
        self.score = score
        self.state = state

    @property
    def normalized(self) -> float:
        return self.score / len(self.tokens)


def _rank_key(hypothesis: _Hypothesis, step_log_prob: float):
    return (-hypothesis.normalized, -step_log_prob, hypothesis.tokens[-1])


def decode_beam(fx: Node, p: Bound, beam_width: int = 3, max_len: int = 20) -> List[int]:
    """Length-normalized beam search.

    Every step expands the ``beam_width`` best open hypotheses; a hypothesis
    ending with the end-of-sequence id is moved to the finished pool. The
    search runs until no hypothesis is open. The best finished hypothesis is
    compared with the greedy one and the better is returned, so the result
    never scores below greedy decoding. ``beam_width=1`` is greedy decoding.

    Like :func:`decode_greedy` the result holds at most ``max_len`` words
    followed by the end-of-sequence id.
    """
    if beam_width < 1:
        raise ContractError("beam_width must be positive, got {}".format(beam_width))
    greedy = decode_greedy(fx, p, max_len)
    if beam_width == 1:
        return greedy

    open_hypotheses = [_Hypothesis([], 0.0, decoder_initial_state(p))]
    finished: List[_Hypothesis] = []
    for step in range(max_len + 1):
        candidates = []
        for hypothesis in open_hypotheses:
            previous = hypothesis.tokens[-1] if hypothesis.tokens else BOS_ID
            logits, state = decoder_step(fx, previous, hypothesis.state, p)
            log_probs = _log_probabilities(logits)
            words = [EOS_ID] if step == max_len else [w for w in range(len(log_probs)) if w != BOS_ID]
            for word in words:
                candidate = _Hypothesis(hypothesis.tokens + [word], hypothesis.score + float(log_probs[word]), state)
                if word == EOS_ID:
                    finished.append(candidate)
                else:
                    candidates.append((_rank_key(candidate, float(log_probs[word])), len(candidates), candidate))
        if not candidates:
            break
        candidates.sort(key=lambda item: item[:2])
        open_hypotheses = [candidate for _, _, candidate in candidates[:beam_width]]

    best = min(finished, key=lambda h: (-h.normalized, len(h.tokens), h.tokens))
    greedy_score = sequence_log_probability(fx, greedy, p, normalized=True)
    if greedy_score > best.normalized:
        _logger.debug("beam search fell back to the greedy hypothesis")
        return greedy
    return best.tokens


__all__ = [
    "decoder_initial_state",
    "decoder_step",
    "sequence_log_probability",
    "decode_greedy",
    "decode_beam",
]
