"""
Losses, optimization and the training protocols.

The answering model is trained first on answer labels. The explanation model
is then trained on the justification words only, with the answering tensors
either frozen or finetuned. In joint mode (activity recognition) both are
trained from scratch on the sum of the answer and the explanation loss.

Every batch is one :class:`~pjx.tensor.core.Graph`; the batch loss is the
mean of the per-item losses and one Adam step is taken per batch.
"""
from __future__ import absolute_import, division, print_function

import dataclasses
import logging
import warnings

import numpy as np
import pandas as pd
from sklearn import base as sklearnb
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from dataclasses import dataclass, field

from pjx import answering, decoding, explainer
from pjx.config import ModelConfig, TrainConfig
from pjx.data.dataset import EncodedDataset, EncodedExample
from pjx.observers import BaseObserver, HistoryObserver
from pjx.params import ANSWERER_LAYERS, ModelParams, init_answerer, init_explainer
from pjx.tensor import ops
from pjx.tensor.core import Graph, Node
from pjx.utils import ConfigError, ContractError, ConvergenceError, ShapeError

from typing import Callable, Dict, List, Optional, Sequence, Tuple

_logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def answer_loss(logits: Node, answer_id: int) -> Node:
    """Cross entropy of the answer logits.

    >>> g = Graph()
    >>> round(float(answer_loss(g.leaf(np.zeros(4)), 2).value), 4)
    1.3863
    """
    return ops.cross_entropy(logits, answer_id)


def explanation_loss(step_logits: Sequence[Node], tokens: Sequence[int]) -> Node:
    """Mean per-word cross entropy, the end-of-sequence step included.

    Raises
    ------
    ContractError
        if the number of steps and tokens differ or both are empty
    """
    if len(step_logits) != len(tokens):
        raise ContractError("{} decoder steps for {} target tokens".format(len(step_logits), len(tokens)))
    if len(tokens) == 0:
        raise ContractError("explanation loss of an empty justification")
    losses = [ops.cross_entropy(logits, token) for logits, token in zip(step_logits, tokens)]
    return ops.scale(ops.add_n(losses), 1.0 / len(losses))


@dataclass
class AdamState:
    """First and second moment estimates per tensor name and the step count."""

    step: int = 0
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    params: ModelParams, grads: Dict[str, np.ndarray], state: AdamState, config: TrainConfig
) -> Tuple[ModelParams, AdamState]:
    r"""One Adam update of all trainable tensors with a gradient, in place.

    .. math::

        m_t = \beta_1 m_{t-1} + (1 - \beta_1) g, \quad
        v_t = \beta_2 v_{t-1} + (1 - \beta_2) g^2, \quad
        x_t = x_{t-1} - \eta \frac{m_t / (1 - \beta_1^t)}{\sqrt{v_t / (1 - \beta_2^t)} + \epsilon}

    Frozen tensors and tensors without gradient are left untouched.

    Raises
    ------
    ShapeError
        if a gradient does not have the shape of its tensor
    """
    state.step += 1
    lr = config.learning_rate
    correction1 = 1.0 - ADAM_BETA1**state.step
    correction2 = 1.0 - ADAM_BETA2**state.step
    for name, grad in grads.items():
        if name in params.frozen or grad is None:
            continue
        value = params[name]
        if grad.shape != value.shape:
            raise ShapeError("gradient of {} has shape {}, tensor has {}".format(name, grad.shape, value.shape))
        first = state.first.get(name, np.zeros_like(value))
        second = state.second.get(name, np.zeros_like(value))
        first = ADAM_BETA1 * first + (1.0 - ADAM_BETA1) * grad
        second = ADAM_BETA2 * second + (1.0 - ADAM_BETA2) * grad * grad
        state.first[name] = first
        state.second[name] = second
        params[name] = value - lr * (first / correction1) / (np.sqrt(second / correction2) + ADAM_EPSILON)
    return params, state


@dataclass
class TrainingResult:
    params: ModelParams
    history: pd.DataFrame


@dataclass
class _ItemResult:
    loss: Node
    correct: int
    count: int


ItemLoss = Callable[[Graph, Dict[str, Node], object, np.random.RandomState], _ItemResult]


def _fit(
    items: Sequence,
    params: ModelParams,
    item_loss: ItemLoss,
    config: TrainConfig,
    observers: Sequence[BaseObserver],
    random_state: np.random.RandomState,
) -> pd.DataFrame:
    history = HistoryObserver()
    observers = list(observers) + [history]
    state = AdamState()
    for epoch in range(1, config.epochs + 1):
        order = random_state.permutation(len(items))
        total_loss = 0.0
        correct = 0
        count = 0
        for start in range(0, len(order), config.batch_size):
            graph = Graph()
            p = params.bind(graph)
            results = [item_loss(graph, p, items[i], random_state) for i in order[start : start + config.batch_size]]
            batch_loss = ops.scale(ops.add_n([r.loss for r in results]), 1.0 / len(results))
            if not np.isfinite(batch_loss.value):
                raise ConvergenceError("non-finite training loss in epoch {}".format(epoch))
            graph.backward(batch_loss)
            grads = {name: graph.gradient(node) for name, node in p.items() if node.requires_grad}
            optimizer_step(params, grads, state, config)
            total_loss += sum(float(r.loss.value) for r in results)
            correct += sum(r.correct for r in results)
            count += sum(r.count for r in results)
        for observer in observers:
            observer.observe_epoch(epoch, "train", total_loss / len(items), correct / max(count, 1), params)

    frame = history.to_frame()
    if len(frame) > 1 and frame["loss"].iloc[-1] > frame["loss"].iloc[0]:
        first, last = frame["loss"].iloc[0], frame["loss"].iloc[-1]
        warnings.warn("training loss increased from {:.6g} to {:.6g}".format(first, last))
    return frame


def _answerable(dataset: EncodedDataset) -> List[EncodedExample]:
    if len(dataset) == 0:
        raise ContractError("cannot train on an empty dataset")
    examples = dataset.answerable()
    skipped = len(dataset) - len(examples)
    if skipped:
        _logger.warning("skipping %d records whose answer is outside of the answer vocabulary", skipped)
    if not examples:
        raise ContractError("no record has an answer inside of the answer vocabulary")
    return examples


def default_model_config(dataset: EncodedDataset) -> ModelConfig:
    """Desk-scale model sizes matching the feature shape and mode of ``dataset``."""
    channels, rows, cols = dataset.examples[0].features.shape
    question = None if dataset.question_vocab_size is None else ModelConfig().question
    return ModelConfig(channels=channels, grid_rows=rows, grid_cols=cols, question=question)


def _metadata(dataset: EncodedDataset, config: TrainConfig) -> dict:
    return {"vocabularies": dataset.vocabularies.fingerprints(), "train": config.to_dict()}


def _answerer_item_loss(config: TrainConfig) -> ItemLoss:
    def item_loss(graph, p, example, random_state):
        out = answering.answer_forward(
            graph, p, example.features, example.question_ids, True, config.dropout, random_state
        )
        correct = int(np.argmax(out.logits.value) == example.answer_id)
        return _ItemResult(answer_loss(out.logits, example.answer_id), correct, 1)

    return item_loss


def train_answerer(
    dataset: EncodedDataset,
    config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    observers: Sequence[BaseObserver] = (),
) -> TrainingResult:
    """Train the answering model on answer labels.

    The same seed reproduces the returned tensors bitwise.

    Raises
    ------
    ContractError
        for an empty dataset or one without any in-vocabulary answer
    ConvergenceError
        if a batch loss becomes non-finite
    """
    config = config or TrainConfig()
    examples = _answerable(dataset)
    model_config = model_config or default_model_config(dataset)
    random_state = check_random_state(config.seed)
    params = init_answerer(model_config, dataset.n_answers, dataset.question_vocab_size, random_state)
    params.metadata.update(_metadata(dataset, config))
    _logger.info("training answering model on %d records for %d epochs", len(examples), config.epochs)
    history = _fit(examples, params, _answerer_item_loss(config), config, observers, random_state)
    return TrainingResult(params, history)


@dataclass
class _AnswererCache:
    question: np.ndarray
    fused: np.ndarray
    probabilities: np.ndarray


def _cache_answerer(params: ModelParams, examples: Sequence[EncodedExample]) -> Dict[str, _AnswererCache]:
    cache = {}
    for example in examples:
        prediction = answering.predict(params, example.features, example.question_ids)
        cache[example.id] = _AnswererCache(prediction.question, prediction.fused, prediction.probabilities)
    return cache


def build_explainer_loss(
    graph: Graph,
    p: Dict[str, Node],
    example: EncodedExample,
    tokens: Sequence[int],
    config: TrainConfig,
    model_config: ModelConfig,
    random_state=None,
    cache: Optional[_AnswererCache] = None,
) -> Tuple[Node, List[Node]]:
    """Loss graph of one (example, justification) pair.

    With ``cache`` the answering model enters as constants (frozen answering
    model); otherwise it is part of the graph. In joint mode the answer loss is
    added to the explanation loss.

    Returns
    -------
    tuple
        the loss node and the per-step decoder logits
    """
    random_state = check_random_state(random_state)
    features = graph.constant(example.features, name="features")
    if cache is not None:
        question = graph.constant(cache.question, name="question")
        fused = graph.constant(cache.fused, name="fused_iq")
        predicted = graph.constant(cache.probabilities, name="answer_distribution")
        logits = None
    else:
        out = answering.answer_forward(
            graph, p, features, example.question_ids, True, config.dropout, random_state
        )
        question, fused, logits = out.question, out.fused, out.logits
        predicted = ops.softmax(logits)
    if config.conditioning == "gt":
        answer = explainer.answer_vector(example.answer_id, p["ans.W5"].shape[1])
    else:
        answer = predicted
    expl = explainer.explain_forward(
        graph, p, features, question, fused, answer, model_config.use_pointing, True, config.dropout, random_state
    )
    step_logits = explainer.decode_teacher_forced(expl.context, tokens, p)
    loss = explanation_loss(step_logits, tokens)
    if config.joint:
        if logits is None:
            raise ConfigError("joint training needs a trainable answering model")
        loss = ops.add(loss, answer_loss(logits, example.answer_id))
    return loss, step_logits


def _token_hits(step_logits: Sequence[Node], tokens: Sequence[int]) -> int:
    return sum(int(np.argmax(logits.value) == token) for logits, token in zip(step_logits, tokens))


def train_explainer(
    dataset: EncodedDataset,
    answer_params: ModelParams,
    config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    observers: Sequence[BaseObserver] = (),
) -> TrainingResult:
    """Train the explanation model on justification words.

    No pointing supervision enters the loss: the pointing map is learned
    only through the words it helps to predict. With
    ``config.freeze_answerer`` the answering tensors are constants and come
    back bitwise unchanged; otherwise they are finetuned by the explanation
    loss.

    Returns
    -------
    :class:`TrainingResult`
        the answering and explanation tensors in one collection

    Raises
    ------
    ConfigError
        joint training with a frozen answering model
    CheckpointMismatchError
        if the answering model was trained on other vocabularies
    """
    config = config or TrainConfig()
    if config.joint and config.freeze_answerer:
        raise ConfigError("joint training cannot freeze the answering model")
    examples = _answerable(dataset)
    model_config = model_config or default_model_config(dataset)
    answer_params = answer_params.copy()
    answer_params.check_vocabularies(dataset.vocabularies.fingerprints())
    if config.freeze_answerer:
        answer_params.freeze(ANSWERER_LAYERS)
    else:
        answer_params.unfreeze(ANSWERER_LAYERS)

    random_state = check_random_state(config.seed)
    explainer_params = init_explainer(
        model_config, dataset.n_answers, dataset.explanation_vocab_size, random_state
    )
    params = answer_params.merged(explainer_params)
    params.metadata.update(_metadata(dataset, config))

    cache = _cache_answerer(answer_params, examples) if config.freeze_answerer else {}
    items = [(example, tokens) for example in examples for tokens in example.justifications]

    def item_loss(graph, p, item, rs):
        example, tokens = item
        loss, step_logits = build_explainer_loss(
            graph, p, example, tokens, config, model_config, rs, cache.get(example.id)
        )
        return _ItemResult(loss, _token_hits(step_logits, tokens), len(tokens))

    _logger.info(
        "training explanation model on %d justifications for %d epochs (%s answering model, %s conditioning)",
        len(items),
        config.epochs,
        "frozen" if config.freeze_answerer else "trainable",
        config.conditioning,
    )
    history = _fit(items, params, item_loss, config, observers, random_state)
    return TrainingResult(params, history)


def train_joint(
    dataset: EncodedDataset,
    config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    observers: Sequence[BaseObserver] = (),
) -> TrainingResult:
    """Train answering and explanation model together on the summed loss."""
    config = dataclasses.replace(config or TrainConfig(), joint=True, freeze_answerer=False)
    model_config = model_config or default_model_config(dataset)
    random_state = check_random_state(config.seed)
    answer_params = init_answerer(model_config, dataset.n_answers, dataset.question_vocab_size, random_state)
    answer_params.metadata.update(_metadata(dataset, config))
    return train_explainer(dataset, answer_params, config, model_config, observers)


def evaluate_answerer(params: ModelParams, dataset: EncodedDataset) -> float:
    """Evaluation-mode answer accuracy over the records with an in-vocabulary answer."""
    examples = dataset.answerable()
    if not examples:
        raise ContractError("no record has an answer inside of the answer vocabulary")
    hits = [answering.predict(params, ex.features, ex.question_ids).answer_id == ex.answer_id for ex in examples]
    return float(np.mean(hits))


def evaluate_explainer(
    params: ModelParams,
    dataset: EncodedDataset,
    conditioning: str = "gt",
    max_len: int = 20,
    use_pointing: bool = True,
) -> Dict[str, float]:
    """Teacher-forced token accuracy and the rate of greedy decodings matching a reference exactly.

    Returns
    -------
    dict
        ``{"token_accuracy": ..., "exact_match": ...}``
    """
    examples = dataset.answerable()
    if not examples:
        raise ContractError("no record has an answer inside of the answer vocabulary")
    hits = 0
    count = 0
    matches = 0
    for example in examples:
        graph = Graph()
        p = params.bind(graph, constant=True)
        features = graph.constant(example.features)
        out = answering.answer_forward(graph, p, features, example.question_ids)
        if conditioning == "gt":
            answer = explainer.answer_vector(example.answer_id, out.logits.shape[0])
        else:
            answer = ops.softmax(out.logits)
        expl = explainer.explain_forward(graph, p, features, out.question, out.fused, answer, use_pointing)
        for tokens in example.justifications:
            hits += _token_hits(explainer.decode_teacher_forced(expl.context, tokens, p), tokens)
            count += len(tokens)
        decoded = decoding.decode_greedy(expl.context, p, max_len)
        matches += any(list(decoded) == list(tokens) for tokens in example.justifications)
    return {"token_accuracy": hits / count, "exact_match": matches / len(examples)}


class AnswererEstimator(sklearnb.BaseEstimator):
    """Scikit-learn style wrapper of :func:`train_answerer`.

    ``fit`` takes an :class:`~pjx.data.dataset.EncodedDataset`; ``predict``
    returns the answer ids of a dataset, ``score`` the answer accuracy.
    """

    def __init__(
        self,
        model_config: Optional[ModelConfig] = None,
        learning_rate: float = 1e-3,
        batch_size: int = 16,
        epochs: int = 50,
        seed: int = 0,
        dropout: float = 0.3,
        observers: Sequence[BaseObserver] = (),
    ):
        self.model_config = model_config
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.dropout = dropout
        self.observers = observers

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            dropout=self.dropout,
        )

    def fit(self, dataset: EncodedDataset, y=None) -> "AnswererEstimator":
        result = train_answerer(dataset, self._train_config(), self.model_config, self.observers)
        self.params_ = result.params
        self.history_ = result.history
        return self

    def predict(self, dataset: EncodedDataset) -> np.ndarray:
        check_is_fitted(self, "params_")
        return np.array(
            [answering.predict(self.params_, ex.features, ex.question_ids).answer_id for ex in dataset.examples]
        )

    def score(self, dataset: EncodedDataset, y=None) -> float:
        check_is_fitted(self, "params_")
        return evaluate_answerer(self.params_, dataset)


class ExplainerEstimator(sklearnb.BaseEstimator):
    """Scikit-learn style wrapper of :func:`train_explainer` and :func:`train_joint`.

    Without ``answer_params`` only joint training is possible.
    """

    def __init__(
        self,
        answer_params: Optional[ModelParams] = None,
        model_config: Optional[ModelConfig] = None,
        learning_rate: float = 1e-3,
        batch_size: int = 16,
        epochs: int = 50,
        seed: int = 0,
        dropout: float = 0.3,
        freeze_answerer: bool = True,
        conditioning: str = "gt",
        joint: bool = False,
        max_len: int = 20,
        beam_width: int = 1,
        observers: Sequence[BaseObserver] = (),
    ):
        self.answer_params = answer_params
        self.model_config = model_config
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.dropout = dropout
        self.freeze_answerer = freeze_answerer
        self.conditioning = conditioning
        self.joint = joint
        self.max_len = max_len
        self.beam_width = beam_width
        self.observers = observers

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            dropout=self.dropout,
            freeze_answerer=self.freeze_answerer and not self.joint,
            conditioning=self.conditioning,
            joint=self.joint,
            max_len=self.max_len,
            beam_width=self.beam_width,
        )

    def fit(self, dataset: EncodedDataset, y=None) -> "ExplainerEstimator":
        config = self._train_config()
        if self.joint:
            result = train_joint(dataset, config, self.model_config, self.observers)
        elif self.answer_params is None:
            raise ConfigError("training the explanation model alone needs the answering model parameters")
        else:
            result = train_explainer(dataset, self.answer_params, config, self.model_config, self.observers)
        self.params_ = result.params
        self.history_ = result.history
        return self

    def _use_pointing(self) -> bool:
        return self.model_config.use_pointing if self.model_config is not None else True

    def predict(self, dataset: EncodedDataset) -> List[explainer.Explanation]:
        check_is_fitted(self, "params_")
        return explainer.explain_dataset(
            self.params_, dataset, self.conditioning, self.max_len, self.beam_width, self._use_pointing()
        )

    def score(self, dataset: EncodedDataset, y=None) -> float:
        """Teacher-forced token accuracy."""
        check_is_fitted(self, "params_")
        scores = evaluate_explainer(self.params_, dataset, self.conditioning, self.max_len, self._use_pointing())
        return scores["token_accuracy"]


__all__ = [
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPSILON",
    "answer_loss",
    "explanation_loss",
    "AdamState",
    "optimizer_step",
    "TrainingResult",
    "default_model_config",
    "train_answerer",
    "build_explainer_loss",
    "train_explainer",
    "train_joint",
    "evaluate_answerer",
    "evaluate_explainer",
    "AnswererEstimator",
    "ExplainerEstimator",
]
