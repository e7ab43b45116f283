"""Training runs on the 50-instance synthetic corpus, end to end."""
import numpy as np
import pytest

from pjx import explainer, training
from pjx.config import TrainConfig
from pjx.data.annotations import aggregate_masks
from pjx.metrics import pointing
from pjx.params import ANSWERER_LAYERS

from tests.utils import bitwise_equal, small_model_config

MODEL = small_model_config(channels=16, grid=(14, 14))


@pytest.fixture(scope="module")
def train_split(encoded_dataset):
    return encoded_dataset.split("train")


@pytest.fixture(scope="module")
def answerer(train_split):
    config = TrainConfig(learning_rate=0.01, batch_size=4, epochs=200, dropout=0.0, seed=0)
    return training.train_answerer(train_split, config, MODEL)


@pytest.fixture(scope="module")
def explained(train_split, answerer):
    config = TrainConfig(learning_rate=0.01, batch_size=4, epochs=300, dropout=0.0, seed=0, freeze_answerer=True)
    return training.train_explainer(train_split, answerer.params, config, MODEL)


def test_answerer_fits_the_training_set(answerer, train_split):
    assert len(train_split) == 50
    assert training.evaluate_answerer(answerer.params, train_split) == 1.0
    losses = answerer.history["loss"].to_numpy()
    assert losses[-1] < 0.1 * losses[0]


def test_explainer_fits_the_training_set(explained, train_split):
    scores = training.evaluate_explainer(explained.params, train_split, "gt", max_len=20)
    assert scores["token_accuracy"] >= 0.99
    assert scores["exact_match"] >= 0.9


def test_frozen_answerer_is_unchanged(explained, answerer):
    for name in answerer.params.names(ANSWERER_LAYERS):
        assert bitwise_equal(explained.params[name], answerer.params[name]), name


def test_pointing_beats_the_baselines(explained, encoded_dataset, synthetic_corpus):
    dataset = encoded_dataset
    explanations = explainer.explain_dataset(explained.params, dataset, "gt", max_len=20)
    ids = [ex.id for ex in dataset.examples]
    truths = {i: aggregate_masks(synthetic_corpus.masks[i]) for i in ids}
    model = pointing.score_pointing({i: e.pointing for i, e in zip(ids, explanations)}, truths)
    uniform = pointing.score_pointing({i: pointing.baseline_uniform() for i in ids}, truths)
    random_state = np.random.RandomState(0)
    random_point = pointing.score_pointing(
        {i: pointing.baseline_random_point(seed=random_state) for i in ids}, truths
    )
    assert model.mean_emd < uniform.mean_emd
    assert model.mean_emd < random_point.mean_emd


def test_explanations_follow_the_answer(explained, encoded_dataset):
    params = explained.params
    n_answers = encoded_dataset.n_answers
    texts, maps, total = 0, 0, 0
    for example in encoded_dataset.answerable():
        other = (example.answer_id + 1) % n_answers
        own = explainer.explain_instance(params, example.features, example.question_ids, example.answer_id)
        swapped = explainer.explain_instance(params, example.features, example.question_ids, other)
        texts += own.justification != swapped.justification
        maps += not np.array_equal(own.pointing, swapped.pointing)
        total += 1
    assert texts >= 0.8 * total
    assert maps >= 0.95 * total


def test_explain_is_deterministic(explained, encoded_dataset):
    val = encoded_dataset.split("val")
    first = explainer.explain_dataset(explained.params, val, "pred", beam_width=3)
    second = explainer.explain_dataset(explained.params, val, "pred", beam_width=3)
    for a, b in zip(first, second):
        assert a.justification == b.justification
        assert bitwise_equal(a.pointing, b.pointing)
        assert a.log_probability == b.log_probability


def test_act_joint_training(small_act_dataset):
    config = TrainConfig(learning_rate=0.01, batch_size=4, epochs=3, dropout=0.0, seed=0)
    result = training.train_joint(small_act_dataset.split("train"), config, small_model_config(act=True))
    assert list(result.history["epoch"]) == [1, 2, 3]
    assert np.all(np.isfinite(result.history["loss"]))
    for name in result.params.names():
        assert np.all(np.isfinite(result.params[name])), name
    scores = training.evaluate_explainer(result.params, small_act_dataset, "pred", max_len=8)
    assert 0.0 <= scores["token_accuracy"] <= 1.0
