import itertools

import numpy as np
import pytest

from pjx import answering, decoding, explainer
from pjx.data.dataset import EncodedDataset, EncodedExample
from pjx.data.vocabulary import BOS_ID, EOS_ID
from pjx.params import EXPLAINER_LAYERS, init_explainer
from pjx.tensor import ops
from pjx.tensor.core import Graph
from pjx.tensor.gradcheck import finite_diff_check_params
from pjx.training import explanation_loss
from pjx.utils import ContractError, ShapeError, VocabularyError

from tests.utils import (
    MICRO_ANSWERS,
    MICRO_EXPLANATION_VOCAB,
    bitwise_equal,
    micro_config,
    micro_params,
    random_features,
    smooth_seeds,
)

QUESTION = [3, 4, 5]
JUSTIFICATION = [3, 5, 4, EOS_ID]


def _forward(params, features, answer=0, conditioning="gt", use_pointing=True, graph=None):
    graph = graph or Graph()
    p = params.bind(graph)
    out = answering.answer_forward(graph, p, features, QUESTION)
    if conditioning == "gt":
        y = explainer.answer_vector(answer, MICRO_ANSWERS)
    else:
        y = ops.softmax(out.logits)
    return graph, p, out, explainer.explain_forward(graph, p, features, out.question, out.fused, y, use_pointing)


def test_answer_vector():
    np.testing.assert_equal(explainer.answer_vector(1, 3), [0.0, 1.0, 0.0])
    np.testing.assert_equal(explainer.answer_vector([0.2, 0.8], 2), [0.2, 0.8])
    with pytest.raises(ContractError):
        explainer.answer_vector(3, 3)


def test_embed_answer():
    _, params = micro_params()
    graph = Graph()
    p = params.bind(graph)
    y = np.array([0.0, 1.0, 0.0])
    e = explainer.embed_answer(y, p).value
    expected = params["ans.W6"] @ np.tanh(params["ans.W5"] @ y + params["ans.b5"]) + params["ans.b6"]
    np.testing.assert_allclose(e, expected, rtol=1e-12)
    with pytest.raises(ShapeError, match="answer vector"):
        explainer.embed_answer(np.ones(2), p)


@pytest.mark.parametrize("seed", range(5))
def test_pointing_map_and_pooling(seed):
    config, params = micro_params(seed, grid=(3, 2))
    _, _, _, expl = _forward(params, random_features(seed, config))
    assert expl.pointing.shape == (3, 2)
    assert expl.pointing.value.min() >= 0.0
    assert abs(expl.pointing.value.sum() - 1.0) <= 1e-9
    norms = np.linalg.norm(expl.f_iqa.value, axis=0)
    np.testing.assert_allclose(norms[norms > 0], 1.0, rtol=1e-12)
    assert expl.context.shape == (config.answer_embed_size,)


def test_explanation_context_is_a_triple_product():
    config, params = micro_params(grid=(2, 2))
    features = random_features(1, config)
    graph = Graph()
    p = params.bind(graph)
    alpha = np.zeros((2, 2))
    alpha[0, 1] = 1.0
    q = np.arange(4.0)
    e = np.array([1.0, -1.0, 0.5, 2.0])
    fx = explainer.explanation_context(
        graph.lift(features), graph.constant(alpha), graph.constant(q), graph.constant(e), p
    )
    visual = params["ctx.W10"] @ features[:, 0, 1] + params["ctx.b10"]
    question = params["ctx.W11"] @ q + params["ctx.b11"]
    np.testing.assert_allclose(fx.value, visual * question * e, rtol=1e-12)


def test_uniform_map_without_pointing():
    config, params = micro_params(grid=(2, 3), use_pointing=False)
    _, _, _, expl = _forward(params, random_features(2, config), use_pointing=False)
    assert expl.pointing.name == "uniform_pointing"
    np.testing.assert_allclose(expl.pointing.value, np.full((2, 3), 1 / 6.0))
    assert not expl.pointing.requires_grad


@pytest.mark.parametrize("seed", range(5))
def test_maps_follow_a_permutation_of_the_grid(seed):
    config, params = micro_params(seed, grid=(2, 3))
    features = random_features(seed, config)
    cells = config.grid_rows * config.grid_cols
    permutation = np.random.RandomState(seed).permutation(cells)
    shuffled = features.reshape(config.channels, cells)[:, permutation].reshape(features.shape)
    _, _, out, expl = _forward(params, features, answer=1)
    _, _, shuffled_out, shuffled_expl = _forward(params, shuffled, answer=1)
    np.testing.assert_allclose(
        shuffled_expl.pointing.value.ravel(), expl.pointing.value.ravel()[permutation], rtol=1e-12
    )
    np.testing.assert_allclose(
        shuffled_out.attention.value.ravel(), out.attention.value.ravel()[permutation], rtol=1e-12
    )
    # the attended context does not depend on where the evidence sits
    np.testing.assert_allclose(shuffled_expl.context.value, expl.context.value, rtol=1e-10, atol=1e-14)


def test_zero_answer_embedding_annihilates_the_explanation_input():
    config, params = micro_params(grid=(2, 2))
    features = random_features(5, config)
    graph = Graph()
    p = params.bind(graph)
    out = answering.answer_forward(graph, p, graph.constant(features), QUESTION)
    e = graph.constant(np.zeros(config.answer_embed_size))
    f_iqa = explainer.pool_iqa(out.fused, e, p)
    np.testing.assert_array_equal(f_iqa.value, 0.0)
    alpha = explainer.pointing_attention(f_iqa, p)
    fx = explainer.explanation_context(graph.constant(features), alpha, out.question, e, p)
    np.testing.assert_array_equal(fx.value, 0.0)


def test_decode_teacher_forced():
    config, params = micro_params()
    graph, p, _, expl = _forward(params, random_features(3, config))
    steps = explainer.decode_teacher_forced(expl.context, JUSTIFICATION, p)
    assert len(steps) == len(JUSTIFICATION)
    assert all(s.shape == (MICRO_EXPLANATION_VOCAB,) for s in steps)
    first, _ = decoding.decoder_step(expl.context, BOS_ID, decoding.decoder_initial_state(p), p)
    np.testing.assert_array_equal(steps[0].value, first.value)
    with pytest.raises(ContractError):
        explainer.decode_teacher_forced(expl.context, [], p)
    with pytest.raises(VocabularyError):
        explainer.decode_teacher_forced(expl.context, [3, MICRO_EXPLANATION_VOCAB, EOS_ID], p)


def test_explanation_loss():
    g = Graph()
    uniform = [g.leaf(np.zeros(5)) for _ in range(3)]
    np.testing.assert_allclose(explanation_loss(uniform, [3, 4, EOS_ID]).value, np.log(5.0))
    with pytest.raises(ContractError, match="decoder steps"):
        explanation_loss(uniform, [3, EOS_ID])
    with pytest.raises(ContractError):
        explanation_loss([], [])


def test_explanation_loss_is_the_mean_over_steps():
    rs = np.random.RandomState(4)
    g = Graph()
    steps = [g.leaf(rs.standard_normal(5)) for _ in range(4)]
    tokens = [2, 3, 4, EOS_ID]
    per_step = [float(ops.cross_entropy(s, t).value) for s, t in zip(steps, tokens)]
    np.testing.assert_allclose(explanation_loss(steps, tokens).value, np.mean(per_step), rtol=1e-12)


def _explainer_loss_builder(seed, act, conditioning):
    config, params = micro_params(seed, act=act, grid=(1, 2))
    features = random_features(seed, config)

    def build(graph, leaves):
        out = answering.answer_forward(graph, leaves, features, QUESTION)
        if conditioning == "gt":
            y = explainer.answer_vector(seed % MICRO_ANSWERS, MICRO_ANSWERS)
        else:
            y = ops.softmax(out.logits)
        expl = explainer.explain_forward(graph, leaves, features, out.question, out.fused, y)
        return explanation_loss(explainer.decode_teacher_forced(expl.context, JUSTIFICATION, leaves), JUSTIFICATION)

    return params, build


def _loss_graph(seed, act, conditioning):
    params, build = _explainer_loss_builder(seed, act, conditioning)
    graph = Graph()
    build(graph, params.bind(graph))
    return graph


@pytest.mark.parametrize("act, conditioning", [(False, "gt"), (False, "pred"), (True, "gt")])
def test_explanation_gradients_match_finite_differences(act, conditioning):
    for seed in smooth_seeds(lambda s: _loss_graph(s, act, conditioning)):
        params, build = _explainer_loss_builder(seed, act, conditioning)
        errors = finite_diff_check_params(build, dict(params.items()), denominator_floor=1e-4)
        worst = max(errors, key=errors.get)
        assert errors[worst] <= 1e-4, "seed {}: {} has relative error {}".format(seed, worst, errors[worst])


def test_gt_conditioning_cuts_the_gradient_to_the_answer_head():
    config, params = micro_params()
    graph, p, _, expl = _forward(params, random_features(5, config))
    graph.backward(explanation_loss(explainer.decode_teacher_forced(expl.context, JUSTIFICATION, p), JUSTIFICATION))
    assert graph.gradient(p["pred.W"]) is None
    assert graph.gradient(p["point.W8"]) is not None
    assert graph.gradient(p["iq.W_img"]) is not None

    graph, p, _, expl = _forward(params, random_features(5, config), conditioning="pred")
    graph.backward(explanation_loss(explainer.decode_teacher_forced(expl.context, JUSTIFICATION, p), JUSTIFICATION))
    assert graph.gradient(p["pred.W"]) is not None


def _decoder(seed, vocab_size=MICRO_EXPLANATION_VOCAB, sharpness=4.0):
    """Bound decoder tensors and a random context vector."""
    config = micro_config()
    params = init_explainer(config, MICRO_ANSWERS, vocab_size, seed)
    params["dec.W_pred"] = params["dec.W_pred"] * sharpness
    params["dec.embed"] = params["dec.embed"] * sharpness
    graph = Graph()
    p = params.bind(graph, constant=True)
    fx = graph.constant(np.random.RandomState(seed).standard_normal(config.answer_embed_size))
    return fx, p, params


def test_sequence_log_probability():
    fx, p, _ = _decoder(0)
    tokens = [3, 4, EOS_ID]
    state = decoding.decoder_initial_state(p)
    previous = BOS_ID
    expected = 0.0
    for token in tokens:
        logits, state = decoding.decoder_step(fx, previous, state, p)
        expected += float(ops.log_softmax(logits).value[token])
        previous = token
    total = decoding.sequence_log_probability(fx, tokens, p)
    assert total == pytest.approx(expected, rel=1e-12)
    assert decoding.sequence_log_probability(fx, tokens, p, normalized=True) == pytest.approx(expected / 3, rel=1e-12)
    with pytest.raises(ContractError, match="end-of-sequence"):
        decoding.sequence_log_probability(fx, [3, 4], p)


@pytest.mark.parametrize("seed", range(5))
def test_teacher_forced_logits_are_causal(seed):
    fx, p, _ = _decoder(seed)
    tokens = [3, 5, 4, 6, EOS_ID]
    reference = explainer.decode_teacher_forced(fx, tokens, p)
    for t in range(len(tokens)):
        changed = tokens[:t] + [(k + 1) % MICRO_EXPLANATION_VOCAB for k in tokens[t:]]
        steps = explainer.decode_teacher_forced(fx, changed, p)
        # logits of step s only see the tokens before s
        for s in range(t + 1):
            assert bitwise_equal(steps[s].value, reference[s].value), (t, s)
        if t + 1 < len(tokens):
            assert not np.array_equal(steps[t + 1].value, reference[t + 1].value)


@pytest.mark.parametrize("seed", range(10))
def test_greedy_decoding(seed):
    fx, p, _ = _decoder(seed)
    tokens = decoding.decode_greedy(fx, p, max_len=6)
    assert tokens[-1] == EOS_ID
    assert EOS_ID not in tokens[:-1]
    assert BOS_ID not in tokens
    assert 1 <= len(tokens) <= 7


def test_greedy_decoding_never_emits_bos():
    fx, p, params = _decoder(1)
    bias = np.zeros(MICRO_EXPLANATION_VOCAB)
    bias[BOS_ID] = 100.0
    bias[EOS_ID] = 50.0
    params["dec.b_pred"] = bias
    graph = Graph()
    p = params.bind(graph, constant=True)
    assert decoding.decode_greedy(graph.constant(fx.value), p) == [EOS_ID]


def test_greedy_decoding_stops_at_max_len():
    _, _, params = _decoder(2)
    bias = np.zeros(MICRO_EXPLANATION_VOCAB)
    bias[EOS_ID] = -100.0
    bias[4] = 100.0
    params["dec.b_pred"] = bias
    graph = Graph()
    p = params.bind(graph, constant=True)
    fx = graph.constant(np.ones(4))
    assert decoding.decode_greedy(fx, p, max_len=3) == [4, 4, 4, EOS_ID]
    # max_len counts words, the end-of-sequence id comes on top
    assert decoding.decode_beam(fx, p, beam_width=3, max_len=3) == [4, 4, 4, EOS_ID]
    with pytest.raises(ContractError):
        decoding.decode_greedy(fx, p, max_len=0)


def _brute_force_best(fx, p, words, max_len):
    best = None
    for length in range(max_len + 1):
        for prefix in itertools.product(words, repeat=length):
            tokens = list(prefix) + [EOS_ID]
            score = decoding.sequence_log_probability(fx, tokens, p, normalized=True)
            key = (-score, len(tokens), tokens)
            if best is None or key < best[0]:
                best = (key, tokens, score)
    return best[1], best[2]


@pytest.mark.parametrize("seed", range(8))
def test_wide_beam_finds_the_exhaustive_optimum(seed):
    # explanation vocabulary: BOS, EOS, UNK and two words
    fx, p, _ = _decoder(seed, vocab_size=5)
    words = [2, 3, 4]
    max_len = 3
    expected, expected_score = _brute_force_best(fx, p, words, max_len)
    tokens = decoding.decode_beam(fx, p, beam_width=27, max_len=max_len)
    assert tokens == expected
    assert decoding.sequence_log_probability(fx, tokens, p, normalized=True) == pytest.approx(expected_score)

    narrow = decoding.decode_beam(fx, p, beam_width=3, max_len=max_len)
    narrow_score = decoding.sequence_log_probability(fx, narrow, p, normalized=True)
    greedy_score = decoding.sequence_log_probability(fx, decoding.decode_greedy(fx, p, max_len), p, normalized=True)
    assert greedy_score <= narrow_score + 1e-12
    assert narrow_score <= expected_score + 1e-12


@pytest.mark.parametrize("seed", range(50))
def test_beam_width_one_is_greedy(seed):
    fx, p, _ = _decoder(seed)
    assert decoding.decode_beam(fx, p, beam_width=1, max_len=5) == decoding.decode_greedy(fx, p, max_len=5)


def test_beam_width_must_be_positive():
    fx, p, _ = _decoder(3)
    with pytest.raises(ContractError):
        decoding.decode_beam(fx, p, beam_width=0)


@pytest.mark.parametrize("seed", range(10))
def test_beam_of_three_matches_enumeration_on_a_stationary_decoder(seed):
    # explanation vocabulary: BOS, EOS and the three words 2, 3, 4; every step
    # sees the same word distribution
    _, _, params = _decoder(seed, vocab_size=5)
    params["dec.W_pred"] = np.zeros_like(params["dec.W_pred"])
    params["dec.b_pred"] = 2.0 * np.random.RandomState(seed).standard_normal(5)
    graph = Graph()
    p = params.bind(graph, constant=True)
    fx = graph.constant(np.random.RandomState(seed).standard_normal(4))
    expected, expected_score = _brute_force_best(fx, p, [2, 3, 4], max_len=3)
    tokens = decoding.decode_beam(fx, p, beam_width=3, max_len=3)
    assert tokens == expected
    assert decoding.sequence_log_probability(fx, tokens, p, normalized=True) == pytest.approx(expected_score)


@pytest.mark.parametrize("seed", range(5))
def test_beam_output_is_well_formed(seed):
    fx, p, _ = _decoder(seed)
    tokens = decoding.decode_beam(fx, p, beam_width=3, max_len=4)
    assert tokens[-1] == EOS_ID
    assert BOS_ID not in tokens
    assert EOS_ID not in tokens[:-1]
    assert len(tokens) <= 5


def test_explain_instance():
    config, params = micro_params(seed=6, grid=(2, 2))
    features = random_features(6, config)
    result = explainer.explain_instance(params, features, QUESTION, answer=2)
    assert result.answer_id == 2
    assert abs(result.answer_distribution.sum() - 1.0) <= 1e-12
    assert result.justification[-1] == EOS_ID
    assert result.pointing.shape == (2, 2)
    assert abs(result.pointing.sum() - 1.0) <= 1e-9
    assert abs(result.answer_attention.sum() - 1.0) <= 1e-9

    graph, p, _, expl = _forward(params, features, answer=2)
    assert result.log_probability == pytest.approx(
        decoding.sequence_log_probability(expl.context, result.justification, p)
    )
    np.testing.assert_array_equal(result.pointing, expl.pointing.value)

    predicted = explainer.explain_instance(params, features, QUESTION, conditioning="pred")
    assert predicted.answer_id == int(np.argmax(predicted.answer_distribution))
    assert predicted.predicted_answer_id == predicted.answer_id
    # under ground-truth conditioning the prediction is still reported
    assert result.predicted_answer_id == predicted.answer_id
    for answer in range(3):
        conditioned = explainer.explain_instance(params, features, QUESTION, answer=answer)
        assert conditioned.answer_id == answer
        assert conditioned.predicted_answer_id == predicted.answer_id


def test_explain_instance_errors():
    config, params = micro_params()
    features = random_features(0, config)
    with pytest.raises(ContractError, match="ground-truth answer"):
        explainer.explain_instance(params, features, QUESTION)
    with pytest.raises(ContractError, match="unknown conditioning"):
        explainer.explain_instance(params, features, QUESTION, answer=0, conditioning="oracle")


def test_explain_instance_without_pointing():
    config, params = micro_params(grid=(2, 2), use_pointing=False)
    result = explainer.explain_instance(params, random_features(1, config), QUESTION, answer=0, use_pointing=False)
    np.testing.assert_allclose(result.pointing, np.full((2, 2), 0.25))


def test_explain_instance_is_deterministic():
    config, params = micro_params(seed=2, grid=(2, 2))
    features = random_features(2, config)
    a = explainer.explain_instance(params, features, QUESTION, answer=1, beam_width=3, max_len=5)
    b = explainer.explain_instance(params, features, QUESTION, answer=1, beam_width=3, max_len=5)
    assert a.justification == b.justification
    np.testing.assert_array_equal(a.pointing, b.pointing)
    assert a.log_probability == b.log_probability


def test_beam_explanations_score_at_least_greedy():
    for seed in range(5):
        config, params = micro_params(seed=seed, grid=(2, 2))
        features = random_features(seed, config)
        greedy = explainer.explain_instance(params, features, QUESTION, answer=0, max_len=5)
        beam = explainer.explain_instance(params, features, QUESTION, answer=0, max_len=5, beam_width=3)
        assert beam.log_probability / len(beam.justification) >= (
            greedy.log_probability / len(greedy.justification) - 1e-12
        )


def test_explanation_depends_on_the_conditioning_answer():
    for seed in range(20):
        config, params = micro_params(seed=seed, grid=(2, 2))
        features = random_features(seed, config)
        first = explainer.explain_instance(params, features, QUESTION, answer=0)
        second = explainer.explain_instance(params, features, QUESTION, answer=1)
        assert not np.array_equal(first.pointing, second.pointing), seed

        scores = []
        for answer in (0, 1):
            _, p, _, expl = _forward(params, features, answer=answer)
            scores.append(decoding.sequence_log_probability(expl.context, JUSTIFICATION, p))
        assert scores[0] != scores[1], seed


def test_explain_dataset():
    config, params = micro_params(grid=(2, 2))
    examples = [
        EncodedExample("a", "img-a", "val", random_features(1, config), QUESTION, 0, [JUSTIFICATION]),
        EncodedExample("b", "img-b", "val", random_features(2, config), QUESTION, 2, [JUSTIFICATION]),
    ]
    dataset = EncodedDataset(examples, vocabularies=None)
    explanations = explainer.explain_dataset(params, dataset, max_len=4)
    assert [e.answer_id for e in explanations] == [0, 2]
    single = explainer.explain_instance(params, examples[1].features, QUESTION, answer=2, max_len=4)
    assert explanations[1].justification == single.justification

    examples.append(EncodedExample("c", "img-c", "val", random_features(3, config), QUESTION, None, []))
    with pytest.raises(ContractError, match="'c'"):
        explainer.explain_dataset(params, dataset)
    assert len(explainer.explain_dataset(params, dataset, conditioning="pred", max_len=4)) == 3


def test_explainer_layers_are_disjoint_from_the_answerer():
    _, params = micro_params()
    assert set(params.names(EXPLAINER_LAYERS)).isdisjoint(params.names(["q_embed", "iq", "att", "pred"]))
