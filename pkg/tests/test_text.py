import os
import sys

import numpy as np
import pytest

from pjx.data.records import ExplanationRecord
from pjx.metrics import text
from pjx.utils import ContractError

from tests.utils import temp_dirname_created_and_removed


def _instance(candidate, *references):
    return text.make_corpus([("i", candidate, list(references))])[0]


def test_make_corpus_tokenizes():
    corpus = text.make_corpus([("a", "Because it is RED.", ["because it's red", "red shirt"])])
    assert corpus[0].candidate == ["because", "it", "is", "red"]
    assert corpus[0].references == [["because", "its", "red"], ["red", "shirt"]]


def test_validate_corpus():
    with pytest.raises(ContractError, match="empty corpus"):
        text.make_corpus([])
    with pytest.raises(ContractError, match="duplicate instance id 'a'"):
        text.make_corpus([("a", "x", ["x"]), ("a", "y", ["y"])])
    with pytest.raises(ContractError, match="no reference"):
        text.make_corpus([("a", "x", [])])


def test_ngrams():
    assert text.ngrams("a b c".split(), 1) == {("a",): 1, ("b",): 1, ("c",): 1}
    assert text.ngrams("a b a b".split(), 2) == {("a", "b"): 2, ("b", "a"): 1}
    assert text.ngrams("a b".split(), 3) == {}


def test_sentence_bleu4():
    instance = _instance("the cat sat on the mat", "the cat is on the mat")
    expected = (5 / 6.0 * 4 / 6.0 * 2 / 5.0 * 1 / 4.0) ** 0.25
    assert text.sentence_bleu4(instance) == pytest.approx(expected, rel=1e-12)
    assert text.sentence_bleu4(instance, smoothing=False) == 0.0
    assert text.sentence_bleu4(_instance("x y z w", "x y z w")) == pytest.approx(1.0)


def test_bleu4_brevity_penalty():
    instance = _instance("the cat", "the cat sat on the mat")
    assert text.sentence_bleu4(instance) == pytest.approx(np.exp(-2.0), rel=1e-12)
    # the closest reference length counts, not the longest
    closer = _instance("the cat", "the cat sat on the mat", "the cat sat")
    assert text.sentence_bleu4(closer) == pytest.approx(np.exp(1.0 - 3 / 2.0), rel=1e-12)


def test_bleu4_is_corpus_level():
    corpus = text.make_corpus(
        [("a", "the cat sat on the mat", ["the cat sat on the mat"]), ("b", "a dog", ["a dog ran away fast"])]
    )
    # pooled counts: 8 of 8 unigrams, 6 of 6 bigrams, candidate length 8 against 11
    expected = np.exp(np.log((5 / 5.0) * (4 / 4.0)) / 4 + 1 - 11 / 8.0)
    assert text.bleu4(corpus) == pytest.approx(expected, rel=1e-12)
    assert text.bleu4(corpus) != pytest.approx(np.mean([text.sentence_bleu4(i) for i in corpus]))


def test_lcs_length():
    assert text.lcs_length("a b c d".split(), "a c d".split()) == 3
    assert text.lcs_length("a b".split(), "c d".split()) == 0
    assert text.lcs_length([], "a".split()) == 0
    assert text.lcs_length("a b a b".split(), "b a b a".split()) == 3


def test_rouge_l():
    instance = _instance("a b c d", "a c d")
    expected = 2.44 * 0.75 / (1.0 + 1.44 * 0.75)
    assert text.sentence_rouge_l(instance) == pytest.approx(expected, rel=1e-12)
    # the best reference wins
    assert text.sentence_rouge_l(_instance("a b c d", "x y", "a b c d")) == pytest.approx(1.0)
    assert text.sentence_rouge_l(_instance("a b", "c d")) == 0.0

    corpus = text.make_corpus([("a", "a b c d", ["a c d"]), ("b", "x", ["x"])])
    assert text.rouge_l(corpus) == pytest.approx((expected + 1.0) / 2.0)


def test_cider_values_by_hand():
    corpus = text.make_corpus([("a", "x y", ["x z"]), ("b", "p q", ["p q"]), ("c", "m n", ["m n"])])
    # every n-gram occurs in one reference set, so all weights equal log(3);
    # "x y" against "x z": unigram cosine 1/2, bigram cosine 0, two orders
    np.testing.assert_allclose(text.cider_values(corpus), [2.5, 10.0, 10.0], rtol=1e-12)
    assert text.cider(corpus) == pytest.approx(7.5)


@pytest.mark.parametrize(
    "sentences",
    [
        ["a b c d", "e f g h i", "j k l m"],
        ["red cat", "blue dog"],
        ["red", "blue dog", "a green bird", "the small yellow fish"],
    ],
)
def test_identical_corpus_scores_perfectly(sentences):
    corpus = text.make_corpus([(str(i), s, [s]) for i, s in enumerate(sentences)])
    np.testing.assert_allclose(text.cider_values(corpus), 10.0, rtol=1e-12)
    assert text.cider(corpus) == pytest.approx(10.0, abs=1e-9)
    assert text.rouge_l(corpus) == pytest.approx(1.0)
    reports = text.score_text(corpus)
    assert reports["CIDEr"].mean == pytest.approx(10.0, abs=1e-9)
    assert reports["ROUGEL"].mean == pytest.approx(1.0)


def test_identical_long_corpus_has_perfect_bleu():
    sentences = ["a b c d", "e f g h i", "j k l m"]
    corpus = text.make_corpus([(str(i), s, [s]) for i, s in enumerate(sentences)])
    assert text.bleu4(corpus) == pytest.approx(1.0)
    assert text.bleu4(corpus, smoothing=False) == pytest.approx(1.0)


def test_metrics_ignore_instance_order():
    items = [
        ("a", "because the shirt is red", ["the shirt is red", "because it is red"]),
        ("b", "a dog runs on grass", ["the dog is running"]),
        ("c", "he holds a racket", ["he is holding a tennis racket", "there is a racket"]),
        ("d", "snow", ["there is snow everywhere"]),
    ]
    corpus = text.make_corpus(items)
    for seed in range(5):
        order = np.random.RandomState(seed).permutation(len(items))
        shuffled = text.make_corpus([items[k] for k in order])
        assert text.bleu4(shuffled) == text.bleu4(corpus)
        assert text.rouge_l(shuffled) == pytest.approx(text.rouge_l(corpus), rel=1e-12)
        values = dict(zip([i.id for i in corpus], text.cider_values(corpus)))
        shuffled_values = dict(zip([i.id for i in shuffled], text.cider_values(shuffled)))
        assert shuffled_values == pytest.approx(values, rel=1e-12)


def test_cider_counts_repeated_references_once():
    single = text.make_corpus([("a", "x y", ["x z"]), ("b", "p q", ["p q"])])
    repeated = text.make_corpus([("a", "x y", ["x z", "x z"]), ("b", "p q", ["p q"])])
    assert text.cider_values(repeated) == pytest.approx(text.cider_values(single))


def test_cider_length_penalty():
    corpus = text.make_corpus([("a", "a b c d", ["a b c d e f g h"]), ("b", "p q", ["p q"])])
    short = text.cider_values(corpus)[0]
    assert 0.0 < short < 10.0
    assert text.cider_values(corpus, sigma=1e3)[0] > short


def test_cider_needs_two_instances():
    with pytest.raises(ContractError, match="at least two"):
        text.cider_values(text.make_corpus([("a", "x", ["x"])]))


def test_save_and_load_corpus():
    corpus = text.make_corpus([("a", "x y", ["x z", "y"]), ("b", "p q", ["p q"])])
    with temp_dirname_created_and_removed() as dirname:
        path = os.path.join(dirname, "corpus.jsonl")
        text.save_corpus(corpus, path)
        assert text.load_corpus(path) == corpus
        with open(path, "a") as f:
            f.write('{"id": "c", "candidate": "z"}\n')
        with pytest.raises(ContractError, match="line 3: missing field 'references'"):
            text.load_corpus(path)


def test_corpus_from_explanations():
    records = [
        ExplanationRecord("r1", "img1", "val", "red", ["because it is red", "it is red"]),
        ExplanationRecord("r0", "img0", "val", "blue", ["because it is blue"]),
    ]
    corpus = text.corpus_from_explanations(records, {"r0": "because it is blue", "r1": ["it", "is", "red"]})
    assert [i.id for i in corpus] == ["r0", "r1"]
    assert corpus[1].candidate == ["it", "is", "red"]
    assert len(corpus[1].references) == 2

    with pytest.raises(ContractError, match=r"no output for \['r1'\], no record for \['r2'\]"):
        text.corpus_from_explanations(records, {"r0": "x", "r2": "y"})


def test_command_metric():
    corpus = text.make_corpus([("a", "x", ["x"])])
    metric = text.CommandMetric("METEOR", [sys.executable, "-c", "print('score: 0.25')"], timeout=60)
    assert metric.name == "METEOR"
    assert metric.score(corpus) == 0.25

    silent = text.CommandMetric("SPICE", [sys.executable, "-c", "print('nothing')"], timeout=60)
    with pytest.raises(RuntimeError, match="no number"):
        silent.score(corpus)


def test_command_metric_reads_the_corpus_file():
    script = "import json, sys; d = json.load(open(sys.argv[1])); print(len(d['references']['b']))"
    corpus = text.make_corpus([("a", "x", ["x"]), ("b", "y", ["y", "z", "w"])])
    assert text.CommandMetric("refs", [sys.executable, "-c", script], timeout=60).score(corpus) == 3.0


class _Constant(text.ExternalMetric):
    @property
    def name(self):
        return "METEOR"

    def score(self, corpus):
        return 0.5


def test_score_text():
    corpus = text.make_corpus(
        [("a", "because it is red", ["because it is red"]), ("b", "because it is blue", ["because it is green"])]
    )
    reports = text.score_text(corpus)
    assert set(reports) == {"BLEU4", "ROUGEL", "CIDEr", "METEOR", "SPICE"}
    assert reports["BLEU4"].mean == pytest.approx(text.bleu4(corpus))
    assert reports["BLEU4"].notes["mean"] == "corpus-level"
    assert [r["id"] for r in reports["ROUGEL"].per_instance] == ["a", "b"]
    assert reports["ROUGEL"].value_of("a") == pytest.approx(1.0)
    assert reports["CIDEr"].mean == pytest.approx(text.cider(corpus))
    assert reports["CIDEr"].notes["full_scale_reference"] == text.REFERENCE_RESULTS["CIDEr"]
    for name in text.UNAVAILABLE_METRICS:
        assert not reports[name].available
        assert reports[name].mean is None


def test_score_text_with_external_metric_and_subset():
    corpus = text.make_corpus([("a", "x y", ["x y"]), ("b", "p q", ["p"])])
    reports = text.score_text(corpus, metrics=["ROUGEL"], external=[_Constant()])
    assert set(reports) == {"ROUGEL", "METEOR", "SPICE"}
    assert reports["METEOR"].available
    assert reports["METEOR"].mean == 0.5
    assert reports["METEOR"].notes["source"] == "external"

    with pytest.raises(ContractError, match="unknown text metric"):
        text.score_text(corpus, metrics=["BLEU1"])
