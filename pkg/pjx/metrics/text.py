"""
Automatic scores of generated justifications against reference explanations.

BLEU-4
    corpus-level clipped n-gram precisions (n = 1..4), geometric mean, brevity
    penalty with the closest reference length (the shorter one on ties);
    add-one smoothing of the precisions for n >= 2 unless disabled
ROUGE-L
    per instance the best longest-common-subsequence F-measure over the
    references with ``beta = 1.2``, averaged over instances
CIDEr-D
    TF-IDF weighted n-gram cosine similarity with clipped candidate weights
    and a Gaussian length penalty (``sigma = 6``), averaged over orders and
    references and multiplied by 10; only the orders a reference is long
    enough to contain are averaged, so a perfect match scores 10 at any
    length; the IDF is computed over the reference sets of the corpus

All texts are tokenized by :func:`pjx.data.tokenize.tokenize`.
"""
from __future__ import absolute_import, division, print_function

import abc
import collections
import json
import logging
import os
import re
import subprocess
import tempfile

import numba as nb
import numpy as np
import six

from dataclasses import dataclass

from pjx.config import TEXT_METRICS
from pjx.data.tokenize import tokenize
from pjx.metrics.report import ScoreReport
from pjx.utils import ContractError

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

_logger = logging.getLogger(__name__)

UNAVAILABLE_METRICS = ("METEOR", "SPICE")
MAX_ORDER = 4
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0
CIDER_SCALE = 10.0

#: Full-scale results of the model conditioned on ground-truth answers, documentation only.
REFERENCE_RESULTS = {"BLEU4": 19.8, "METEOR": 18.6, "ROUGEL": 44.0, "CIDEr": 73.4, "SPICE": 15.4}


@dataclass
class CorpusInstance:
    """A tokenized candidate with one or more tokenized references."""

    id: str
    candidate: List[str]
    references: List[List[str]]


Corpus = List[CorpusInstance]


def make_corpus(items: Sequence[Tuple[str, str, Sequence[str]]]) -> Corpus:
    """Corpus from ``(id, candidate text, reference texts)`` triples.

    >>> make_corpus([("a", "The cat.", ["a cat"])])[0].candidate
    ['the', 'cat']
    """
    corpus = [CorpusInstance(i, tokenize(c), [tokenize(r) for r in refs]) for i, c, refs in items]
    validate_corpus(corpus)
    return corpus


def validate_corpus(corpus: Corpus) -> None:
    if len(corpus) == 0:
        raise ContractError("empty corpus")
    seen = set()
    for instance in corpus:
        if instance.id in seen:
            raise ContractError("duplicate instance id {!r}".format(instance.id))
        seen.add(instance.id)
        if len(instance.references) == 0:
            raise ContractError("instance {!r} has no reference".format(instance.id))


def load_corpus(path: str) -> Corpus:
    """Read JSON lines ``{"id": ..., "candidate": "...", "references": ["...", ...]}``."""
    items = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            values = json.loads(line)
            try:
                items.append((values["id"], values["candidate"], values["references"]))
            except KeyError as e:
                raise ContractError("{} line {}: missing field {}".format(path, line_number, e))
    return make_corpus(items)


def save_corpus(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for instance in corpus:
            values = {
                "id": instance.id,
                "candidate": " ".join(instance.candidate),
                "references": [" ".join(r) for r in instance.references],
            }
            f.write(json.dumps(values) + "\n")


def corpus_from_explanations(records, outputs: Mapping[str, object]) -> Corpus:
    """Pair generated justifications with the explanations of dataset records.

    Parameters
    ----------
    records: sequence of :class:`~pjx.data.records.ExplanationRecord`
    outputs: mapping
        record id -> generated justification, as text or word list

    Raises
    ------
    ContractError
        if ids are missing on either side, listing them
    """
    references = {r.id: r.explanations for r in records}
    missing_outputs = sorted(set(references) - set(outputs))
    missing_records = sorted(set(outputs) - set(references))
    if missing_outputs or missing_records:
        raise ContractError(
            "ids not aligned: no output for {}, no record for {}".format(missing_outputs, missing_records)
        )
    items = []
    for record_id in sorted(references):
        candidate = outputs[record_id]
        if not isinstance(candidate, str):
            candidate = " ".join(candidate)
        items.append((record_id, candidate, references[record_id]))
    return make_corpus(items)


def ngrams(tokens: Sequence[str], n: int) -> collections.Counter:
    """
    >>> sorted(ngrams(["a", "b", "a", "b"], 2).items())
    [(('a', 'b'), 2), (('b', 'a'), 1)]
    """
    return collections.Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_length(candidate_length: int, references: Sequence[Sequence[str]]) -> int:
    return min((abs(len(r) - candidate_length), len(r)) for r in references)[1]


def _bleu_counts(instance: CorpusInstance) -> np.ndarray:
    """Clipped matches and candidate n-gram totals per order, candidate and closest reference length."""
    counts = np.zeros(2 * MAX_ORDER + 2)
    for n in range(1, MAX_ORDER + 1):
        candidate = ngrams(instance.candidate, n)
        max_ref = collections.Counter()
        for reference in instance.references:
            for gram, count in ngrams(reference, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        counts[n - 1] = sum(min(count, max_ref[gram]) for gram, count in candidate.items())
        counts[MAX_ORDER + n - 1] = sum(candidate.values())
    counts[-2] = len(instance.candidate)
    counts[-1] = _closest_length(len(instance.candidate), instance.references)
    return counts


def _bleu_from_counts(counts: np.ndarray, smoothing: bool) -> float:
    matches = counts[:MAX_ORDER]
    totals = counts[MAX_ORDER : 2 * MAX_ORDER]
    candidate_length, reference_length = counts[-2], counts[-1]
    if candidate_length == 0 or totals[0] == 0 or matches[0] == 0:
        return 0.0
    log_precision = np.log(matches[0] / totals[0])
    for n in range(1, MAX_ORDER):
        if smoothing:
            log_precision += np.log((matches[n] + 1.0) / (totals[n] + 1.0))
        elif matches[n] == 0:
            return 0.0
        else:
            log_precision += np.log(matches[n] / totals[n])
    brevity = 0.0 if candidate_length > reference_length else 1.0 - reference_length / candidate_length
    return float(np.exp(log_precision / MAX_ORDER + brevity))


def bleu4(corpus: Corpus, smoothing: bool = True) -> float:
    """Corpus-level BLEU-4 in ``[0, 1]``.

    >>> bleu4(make_corpus([("a", "the cat sat on the mat", ["the cat sat on the mat"])]))
    1.0
    """
    validate_corpus(corpus)
    return _bleu_from_counts(np.sum([_bleu_counts(i) for i in corpus], axis=0), smoothing)


def sentence_bleu4(instance: CorpusInstance, smoothing: bool = True) -> float:
    return _bleu_from_counts(_bleu_counts(instance), smoothing)


@nb.njit()
def _lcs_length(a: nb.int64[:], b: nb.int64[:]) -> nb.int64:
    previous = np.zeros(b.shape[0] + 1, dtype=np.int64)
    current = np.zeros(b.shape[0] + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            if a[i] == b[j]:
                current[j + 1] = previous[j] + 1
            else:
                current[j + 1] = max(current[j], previous[j + 1])
        for j in range(b.shape[0] + 1):
            previous[j] = current[j]
    return previous[b.shape[0]]


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """
    >>> lcs_length("a b c d".split(), "a c d".split())
    3
    """
    ids: Dict[str, int] = {}
    a_ids = np.array([ids.setdefault(w, len(ids)) for w in a], dtype=np.int64)
    b_ids = np.array([ids.setdefault(w, len(ids)) for w in b], dtype=np.int64)
    return int(_lcs_length(a_ids, b_ids))


def sentence_rouge_l(instance: CorpusInstance, beta: float = ROUGE_BETA) -> float:
    """Best LCS F-measure of the candidate over its references."""
    best = 0.0
    for reference in instance.references:
        lcs = lcs_length(instance.candidate, reference)
        if lcs == 0:
            continue
        precision = lcs / len(instance.candidate)
        recall = lcs / len(reference)
        score = (1.0 + beta**2) * precision * recall / (recall + beta**2 * precision)
        best = max(best, score)
    return best


def rouge_l(corpus: Corpus, beta: float = ROUGE_BETA) -> float:
    """Mean ROUGE-L F-measure in ``[0, 1]``."""
    validate_corpus(corpus)
    return float(np.mean([sentence_rouge_l(i, beta) for i in corpus]))


def _document_frequency(corpus: Corpus) -> collections.Counter:
    frequency = collections.Counter()
    for instance in corpus:
        grams = set()
        for reference in instance.references:
            for n in range(1, MAX_ORDER + 1):
                grams.update(ngrams(reference, n))
        frequency.update(grams)
    return frequency


def _tfidf(tokens: Sequence[str], frequency: collections.Counter, log_n: float):
    vectors = []
    norms = np.zeros(MAX_ORDER)
    for n in range(1, MAX_ORDER + 1):
        vector = {
            gram: count * (log_n - np.log(max(1.0, frequency[gram]))) for gram, count in ngrams(tokens, n).items()
        }
        vectors.append(vector)
        norms[n - 1] = np.sqrt(sum(v * v for v in vector.values()))
    return vectors, norms


def sentence_cider(
    instance: CorpusInstance, frequency: collections.Counter, log_n: float, sigma: float = CIDER_SIGMA
) -> float:
    candidate, candidate_norms = _tfidf(instance.candidate, frequency, log_n)
    # repeated references count once
    references = [list(r) for r in dict.fromkeys(tuple(r) for r in instance.references)]
    total = 0.0
    for reference in references:
        ref_vectors, ref_norms = _tfidf(reference, frequency, log_n)
        delta = float(len(instance.candidate) - len(reference))
        penalty = np.exp(-(delta**2) / (2.0 * sigma**2))
        # orders longer than the reference have no n-grams to match
        orders = min(MAX_ORDER, len(reference))
        similarity = np.zeros(orders)
        for k in range(orders):
            if candidate_norms[k] == 0.0 or ref_norms[k] == 0.0:
                continue
            weights = ref_vectors[k]
            dot = sum(min(v, weights.get(gram, 0.0)) * weights.get(gram, 0.0) for gram, v in candidate[k].items())
            similarity[k] = dot / (candidate_norms[k] * ref_norms[k])
        if orders:
            total += penalty * np.mean(similarity)
    return float(CIDER_SCALE * total / len(references))


def cider_values(corpus: Corpus, sigma: float = CIDER_SIGMA) -> List[float]:
    """Per-instance CIDEr-D values.

    Raises
    ------
    ContractError
        for corpora with fewer than two instances
    """
    validate_corpus(corpus)
    if len(corpus) < 2:
        raise ContractError("CIDEr needs at least two instances to compute document frequencies")
    frequency = _document_frequency(corpus)
    log_n = np.log(float(len(corpus)))
    return [sentence_cider(instance, frequency, log_n, sigma) for instance in corpus]


def cider(corpus: Corpus, sigma: float = CIDER_SIGMA) -> float:
    return float(np.mean(cider_values(corpus, sigma)))


@six.add_metaclass(abc.ABCMeta)
class ExternalMetric(object):
    """Plug-in for metrics computed outside of this package, e.g. METEOR or SPICE."""

    @property
    @abc.abstractmethod
    def name(self) -> str:
        pass

    @abc.abstractmethod
    def score(self, corpus: Corpus) -> float:
        """Corpus-level value of the metric."""
        pass


_FLOAT = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


class CommandMetric(ExternalMetric):
    """Runs ``command + [corpus_file]`` and reads the last number printed to stdout.

    The corpus file is JSON ``{"candidates": {id: text}, "references": {id: [text, ...]}}``.
    """

    def __init__(self, name: str, command: Sequence[str], timeout: Optional[float] = None):
        self._name = name
        self.command = list(command)
        self.timeout = timeout

    @property
    def name(self) -> str:
        return self._name

    def score(self, corpus: Corpus) -> float:
        payload = {
            "candidates": {i.id: " ".join(i.candidate) for i in corpus},
            "references": {i.id: [" ".join(r) for r in i.references] for i in corpus},
        }
        handle, path = tempfile.mkstemp(suffix=".json")
        try:
            with os.fdopen(handle, "w") as f:
                json.dump(payload, f)
            result = subprocess.run(
                self.command + [path], capture_output=True, text=True, check=True, timeout=self.timeout
            )
        finally:
            os.remove(path)
        numbers = _FLOAT.findall(result.stdout)
        if not numbers:
            raise RuntimeError("{}: no number in output of {}".format(self.name, self.command))
        return float(numbers[-1])


def score_text(
    corpus: Corpus,
    metrics: Sequence[str] = TEXT_METRICS,
    smoothing: bool = True,
    external: Sequence[ExternalMetric] = (),
) -> Dict[str, ScoreReport]:
    """Reports of all requested metrics, keyed by metric name.

    The BLEU4 report's ``mean`` is the corpus-level BLEU-4; its per-instance
    values and standard error are sentence-level scores. METEOR and SPICE
    appear as unavailable placeholders unless an external metric of that name
    is given.
    """
    validate_corpus(corpus)
    unknown = sorted(set(metrics) - set(TEXT_METRICS))
    if unknown:
        raise ContractError("unknown text metric(s): {}".format(", ".join(unknown)))
    ids = [i.id for i in corpus]
    reports = {}
    if "BLEU4" in metrics:
        values = [sentence_bleu4(i, smoothing) for i in corpus]
        reports["BLEU4"] = ScoreReport.from_values("BLEU4", ids, values, mean=bleu4(corpus, smoothing))
        reports["BLEU4"].notes = {"mean": "corpus-level", "smoothing": smoothing}
    if "ROUGEL" in metrics:
        reports["ROUGEL"] = ScoreReport.from_values("ROUGEL", ids, [sentence_rouge_l(i) for i in corpus])
    if "CIDEr" in metrics:
        reports["CIDEr"] = ScoreReport.from_values("CIDEr", ids, cider_values(corpus))
    for metric in external:
        value = metric.score(corpus)
        reports[metric.name] = ScoreReport(metric.name, len(corpus), value, None, notes={"source": "external"})
    for name in UNAVAILABLE_METRICS:
        if name not in reports:
            reports[name] = ScoreReport.unavailable(name, "needs external resources, see CommandMetric")
    for name, report in reports.items():
        if name in REFERENCE_RESULTS:
            report.notes["full_scale_reference"] = REFERENCE_RESULTS[name]
    _logger.info(
        "scored %d instances: %s",
        len(corpus),
        ", ".join("{} {:.4f}".format(k, v.mean) for k, v in reports.items() if v.mean is not None),
    )
    return reports


__all__ = [
    "TEXT_METRICS",
    "UNAVAILABLE_METRICS",
    "REFERENCE_RESULTS",
    "CorpusInstance",
    "Corpus",
    "make_corpus",
    "validate_corpus",
    "load_corpus",
    "save_corpus",
    "corpus_from_explanations",
    "ngrams",
    "bleu4",
    "sentence_bleu4",
    "lcs_length",
    "sentence_rouge_l",
    "rouge_l",
    "sentence_cider",
    "cider_values",
    "cider",
    "ExternalMetric",
    "CommandMetric",
    "score_text",
]
