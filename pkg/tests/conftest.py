import matplotlib

matplotlib.use("Agg")

import pytest  # noqa: E402

from pjx.data.dataset import EncodedDataset, encode_dataset  # noqa: E402
from pjx.data.synthetic import SyntheticConfig, SyntheticCorpus, synth_dataset  # noqa: E402
from pjx.data.vocabulary import build_vocab  # noqa: E402
from tests.utils import small_synthetic_config  # noqa: E402


def _encode(corpus: SyntheticCorpus) -> EncodedDataset:
    return encode_dataset(corpus.records, build_vocab(corpus.records), corpus.features)


@pytest.fixture(scope="session")
def synthetic_corpus() -> SyntheticCorpus:
    """The desk-scale corpus: 50 training and 6 validation instances, C=16, 14 x 14, 4 answers."""
    return synth_dataset(SyntheticConfig(n_instances=50, n_val=6), seed=0)


@pytest.fixture(scope="session")
def encoded_dataset(synthetic_corpus) -> EncodedDataset:
    return _encode(synthetic_corpus)


@pytest.fixture(scope="session")
def small_corpus() -> SyntheticCorpus:
    return synth_dataset(small_synthetic_config(), seed=1)


@pytest.fixture(scope="session")
def small_dataset(small_corpus) -> EncodedDataset:
    return _encode(small_corpus)


@pytest.fixture(scope="session")
def small_act_dataset() -> EncodedDataset:
    return _encode(synth_dataset(small_synthetic_config(mode="act"), seed=2))
