import contextlib
import shutil
import tempfile

import numpy as np

from pjx.config import ModelConfig, QuestionConfig
from pjx.data.synthetic import SyntheticConfig
from pjx.params import init_answerer, init_explainer
from pjx.tensor.gradcheck import smoothness_margin

MICRO_ANSWERS = 3
MICRO_QUESTION_VOCAB = 6
MICRO_EXPLANATION_VOCAB = 7


@contextlib.contextmanager
def temp_dirname_created_and_removed(suffix="", prefix="tmp", base_dir=None):
    """Context manager returning the name of new temporary directory.

    At the end of the scope, the directory is automatically removed.
    All parameters are passed to :func:`tempfile.mkdtemp`.
    """
    dirname = None
    try:
        dirname = tempfile.mkdtemp(suffix=suffix, prefix=prefix, dir=base_dir)
        yield dirname
    finally:
        if dirname is not None:
            shutil.rmtree(dirname)


def micro_config(act=False, grid=(1, 2), channels=3, use_pointing=True) -> ModelConfig:
    """A model small enough for finite differences over every tensor."""
    return ModelConfig(
        channels=channels,
        grid_rows=grid[0],
        grid_cols=grid[1],
        pooled_size=4,
        attention_hidden=3,
        answer_embed_size=4,
        pointing_hidden=3,
        decoder_embed_size=3,
        decoder_hidden=4,
        use_pointing=use_pointing,
        question=None if act else QuestionConfig(embed_size=3, hidden_size=4),
    )


def micro_params(seed=0, act=False, grid=(1, 2), channels=3, use_pointing=True):
    config = micro_config(act, grid, channels, use_pointing)
    answer_params = init_answerer(config, MICRO_ANSWERS, None if act else MICRO_QUESTION_VOCAB, seed)
    explainer_params = init_explainer(config, MICRO_ANSWERS, MICRO_EXPLANATION_VOCAB, seed + 1000)
    return config, answer_params.merged(explainer_params)


def random_features(seed, config) -> np.ndarray:
    return np.random.RandomState(seed).standard_normal((config.channels, config.grid_rows, config.grid_cols))


def random_distribution(random_state, shape, sparsity=0.0) -> np.ndarray:
    """Random unit-mass grid; ``sparsity`` is the probability of a zero cell (at least one cell is kept)."""
    grid = random_state.uniform(size=shape)
    if sparsity > 0:
        grid[random_state.uniform(size=shape) < sparsity] = 0.0
        if grid.sum() == 0:
            grid.flat[random_state.randint(grid.size)] = 1.0
    return grid / grid.sum()


def small_model_config(act=False, channels=9, grid=(4, 4), use_pointing=True) -> ModelConfig:
    """Model sizes matching :func:`small_synthetic_config`."""
    return ModelConfig(
        channels=channels,
        grid_rows=grid[0],
        grid_cols=grid[1],
        pooled_size=6,
        attention_hidden=4,
        answer_embed_size=6,
        pointing_hidden=4,
        decoder_embed_size=4,
        decoder_hidden=6,
        use_pointing=use_pointing,
        question=None if act else QuestionConfig(embed_size=4, hidden_size=6),
    )


def bitwise_equal(a: np.ndarray, b: np.ndarray) -> bool:
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def small_synthetic_config(mode="vqa") -> SyntheticConfig:
    """Ten instances on a 4 x 4 grid with 9 channels and 3 answers."""
    return SyntheticConfig(
        n_instances=8,
        n_val=2,
        channels=9,
        grid_rows=4,
        grid_cols=4,
        n_answers=3,
        n_attributes=3,
        region_size=2,
        n_annotators=2,
        mode=mode,
    )


def smooth_seeds(build_graph, n_seeds=5, max_tries=50, margin=1e-3):
    """First ``n_seeds`` seeds whose graph keeps every relu and signed-sqrt input at least ``margin`` from zero.

    ``build_graph(seed)`` must return the :class:`~pjx.tensor.core.Graph` of the loss.
    """
    seeds = []
    for seed in range(max_tries):
        if smoothness_margin(build_graph(seed)) >= margin:
            seeds.append(seed)
            if len(seeds) == n_seeds:
                return seeds
    raise AssertionError("only {} of {} seeds are smooth enough".format(len(seeds), max_tries))
