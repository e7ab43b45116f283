import io
import os

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import pytest

from pjx import plots
from pjx.observers import HISTORY_COLUMNS
from pjx.utils import ShapeError

from tests.utils import temp_dirname_created_and_removed


def _history():
    return pd.DataFrame(
        {"epoch": [1, 2, 3], "split": "train", "loss": [1.2, 0.8, 0.5], "accuracy": [0.3, 0.6, 0.9]},
        columns=HISTORY_COLUMNS,
    )


def test_append_extension():
    assert plots.append_extension("history", ".pdf") == "history.pdf"
    assert plots.append_extension("history.pdf", ".pdf") == "history.pdf"
    buffer = io.BytesIO()
    assert plots.append_extension(buffer, ".pdf") is buffer


def test_plot_training_history():
    with temp_dirname_created_and_removed() as dirname:
        filepath = os.path.join(dirname, "history")
        plots.plot_training_history(_history(), filepath)
        assert os.path.exists(filepath + ".pdf")


def test_plot_training_history_with_file_handle():
    with temp_dirname_created_and_removed() as dirname:
        filepath = os.path.join(dirname, "history.pdf")
        assert not os.path.exists(filepath)
        with open(filepath, "wb") as f:
            plots.plot_training_history(_history(), f)
        assert os.path.getsize(filepath) > 0


def test_plot_explanation_maps():
    rs = np.random.RandomState(0)
    with temp_dirname_created_and_removed() as dirname:
        filepath = os.path.join(dirname, "maps")
        plots.plot_explanation_maps(rs.uniform(size=(3, 4)), rs.uniform(size=(3, 4)), filepath, title="q1")
        assert os.path.exists(filepath + ".pdf")


def test_plot_pointing_map():
    fig, ax = plt.subplots()
    image = plots.plot_pointing_map(np.eye(3) / 3.0, ax=ax, title="pointing")
    assert image.get_array().shape == (3, 3)
    assert ax.get_title() == "pointing"
    with pytest.raises(ShapeError):
        plots.plot_pointing_map(np.ones(3), ax=ax)
    plt.close(fig)


def test_style_is_local():
    before = plt.rcParams["font.size"]
    with plots.nbpy_style_context():
        assert plt.rcParams["font.size"] == 20
    assert plt.rcParams["font.size"] == before
