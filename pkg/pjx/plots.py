"""
Training curves and attention maps.
"""
from __future__ import absolute_import, division, print_function

import contextlib

import matplotlib as mpl
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import six
from matplotlib.backends.backend_pdf import PdfPages

from pjx.utils import ShapeError, generator_to_decorator

from typing import Optional


def _nbpy_style():
    """Activate the package's Matplotlib style default settings locally."""
    rcParams = {}
    rcParams["grid.color"] = "#000000"
    rcParams["grid.alpha"] = 0.1
    rcParams["grid.linestyle"] = "-"
    rcParams["lines.markersize"] = 3.0
    rcParams["legend.numpoints"] = 1

    # font sizes
    rcParams["font.size"] = 20
    rcParams["legend.fontsize"] = "small"
    rcParams["axes.labelsize"] = "small"
    rcParams["axes.titlesize"] = "medium"
    rcParams["xtick.labelsize"] = "small"
    rcParams["ytick.labelsize"] = "small"

    rcParams["image.interpolation"] = "nearest"

    with mpl.rc_context(rcParams):
        yield


nbpy_style = generator_to_decorator(_nbpy_style)
nbpy_style_context = contextlib.contextmanager(_nbpy_style)


def append_extension(file, extension):
    """Append a possibly missing extension to a file name; other objects are returned unchanged.

    >>> append_extension("history", ".pdf")
    'history.pdf'
    """
    if isinstance(file, six.string_types):
        if not file.endswith(extension):
            file += extension
    return file


@nbpy_style
def plot_loss(history: pd.DataFrame, ax=None):
    """Mean training loss per epoch."""
    ax = ax or plt.gca()
    ax.plot(history["epoch"], history["loss"], "o-r")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Loss")
    ax.grid(True)


@nbpy_style
def plot_accuracy(history: pd.DataFrame, ax=None):
    ax = ax or plt.gca()
    ax.plot(history["epoch"], history["accuracy"], "o-b")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Accuracy")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True)


@nbpy_style
def plot_pointing_map(heatmap: np.ndarray, ax=None, title: Optional[str] = None):
    """Show an ``N x M`` map with a colorbar."""
    heatmap = np.asarray(heatmap, dtype=np.float64)
    if heatmap.ndim != 2:
        raise ShapeError("a pointing map must be an N x M grid, got {}".format(heatmap.shape))
    ax = ax or plt.gca()
    image = ax.imshow(heatmap, cmap="viridis", vmin=0.0)
    plt.colorbar(image, ax=ax)
    if title is not None:
        ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    return image


def plot_training_history(history: pd.DataFrame, file_obj, figsize=(11, 8)):
    """Write loss and accuracy curves of a training log into a PDF, one page each.

    Parameters
    ----------
    history: :class:`pandas.DataFrame`
        columns ``epoch``, ``loss``, ``accuracy`` as produced by
        :class:`~pjx.observers.HistoryObserver`
    file_obj: str or file object
        ``.pdf`` is appended to file names without it
    """
    filepath_or_object = append_extension(file_obj, ".pdf")
    dpi = 200
    with contextlib.closing(PdfPages(filepath_or_object)) as pdf_pages:
        plt.figure(figsize=figsize)
        plot_loss(history)
        plt.savefig(pdf_pages, format="pdf", dpi=dpi)

        plt.figure(figsize=figsize)
        plot_accuracy(history)
        plt.savefig(pdf_pages, format="pdf", dpi=dpi)
    plt.close("all")


def plot_explanation_maps(answer_attention, pointing, file_obj, title: Optional[str] = None, figsize=(16, 7)):
    """Answer attention and pointing map of one instance side by side, saved as PDF."""
    filepath_or_object = append_extension(file_obj, ".pdf")
    with contextlib.closing(PdfPages(filepath_or_object)) as pdf_pages:
        fig, (left, right) = plt.subplots(1, 2, figsize=figsize)
        plot_pointing_map(answer_attention, ax=left, title="answer attention")
        plot_pointing_map(pointing, ax=right, title="pointing")
        if title is not None:
            fig.suptitle(title)
        plt.savefig(pdf_pages, format="pdf", dpi=200)
    plt.close("all")


__all__ = [
    "nbpy_style",
    "nbpy_style_context",
    "append_extension",
    "plot_loss",
    "plot_accuracy",
    "plot_pointing_map",
    "plot_training_history",
    "plot_explanation_maps",
]
