from __future__ import absolute_import, division, print_function

import copy
import logging

import numpy as np
import pandas as pd

_logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "split", "loss", "accuracy"]


class BaseObserver(object):
    """
    Base class for observers

    Observers are used to extract information from a training run that might
    be of further interest, but is not needed to train the model.
    """

    def observe_epoch(self, epoch, split, loss, accuracy, params):
        """
        Called after each epoch.

        Parameters
        ----------
        epoch : int
            number of the epoch, starting at 1

        split : str
            data split the values were computed on

        loss : float
            mean loss per training item

        accuracy : float
            answer accuracy (answering model) or teacher-forced token
            accuracy (explanation model)

        params : :class:`~pjx.params.ModelParams`
            current parameters; observers must copy what they keep
        """


class HistoryObserver(BaseObserver):
    """
    Collects one row per epoch; :meth:`to_frame` returns the training log and
    :meth:`write_jsonl` writes it as JSON lines ``{epoch, split, loss, accuracy}``.
    """

    def __init__(self):
        self.rows = []

    def observe_epoch(self, epoch, split, loss, accuracy, params):
        self.rows.append({"epoch": int(epoch), "split": split, "loss": float(loss), "accuracy": float(accuracy)})
        _logger.info("epoch %d (%s): loss %.6f, accuracy %.4f", epoch, split, loss, accuracy)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=HISTORY_COLUMNS)

    def write_jsonl(self, path):
        self.to_frame().to_json(path, orient="records", lines=True)


class SnapshotObserver(BaseObserver):
    """
    Keeps a copy of the parameters after the given epoch (``-1``: the last one).
    """

    def __init__(self, epoch=-1):
        if epoch == 0:
            raise ValueError("This snapshot observer only makes sense with epochs >= 1.")
        self.epoch = epoch
        self.params = None
        self.loss = list()

    def observe_epoch(self, epoch, split, loss, accuracy, params):
        self.loss.append(loss)
        if self.epoch == -1 or epoch == self.epoch:
            self.params = copy.deepcopy(params)

    def check_fitted(self):
        if self.params is None:
            raise ValueError("Observer not filled.")


def smoothed_loss(history: pd.DataFrame, window: int = 10) -> np.ndarray:
    """Rolling mean of the loss column over ``window`` epochs (complete windows only)."""
    return history["loss"].rolling(window).mean().dropna().to_numpy()


__all__ = ["BaseObserver", "HistoryObserver", "SnapshotObserver", "smoothed_loss", "HISTORY_COLUMNS"]
