import hashlib
import logging
import warnings

import decorator
import numpy as np

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

_logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    """Raised when operand shapes cannot be combined."""


class ContractError(ValueError):
    """Raised when a documented precondition of an operation is violated."""


class VocabularyError(ValueError):
    """Raised for word ids or words outside a vocabulary."""


class MassMismatchError(ValueError):
    """Raised when two distributions do not carry the same total mass."""


class CheckpointMismatchError(ValueError):
    """Raised when a checkpoint was trained with different vocabularies."""


class ConfigError(ValueError):
    """Raised for invalid run configurations."""


class ConvergenceError(RuntimeError):
    """Exception type, that should be thrown if a training run produces a
    non-finite loss and therefore its result cannot be trusted."""


class TensorFileError(ValueError):
    """Base class for problems reading PJXT tensor files."""


class CorruptTensorFileError(TensorFileError):
    """Bad magic bytes, unknown version or truncated payload."""


class TensorRankError(TensorFileError):
    """The stored tensor does not have the expected rank."""


@dataclass(frozen=True)
class RecordRejection:
    """One rejected line of a JSON-lines dataset file."""

    line: int
    field: Optional[str]
    message: str

    def __str__(self) -> str:
        field = "" if self.field is None else " field '{}'".format(self.field)
        return "line {}{}: {}".format(self.line, field, self.message)


class RecordValidationError(ValueError):
    """Raised when dataset records fail validation.

    The individual problems are available as ``rejections``.
    """

    def __init__(self, rejections: Sequence[RecordRejection], path: Optional[str] = None):
        self.rejections = list(rejections)
        self.path = path
        where = "" if path is None else " in {}".format(path)
        details = "; ".join(str(r) for r in self.rejections)
        super().__init__("{} invalid record(s){}: {}".format(len(self.rejections), where, details))


def shape_str(*arrays) -> str:
    """Render the shapes of several arrays for error messages.

    >>> shape_str(np.zeros(3), np.zeros((2, 2)))
    '(3,) and (2, 2)'
    """
    return " and ".join(str(tuple(np.shape(a))) for a in arrays)


def standard_error(values: Iterable[float]) -> Tuple[float, bool]:
    """Sample standard deviation divided by :math:`\\sqrt{n}`.

    Returns
    -------
    tuple
        the standard error and a flag that is ``True`` when the value is a
        convention (fewer than two values, standard error reported as 0).

    >>> standard_error([1.0, 3.0])
    (1.0, False)
    >>> standard_error([2.0])
    (0.0, True)
    """
    values = np.asarray(list(values), dtype=np.float64)
    if len(values) < 2:
        if len(values) == 1:
            warnings.warn("standard error of a single instance is reported as 0")
        return 0.0, True
    return float(np.std(values, ddof=1) / np.sqrt(len(values))), False


def fingerprint(items: Iterable[str]) -> str:
    """Stable short hash of an ordered sequence of strings.

    >>> fingerprint(["a", "b"]) == fingerprint(["a", "b"])
    True
    >>> fingerprint(["a", "b"]) == fingerprint(["b", "a"])
    False
    """
    digest = hashlib.sha256()
    for item in items:
        digest.update(item.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()[:16]


def generator_to_decorator(gen):
    """Turn a generator into a decorator.

    The mechanism is similar to :func:`contextlib.contextmanager` which turns
    a generator into a contextmanager. :mod:`decorator` is used internally, so
    the docstring and the signature of the decorated function are preserved.

    :param gen: wrapping the function call.
    :type gen: generator function

    :return: decorator
    """

    @decorator.decorator
    def created_decorator(func, *args, **kwargs):
        gen_instance = gen()
        try:
            next(gen_instance)
            return func(*args, **kwargs)
        finally:
            gen_instance.close()

    doc = gen.__doc__ or ""
    created_decorator.__doc__ = doc + "\n    This is the corresponding decorator."
    return created_decorator


__all__ = [
    "ShapeError",
    "ContractError",
    "VocabularyError",
    "MassMismatchError",
    "CheckpointMismatchError",
    "ConfigError",
    "ConvergenceError",
    "TensorFileError",
    "CorruptTensorFileError",
    "TensorRankError",
    "RecordRejection",
    "RecordValidationError",
    "shape_str",
    "standard_error",
    "fingerprint",
    "generator_to_decorator",
]
