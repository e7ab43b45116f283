"""
Central finite-difference verification of analytic gradients.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np

from pjx.tensor.core import Graph, Node, as_tensor
from pjx.utils import ContractError

from typing import Callable, Dict, Iterable, Mapping, Optional

_logger = logging.getLogger(__name__)

#: Operations whose derivative is discontinuous at zero input.
NON_SMOOTH_OPS = ("relu", "signed_sqrt")


def _scalar(node: Node) -> float:
    if node.value.size != 1:
        raise ContractError("checked function must return a scalar, got shape {}".format(node.shape))
    return float(node.value.reshape(()))


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        f_plus = f(x.copy())
        flat[i] = original - h
        f_minus = f(x.copy())
        flat[i] = original
        grad.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, denominator_floor: float = 1e-8) -> float:
    """Maximum of ``|numeric - analytic| / max(|analytic|, floor)``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(numeric - analytic) / np.maximum(np.abs(analytic), denominator_floor)))


def finite_diff_check(
    f: Callable[[Node], Node], x, h: float = 1e-5, denominator_floor: float = 1e-8
) -> float:
    """Compare the reverse-mode gradient of ``f`` at ``x`` with central differences.

    Parameters
    ----------
    f: callable
        maps a leaf :class:`~pjx.tensor.core.Node` to a scalar node of the
        same graph
    x: array-like
        point of evaluation
    h: float
        finite-difference step
    denominator_floor: float
        lower bound of the denominator of the relative error

    Returns
    -------
    float
        maximum relative error over all components of ``x``

    >>> from pjx.tensor import ops
    >>> finite_diff_check(lambda v: ops.total_sum(ops.elementwise_mul(v, v)), [1.0, 2.0]) < 1e-8
    True
    """
    x = as_tensor(x)
    graph = Graph()
    leaf = graph.leaf(x)
    out = f(leaf)
    _scalar(out)
    graph.backward(out)
    analytic = graph.gradient(leaf)
    if analytic is None:
        analytic = np.zeros_like(x)

    def evaluate(value):
        g = Graph()
        return _scalar(f(g.leaf(value)))

    numeric = numerical_gradient(evaluate, x, h)
    return relative_error(analytic, numeric, denominator_floor)


def finite_diff_check_params(
    build: Callable[[Graph, Dict[str, Node]], Node],
    params: Mapping[str, np.ndarray],
    names: Optional[Iterable[str]] = None,
    h: float = 1e-5,
    denominator_floor: float = 1e-8,
) -> Dict[str, float]:
    """Finite-difference check of several named tensors at once.

    ``build(graph, leaves)`` must construct a scalar loss from the leaves that
    are bound for every entry of ``params``. Returns the maximum relative
    error per checked name.
    """
    params = {name: as_tensor(value) for name, value in params.items()}
    names = list(params) if names is None else list(names)

    def run(values):
        graph = Graph()
        leaves = {name: graph.leaf(value, name=name) for name, value in values.items()}
        return graph, leaves, build(graph, leaves)

    graph, leaves, loss = run(params)
    _scalar(loss)
    graph.backward(loss)

    errors = {}
    for name in names:
        analytic = graph.gradient(leaves[name])
        if analytic is None:
            analytic = np.zeros_like(params[name])

        def evaluate(value, name=name):
            values = dict(params)
            values[name] = value
            return _scalar(run(values)[2])

        numeric = numerical_gradient(evaluate, params[name], h)
        errors[name] = relative_error(analytic, numeric, denominator_floor)
        _logger.debug("finite-difference error of %s: %g", name, errors[name])
    return errors


def smoothness_margin(graph: Graph, ops: Iterable[str] = NON_SMOOTH_OPS) -> float:
    """Smallest absolute input value of any non-smooth operation recorded in ``graph``.

    Finite differences with step ``h`` are only meaningful when this margin
    exceeds ``h`` comfortably.
    """
    ops = tuple(ops)
    margin = np.inf
    for node in graph.nodes:
        if node.op in ops and node.inputs[0].value.size:
            margin = min(margin, float(np.min(np.abs(node.inputs[0].value))))
    return margin


__all__ = [
    "NON_SMOOTH_OPS",
    "numerical_gradient",
    "relative_error",
    "finite_diff_check",
    "finite_diff_check_params",
    "smoothness_margin",
]
