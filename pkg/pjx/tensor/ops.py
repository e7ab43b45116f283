r"""
Differentiable operations on :class:`~pjx.tensor.core.Node` objects.

Every function takes nodes (or array-likes, which are lifted to constants of
the graph of the first node argument) and returns a new node appended to the
same graph. Shapes follow two conventions:

- vectors have shape ``(C,)``
- spatial maps have shape ``(C, N, M)``; a length-``C`` vector fuses with such a
  map by replication over the ``N x M`` grid.
"""
from __future__ import absolute_import, division, print_function

import logging

import numexpr
import numpy as np
from scipy.special import logsumexp, softmax as _softmax

from pjx.tensor.core import Graph, Node
from pjx.utils import ContractError, ShapeError, VocabularyError, shape_str

from typing import Optional, Sequence

_logger = logging.getLogger(__name__)

#: Floor of the signed square-root derivative denominator.
SIGNED_SQRT_EPS = 1e-6
#: Floor of the L2 norm in :func:`l2_normalize`.
L2_EPS = 1e-12
#: Tolerance on the total mass of an attention map passed to :func:`attend`.
ATTENTION_TOLERANCE = 1e-6


def _graph_of(*values) -> Graph:
    for value in values:
        if isinstance(value, Node):
            return value.graph
    raise ContractError("at least one operand must be a graph node")


def _lift(*values):
    graph = _graph_of(*values)
    return [graph.lift(v) for v in values]


def _broadcast_mode(a: np.ndarray, b: np.ndarray) -> str:
    if a.shape == b.shape:
        return "same"
    if a.ndim == 1 and b.ndim > 1 and a.shape[0] == b.shape[0]:
        return "left"
    if b.ndim == 1 and a.ndim > 1 and b.shape[0] == a.shape[0]:
        return "right"
    raise ShapeError("cannot combine shapes {}".format(shape_str(a, b)))


def _expand(vector: np.ndarray, ndim: int) -> np.ndarray:
    return vector.reshape(vector.shape + (1,) * (ndim - 1))


def _reduce_to_vector(grad: np.ndarray) -> np.ndarray:
    return grad.reshape(grad.shape[0], -1).sum(axis=1)


def elementwise_mul(a, b) -> Node:
    """Componentwise product with per-location vector broadcast.

    >>> g = Graph()
    >>> elementwise_mul(g.leaf([1.0, 2.0, 3.0]), g.leaf([4.0, 5.0, 6.0])).value
    array([ 4., 10., 18.])
    """
    a, b = _lift(a, b)
    mode = _broadcast_mode(a.value, b.value)
    av, bv = a.value, b.value
    if mode == "left":
        av = _expand(av, bv.ndim)
    elif mode == "right":
        bv = _expand(bv, av.ndim)

    def vjp(g):
        ga = g * bv
        gb = g * av
        if mode == "left":
            ga = _reduce_to_vector(ga)
        elif mode == "right":
            gb = _reduce_to_vector(gb)
        return ga, gb

    return a.graph.record("elementwise_mul", (a, b), av * bv, vjp)


def add(a, b) -> Node:
    """Sum of two nodes with the broadcast rule of :func:`elementwise_mul`."""
    a, b = _lift(a, b)
    mode = _broadcast_mode(a.value, b.value)
    av, bv = a.value, b.value
    if mode == "left":
        av = _expand(av, bv.ndim)
    elif mode == "right":
        bv = _expand(bv, av.ndim)

    def vjp(g):
        if mode == "left":
            return _reduce_to_vector(g), g
        if mode == "right":
            return g, _reduce_to_vector(g)
        return g, g

    return a.graph.record("add", (a, b), av + bv, vjp)


def add_n(nodes: Sequence[Node]) -> Node:
    """Sum of several nodes of identical shape."""
    if len(nodes) == 0:
        raise ContractError("add_n needs at least one operand")
    nodes = _lift(*nodes)
    shape = nodes[0].shape
    for node in nodes[1:]:
        if node.shape != shape:
            raise ShapeError("cannot add shapes {}".format(shape_str(*[n.value for n in nodes])))
    total = nodes[0].value.copy()
    for node in nodes[1:]:
        total += node.value
    return nodes[0].graph.record("add_n", nodes, total, lambda g: [g] * len(nodes))


def scale(x: Node, factor: float) -> Node:
    factor = float(factor)
    return x.graph.record("scale", (x,), x.value * factor, lambda g: (g * factor,))


def signed_sqrt(x: Node) -> Node:
    r"""Signed square root :math:`\operatorname{sign}(x) \sqrt{|x|}`.

    The derivative :math:`1 / (2 \sqrt{|x|})` is evaluated with the square
    root floored at :data:`SIGNED_SQRT_EPS`.

    >>> g = Graph()
    >>> signed_sqrt(g.leaf([4.0, -4.0, 0.0])).value
    array([ 2., -2.,  0.])
    """
    v = x.value
    out = numexpr.evaluate("where(v < 0, -sqrt(-v), sqrt(v))")

    def vjp(g):
        denom = np.maximum(np.sqrt(np.abs(v)), SIGNED_SQRT_EPS)
        return (numexpr.evaluate("g / (2. * denom)"),)

    return x.graph.record("signed_sqrt", (x,), out, vjp)


def l2_normalize(x: Node, axis: Optional[int] = None, eps: float = L2_EPS) -> Node:
    r"""Divide by the L2 norm, :math:`x / \max(\|x\|_2, \epsilon)`.

    Parameters
    ----------
    x: :class:`~pjx.tensor.core.Node`
        input
    axis: int or None
        ``None`` normalizes the whole tensor as one flat vector; ``axis=0``
        on a ``C x N x M`` map normalizes the channel vector of every grid
        location separately.
    eps: float
        floor of the norm

    >>> g = Graph()
    >>> l2_normalize(g.leaf([3.0, 4.0])).value
    array([0.6, 0.8])
    """
    v = x.value
    norm = np.sqrt(np.sum(v * v, axis=axis, keepdims=True))
    denom = np.maximum(norm, eps)
    out = v / denom
    active = norm >= eps

    def vjp(g):
        projection = np.sum(out * g, axis=axis, keepdims=True)
        return (np.where(active, (g - out * projection) / denom, g / denom),)

    return x.graph.record("l2_normalize", (x,), out, vjp)


def _softmax_vjp(out):
    def vjp(g):
        return (out * (g - np.sum(g * out)),)

    return vjp


def softmax(x: Node) -> Node:
    """Softmax over all entries of ``x``."""
    v = x.value
    shifted = np.exp(v - np.max(v))
    out = shifted / np.sum(shifted)
    return x.graph.record("softmax", (x,), out, _softmax_vjp(out))


def softmax_grid(logits: Node) -> Node:
    """Normalized attention map over an ``N x M`` grid of logits.

    The maximum logit is subtracted before exponentiation.

    >>> g = Graph()
    >>> softmax_grid(g.leaf([[0.0, np.log(3.0)]])).value
    array([[0.25, 0.75]])
    """
    if logits.value.ndim != 2:
        raise ShapeError("softmax_grid expects an N x M grid, got {}".format(shape_str(logits.value)))
    node = softmax(logits)
    node.op = "softmax_grid"
    return node


def log_softmax(x: Node) -> Node:
    v = x.value
    out = v - logsumexp(v)
    probs = np.exp(out)

    def vjp(g):
        return (g - probs * np.sum(g),)

    return x.graph.record("log_softmax", (x,), out, vjp)


def cross_entropy(logits: Node, target: int) -> Node:
    r"""Fused :math:`-\log \operatorname{softmax}(z)_t` for a logit vector ``z``."""
    v = logits.value
    if v.ndim != 1:
        raise ShapeError("cross_entropy expects a logit vector, got {}".format(shape_str(v)))
    target = int(target)
    if not 0 <= target < v.shape[0]:
        raise ContractError("target {} outside of [0, {})".format(target, v.shape[0]))
    loss = logsumexp(v) - v[target]

    def vjp(g):
        grad = _softmax(v)
        grad[target] -= 1.0
        return (g * grad,)

    return logits.graph.record("cross_entropy", (logits,), np.asarray(loss), vjp)


def linear(x: Node, W: Node, b: Optional[Node] = None) -> Node:
    """Affine map ``W x + b`` of a vector, or of every location of a ``C x N x M`` map.

    >>> g = Graph()
    >>> linear(g.leaf([1.0, 2.0]), g.leaf(np.eye(2)), g.leaf([0.5, 0.5])).value
    array([1.5, 2.5])
    """
    inputs = (x, W) if b is None else (x, W, b)
    xv, Wv = x.value, W.value
    if Wv.ndim != 2 or xv.ndim not in (1, 3) or Wv.shape[1] != xv.shape[0]:
        raise ShapeError("linear cannot apply weights {} to input {}".format(Wv.shape, xv.shape))
    if b is not None and b.value.shape != (Wv.shape[0],):
        raise ShapeError("bias {} does not match weights {}".format(b.value.shape, Wv.shape))

    if xv.ndim == 1:
        out = Wv @ xv
        if b is not None:
            out = out + b.value

        def vjp(g):
            return (Wv.T @ g, np.outer(g, xv)) + (() if b is None else (g,))

        return x.graph.record("linear", inputs, out, vjp)

    out = np.tensordot(Wv, xv, axes=([1], [0]))
    if b is not None:
        out = out + _expand(b.value, 3)

    def vjp_map(g):
        gx = np.tensordot(Wv.T, g, axes=([1], [0]))
        gW = np.tensordot(g, xv, axes=([1, 2], [1, 2]))
        return (gx, gW) + (() if b is None else (_reduce_to_vector(g),))

    return x.graph.record("conv1x1", inputs, out, vjp_map)


def conv1x1(x: Node, W: Node, b: Optional[Node] = None) -> Node:
    """1x1 convolution: :func:`linear` applied independently at each grid location."""
    if x.value.ndim != 3:
        raise ShapeError("conv1x1 expects a C x N x M map, got {}".format(shape_str(x.value)))
    return linear(x, W, b)


def matvec(W: Node, x: Node) -> Node:
    return linear(x, W)


def relu(x: Node) -> Node:
    v = x.value
    positive = v > 0
    return x.graph.record("relu", (x,), np.where(positive, v, 0.0), lambda g: (np.where(positive, g, 0.0),))


def tanh(x: Node) -> Node:
    v = x.value
    out = numexpr.evaluate("tanh(v)")
    return x.graph.record("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Node) -> Node:
    v = x.value
    out = numexpr.evaluate("1. / (1. + exp(-v))")
    return x.graph.record("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def concat(nodes: Sequence[Node]) -> Node:
    """Concatenate vectors."""
    nodes = _lift(*nodes)
    for node in nodes:
        if node.value.ndim != 1:
            raise ShapeError("concat expects vectors, got {}".format(shape_str(*[n.value for n in nodes])))
    bounds = np.cumsum([0] + [n.shape[0] for n in nodes])

    def vjp(g):
        return [g[bounds[i] : bounds[i + 1]] for i in range(len(nodes))]

    return nodes[0].graph.record("concat", nodes, np.concatenate([n.value for n in nodes]), vjp)


def take(x: Node, start: int, stop: int) -> Node:
    """Slice ``x[start:stop]`` of a vector."""
    v = x.value
    if v.ndim != 1 or not 0 <= start < stop <= v.shape[0]:
        raise ShapeError("cannot take [{}:{}] of shape {}".format(start, stop, v.shape))

    def vjp(g):
        full = np.zeros_like(v)
        full[start:stop] = g
        return (full,)

    return x.graph.record("take", (x,), v[start:stop].copy(), vjp)


def reshape(x: Node, shape) -> Node:
    v = x.value
    try:
        out = v.reshape(shape)
    except ValueError:
        raise ShapeError("cannot reshape {} to {}".format(v.shape, tuple(shape)))
    return x.graph.record("reshape", (x,), out.copy(), lambda g: (g.reshape(v.shape),))


def embedding(table: Node, index: int) -> Node:
    """Row ``index`` of an embedding table of shape ``(V, E)``."""
    v = table.value
    index = int(index)
    if v.ndim != 2:
        raise ShapeError("embedding table must be 2-D, got {}".format(shape_str(v)))
    if not 0 <= index < v.shape[0]:
        raise VocabularyError("word id {} outside of vocabulary of size {}".format(index, v.shape[0]))

    def vjp(g):
        full = np.zeros_like(v)
        full[index] = g
        return (full,)

    return table.graph.record("embedding", (table,), v[index].copy(), vjp)


def total_sum(x: Node) -> Node:
    v = x.value
    return x.graph.record("total_sum", (x,), np.asarray(v.sum()), lambda g: (np.full_like(v, float(g)),))


def attend(features: Node, alpha: Node) -> Node:
    r"""Attention-weighted sum :math:`\sum_{n,m} \alpha_{n,m} f_{c,n,m}`.

    Raises
    ------
    ContractError
        if ``alpha`` does not sum to one within :data:`ATTENTION_TOLERANCE`
    """
    features, alpha = _lift(features, alpha)
    fv, av = features.value, alpha.value
    if fv.ndim != 3 or av.shape != fv.shape[1:]:
        raise ShapeError("cannot attend features {} with map {}".format(fv.shape, av.shape))
    mass = float(av.sum())
    if abs(mass - 1.0) > ATTENTION_TOLERANCE:
        raise ContractError("attention map must sum to 1, sums to {!r}".format(mass))
    out = np.tensordot(fv, av, axes=([1, 2], [0, 1]))

    def vjp(g):
        return _expand(g, 3) * av[np.newaxis], np.tensordot(g, fv, axes=([0], [0]))

    return features.graph.record("attend", (features, alpha), out, vjp)


def dropout(x: Node, rate: float, random_state: np.random.RandomState, train: bool) -> Node:
    """Inverted dropout; the identity (same node) at evaluation time or for ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ContractError("dropout rate must lie in [0, 1), got {}".format(rate))
    if not train or rate == 0.0:
        return x
    mask = (random_state.uniform(size=x.shape) >= rate) / (1.0 - rate)
    return x.graph.record("dropout", (x,), x.value * mask, lambda g: (g * mask,))


def lstm_step(x: Node, h_prev: Node, c_prev: Node, W_x: Node, W_h: Node, b: Node):
    """One LSTM cell update with gate order input, forget, candidate, output.

    Parameters
    ----------
    x: :class:`~pjx.tensor.core.Node`
        input vector of size ``D``
    h_prev, c_prev: :class:`~pjx.tensor.core.Node`
        previous hidden and cell state of size ``H``
    W_x, W_h, b: :class:`~pjx.tensor.core.Node`
        weights of shape ``(4H, D)`` and ``(4H, H)``, bias ``(4H,)``

    Returns
    -------
    tuple
        new hidden state and cell state
    """
    H = h_prev.shape[0] if h_prev.value.ndim == 1 else -1
    if (
        H < 1
        or c_prev.shape != (H,)
        or W_h.shape != (4 * H, H)
        or x.value.ndim != 1
        or W_x.shape != (4 * H, x.shape[0])
        or b.shape != (4 * H,)
    ):
        raise ShapeError(
            "inconsistent LSTM shapes: x {}, h {}, c {}, W_x {}, W_h {}, b {}".format(
                x.shape, h_prev.shape, c_prev.shape, W_x.shape, W_h.shape, b.shape
            )
        )
    z = add(linear(x, W_x, b), matvec(W_h, h_prev))
    i = sigmoid(take(z, 0, H))
    f = sigmoid(take(z, H, 2 * H))
    g = tanh(take(z, 2 * H, 3 * H))
    o = sigmoid(take(z, 3 * H, 4 * H))
    c = add(elementwise_mul(f, c_prev), elementwise_mul(i, g))
    h = elementwise_mul(o, tanh(c))
    return h, c


__all__ = [
    "SIGNED_SQRT_EPS",
    "L2_EPS",
    "ATTENTION_TOLERANCE",
    "elementwise_mul",
    "add",
    "add_n",
    "scale",
    "signed_sqrt",
    "l2_normalize",
    "softmax",
    "softmax_grid",
    "log_softmax",
    "cross_entropy",
    "linear",
    "conv1x1",
    "matvec",
    "relu",
    "tanh",
    "sigmoid",
    "concat",
    "take",
    "reshape",
    "embedding",
    "total_sum",
    "attend",
    "dropout",
    "lstm_step",
]
