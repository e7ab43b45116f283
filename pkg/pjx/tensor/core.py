"""
Reverse-mode differentiation on dense float64 arrays.

A :class:`Graph` is a tape: every operation appends one :class:`Node` holding
its output value, the ids of its inputs and a vector-Jacobian product. Nodes
are appended in evaluation order, so the tape is topologically sorted by
construction and :meth:`Graph.backward` is a single reverse sweep.
"""
from __future__ import absolute_import, division, print_function

import logging

import numpy as np

from pjx.utils import ContractError

from typing import Callable, Dict, List, Optional, Sequence, Tuple

_logger = logging.getLogger(__name__)

#: Tensors are plain float64 C-contiguous numpy arrays that are flagged read-only.
Tensor = np.ndarray


def as_tensor(value, check_finite: bool = True) -> Tensor:
    """Convert ``value`` to an immutable float64 tensor.

    Parameters
    ----------
    value: array-like
        values to convert; a copy is always made.
    check_finite: bool
        raise :class:`~pjx.utils.ContractError` if any value is NaN or
        infinite.

    >>> t = as_tensor([1, 2])
    >>> t.dtype, t.flags.writeable
    (dtype('float64'), False)
    """
    arr = np.array(value, dtype=np.float64, order="C", copy=True)
    if check_finite and not np.all(np.isfinite(arr)):
        raise ContractError("tensor contains non-finite values")
    arr.setflags(write=False)
    return arr


def _freeze(arr: np.ndarray) -> Tensor:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.flags.writeable and arr.flags.owndata:
        arr.setflags(write=False)
    return arr


class Node(object):
    """Record of one operation in a :class:`Graph`.

    Attributes
    ----------
    index: int
        position on the tape
    op: str
        operation id, e.g. ``"linear"``
    inputs: tuple of :class:`Node`
        operands
    value: :data:`Tensor`
        output of the operation
    requires_grad: bool
        whether a gradient is propagated to this node
    """

    __slots__ = ("graph", "index", "op", "inputs", "value", "requires_grad", "vjp", "name")

    def __init__(self, graph, index, op, inputs, value, requires_grad, vjp, name=None):
        self.graph = graph
        self.index = index
        self.op = op
        self.inputs = inputs
        self.value = value
        self.requires_grad = requires_grad
        self.vjp = vjp
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def input_ids(self) -> Tuple[int, ...]:
        return tuple(node.index for node in self.inputs)

    def __repr__(self) -> str:
        label = self.op if self.name is None else "{}:{}".format(self.op, self.name)
        return "Node({}, #{}, shape={})".format(label, self.index, self.shape)


class Graph(object):
    """Tape of operations with reverse-mode accumulation.

    >>> from pjx.tensor import ops
    >>> g = Graph()
    >>> x = g.leaf([1.0, 2.0])
    >>> loss = ops.total_sum(ops.elementwise_mul(x, x))
    >>> g.backward(loss)[x.index]
    array([2., 4.])
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.gradients: Dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, op, inputs, value, requires_grad, vjp, name=None) -> Node:
        node = Node(self, len(self.nodes), op, tuple(inputs), value, requires_grad, vjp, name)
        self.nodes.append(node)
        return node

    def leaf(self, value, name: Optional[str] = None, requires_grad: bool = True) -> Node:
        """Add an input tensor. Leaves with ``requires_grad`` receive gradients."""
        return self._append("leaf", (), as_tensor(value), requires_grad, None, name)

    def constant(self, value, name: Optional[str] = None) -> Node:
        """Add an input tensor that never receives a gradient."""
        return self.leaf(value, name=name, requires_grad=False)

    def lift(self, value) -> Node:
        """Return ``value`` if it is a node of this graph, else wrap it as a constant."""
        if isinstance(value, Node):
            if value.graph is not self:
                raise ContractError("node {!r} belongs to another graph".format(value))
            return value
        return self.constant(value)

    def record(
        self,
        op: str,
        inputs: Sequence[Node],
        value: np.ndarray,
        vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    ) -> Node:
        """Append the result of an operation.

        Parameters
        ----------
        op: str
            operation id
        inputs: sequence of :class:`Node`
            operands, all belonging to this graph
        value: numpy.ndarray
            output of the operation
        vjp: callable
            maps the gradient w.r.t. the output to a sequence with one
            gradient (or ``None``) per input; only kept if any input
            requires a gradient.
        """
        for node in inputs:
            if node.graph is not self:
                raise ContractError("operation '{}' mixes nodes of different graphs".format(op))
        requires_grad = any(node.requires_grad for node in inputs)
        return self._append(op, inputs, _freeze(value), requires_grad, vjp if requires_grad else None)

    def backward(self, loss: Node) -> Dict[int, np.ndarray]:
        """Accumulate gradients of a scalar ``loss`` for all nodes that require them.

        Returns
        -------
        dict
            node index -> gradient with the shape of the node value
        """
        if loss.graph is not self:
            raise ContractError("loss node belongs to another graph")
        if loss.value.size != 1:
            raise ContractError("backward needs a scalar loss, got shape {}".format(loss.shape))

        grads: Dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        for node in reversed(self.nodes[: loss.index + 1]):
            grad = grads.get(node.index)
            if grad is None or node.vjp is None:
                continue
            for inp, inp_grad in zip(node.inputs, node.vjp(grad)):
                if inp_grad is None or not inp.requires_grad:
                    continue
                previous = grads.get(inp.index)
                grads[inp.index] = inp_grad if previous is None else previous + inp_grad

        self.gradients = {idx: g for idx, g in grads.items() if self.nodes[idx].requires_grad}
        return self.gradients

    def gradient(self, node: Node) -> Optional[np.ndarray]:
        """Gradient of the last :meth:`backward` call w.r.t. ``node``, if any."""
        return self.gradients.get(node.index)


def backward(loss: Node) -> Dict[int, np.ndarray]:
    """Run :meth:`Graph.backward` on the graph the loss belongs to."""
    return loss.graph.backward(loss)


__all__ = ["Tensor", "as_tensor", "Node", "Graph", "backward"]
