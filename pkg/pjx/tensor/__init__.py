"""Dense float64 tensors with reverse-mode differentiation.

- :mod:`~pjx.tensor.core`: :class:`Graph` tape and :class:`Node` records
- :mod:`~pjx.tensor.ops`: differentiable operations
- :mod:`~pjx.tensor.gradcheck`: central finite-difference checks
- :mod:`~pjx.tensor.container`: the PJXT binary tensor format
"""
from __future__ import absolute_import, division, print_function

from pjx.tensor.core import Graph, Node, Tensor, as_tensor, backward
from pjx.tensor.container import decode_tensor, encode_tensor, load_tensor, save_tensor
from pjx.tensor.gradcheck import finite_diff_check, finite_diff_check_params, smoothness_margin

__all__ = [
    "Graph",
    "Node",
    "Tensor",
    "as_tensor",
    "backward",
    "encode_tensor",
    "decode_tensor",
    "save_tensor",
    "load_tensor",
    "finite_diff_check",
    "finite_diff_check_params",
    "smoothness_margin",
]
