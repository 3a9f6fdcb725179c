"""Minimal reverse-mode automatic differentiation.

The graph is built from coarse fused operations (convolution, batch
norm, dense, losses), so it stays small: a full forward pass through
the default network is a few dozen nodes.  Each node stores its value,
its parent nodes and one vector-Jacobian callback that maps the
node's output gradient to gradients for every parent.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "parents", "vjp", "grad")

    def __init__(
        self,
        value: np.ndarray,
        parents: Sequence["Node"] = (),
        vjp: Optional[Callable] = None,
    ):
        self.value = value
        self.parents = tuple(parents)
        # vjp(gout) returns one gradient per parent; None entries mark
        # parents that do not need a gradient.
        self.vjp = vjp
        self.grad: Optional[np.ndarray] = None


def leaf(value: np.ndarray) -> Node:
    """Graph input: a parameter or a constant."""
    return Node(np.asarray(value))


def _topo_order(root: Node) -> list:
    order: list = []
    seen: set = set()
    stack: list = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Node, seed_grad: Optional[np.ndarray] = None) -> None:
    """Populate ``.grad`` on every node reachable from ``root``.

    ``root`` is normally a scalar loss; ``seed_grad`` defaults to 1.
    Gradients accumulate by addition when a node feeds several
    consumers (e.g. the residual skip connection).
    """
    order = _topo_order(root)
    if seed_grad is None:
        seed_grad = np.ones_like(root.value)
    root.grad = seed_grad
    for node in reversed(order):
        if node.vjp is None or node.grad is None:
            continue
        parent_grads = node.vjp(node.grad)
        for parent, g in zip(node.parents, parent_grads):
            if g is None:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g
