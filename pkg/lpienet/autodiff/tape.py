#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Reverse-mode differentiation over an explicit operation tape.

A Node wraps a 4-D numpy array (n, c, h, w). Nodes created by Tape.watch()
are leaves whose gradient is wanted. Every op that consumes at least one
watched node appends its output node to that tape, so the tape order is a
topological order of the graph. Nodes without a tape are constants and
running ops on them records nothing.
"""

import numpy as np

from lpienet.globals import ShapeError


class Node:
    """A value in the differentiable graph."""

    __slots__ = ('value', 'grad', 'parents', 'backward_fn', 'requires_grad', 'name', 'tape', 'index')

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False, name=None, tape=None):
        value = np.asarray(value)
        if value.ndim != 4:
            raise ShapeError('ndim', 4, value.ndim, where=name or 'node')
        self.value = value
        self.grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.tape = tape
        self.index = -1

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def accumulate(self, grad):
        if grad.shape != self.value.shape:
            raise ShapeError('grad', self.value.shape, grad.shape, where=self.name or 'node')
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        kind = 'leaf' if self.backward_fn is None and self.requires_grad else 'node'
        return f'<{kind} {self.name or "?"} shape={self.value.shape} dtype={self.value.dtype}>'


def constant(value, name=None):
    """Wrap an array as a node that never receives a gradient."""
    if isinstance(value, Node):
        return value
    return Node(value, name=name)


class Tape:
    """Record of the differentiable operations, in creation order.

    A tape is single-owner: one backward pass at a time.
    """

    def __init__(self):
        self.nodes = []
        self.leaves = {}

    def __len__(self):
        return len(self.nodes)

    def watch(self, value, name=None):
        """Return a leaf node whose gradient will be computed."""
        node = Node(value, requires_grad=True, name=name, tape=self)
        self._append(node)
        if name is not None:
            self.leaves[name] = node
        return node

    def watch_all(self, arrays):
        """Watch every array of an ordered mapping; return the same mapping of nodes."""
        return {name: self.watch(value, name=name) for name, value in arrays.items()}

    def record(self, value, parents, backward_fn, name):
        """Append the output of an op. Called by the ops module."""
        node = Node(value, parents=parents, backward_fn=backward_fn, requires_grad=True, name=name, tape=self)
        self._append(node)
        return node

    def _append(self, node):
        node.index = len(self.nodes)
        self.nodes.append(node)

    def zero_grad(self):
        """Reset the gradients of every leaf."""
        for node in self.nodes:
            if node.backward_fn is None:
                node.zero_grad()

    def gradients(self):
        """Return the leaf gradients by name (zeros for untouched leaves)."""
        return {
            name: node.grad if node.grad is not None else np.zeros_like(node.value)
            for name, node in self.leaves.items()
        }

    def backward(self, root):
        """Populate leaf gradients with d(root)/d(leaf).

        Leaf gradients accumulate across calls; the caller resets them
        with zero_grad(). Intermediate gradients are rebuilt on each call.
        """
        if root.value.shape != (1, 1, 1, 1):
            raise ShapeError('root', (1, 1, 1, 1), root.value.shape, where='backward')
        if root.tape is not self:
            raise ValueError('backward: root node was not recorded on this tape')

        for node in self.nodes[: root.index + 1]:
            if node.backward_fn is not None:
                node.grad = None

        root.accumulate(np.ones_like(root.value))
        for node in reversed(self.nodes[: root.index + 1]):
            if node.backward_fn is None or node.grad is None:
                continue
            grads = node.backward_fn(node.grad)
            for parent, grad in zip(node.parents, grads):
                if grad is None or not parent.requires_grad:
                    continue
                parent.accumulate(grad)


def backward(tape, root):
    """Functional form of Tape.backward()."""
    tape.backward(root)
