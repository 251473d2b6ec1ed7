"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` records every operation whose inputs trace back to a watched
parameter; ``gradient_of`` replays the record backwards to produce exact
analytic gradients. All ops also accept plain arrays (or floats) and then
return plain arrays, so model code can run untaped for inference.

Tapes are single-owner: build and differentiate one tape per thread.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingHandleError, ShapeError


def _val(x) -> np.ndarray:
    if isinstance(x, Node):
        return x.value
    return np.asarray(x, dtype=np.float64)


def value_of(x) -> np.ndarray:
    """Detached numpy value of a node or array."""
    return _val(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


class Node:
    """A value in the recorded computation."""

    __slots__ = ("value", "tape", "parents", "backward", "grad", "_index")

    def __init__(self, value, tape=None, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.backward = backward
        self.grad = None
        self._index = -1
        if tape is not None:
            self._index = len(tape._nodes)
            tape._nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return pow_const(self, p)


class Tape:
    """Ordered record of operations plus the watched parameter handles."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._watched: dict[str, Node] = {}

    def watch(self, name: str, value) -> Node:
        """Register a parameter leaf; repeated watches return the same node."""
        if name in self._watched:
            return self._watched[name]
        node = Node(np.array(value, dtype=np.float64), tape=self)
        self._watched[name] = node
        return node

    @property
    def watched_names(self):
        return tuple(self._watched)

    def gradients(self, loss: Node) -> dict[str, np.ndarray]:
        if not isinstance(loss, Node) or loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise ShapeError(f"loss must be scalar, got shape {loss.value.shape}")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._nodes[: loss._index + 1]):
            if node.grad is None or node.backward is None:
                continue
            for parent, g in zip(node.parents, node.backward(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g
        return {
            name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
            for name, leaf in self._watched.items()
        }


def gradient_of(loss: Node, tape: Tape, parameters=None) -> dict[str, np.ndarray]:
    """Gradients of a recorded scalar loss, keyed by parameter handle.

    Parameters never watched on the tape raise MissingHandleError; watched
    parameters the loss does not depend on get exact zeros.
    """
    grads = tape.gradients(loss)
    if parameters is None:
        return grads
    missing = [p for p in parameters if p not in grads]
    if missing:
        raise MissingHandleError(f"parameters not on tape: {missing}")
    return {p: grads[p] for p in parameters}


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Node):
            if tape is None:
                tape = x.tape
            elif tape is not x.tape:
                raise ValueError("operands recorded on different tapes")
    return tape


def _node_parents(*xs):
    return tuple(x for x in xs if isinstance(x, Node))


def add(a, b):
    va, vb = _val(a), _val(b)
    out = va + vb
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(_unbroadcast(g, va.shape))
        if isinstance(b, Node):
            grads.append(_unbroadcast(g, vb.shape))
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def sub(a, b):
    va, vb = _val(a), _val(b)
    out = va - vb
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(_unbroadcast(g, va.shape))
        if isinstance(b, Node):
            grads.append(_unbroadcast(-g, vb.shape))
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def mul(a, b):
    va, vb = _val(a), _val(b)
    out = va * vb
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(_unbroadcast(g * vb, va.shape))
        if isinstance(b, Node):
            grads.append(_unbroadcast(g * va, vb.shape))
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def div(a, b):
    va, vb = _val(a), _val(b)
    out = va / vb
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(_unbroadcast(g / vb, va.shape))
        if isinstance(b, Node):
            grads.append(_unbroadcast(-g * va / (vb * vb), vb.shape))
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def matmul(a, b):
    va, vb = _val(a), _val(b)
    if va.ndim != 2 or vb.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if va.shape[1] != vb.shape[0]:
        raise ShapeError(f"cannot multiply {va.shape} by {vb.shape}")
    out = va @ vb
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(g @ vb.T)
        if isinstance(b, Node):
            grads.append(va.T @ g)
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def spmm(sparse_const, x):
    """Constant sparse matrix times a dense (possibly traced) matrix."""
    vx = _val(x)
    out = np.asarray(sparse_const @ vx)
    if not isinstance(x, Node):
        return out
    return Node(out, x.tape, (x,), lambda g: [np.asarray(sparse_const.T @ g)])


def transpose(x):
    vx = _val(x)
    if not isinstance(x, Node):
        return vx.T
    return Node(vx.T.copy(), x.tape, (x,), lambda g: [g.T])


def sum_(x, axis=None, keepdims=False):
    vx = _val(x)
    out = vx.sum(axis=axis, keepdims=keepdims)
    if not isinstance(x, Node):
        return out

    def backward(g):
        if axis is None:
            return [np.broadcast_to(g, vx.shape).copy()]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [np.broadcast_to(gg, vx.shape).copy()]

    return Node(out, x.tape, (x,), backward)


def mean(x):
    vx = _val(x)
    out = vx.mean()
    if not isinstance(x, Node):
        return out
    scale = 1.0 / vx.size
    return Node(out, x.tape, (x,), lambda g: [np.broadcast_to(g * scale, vx.shape).copy()])


def pow_const(x, p: float):
    vx = _val(x)
    out = vx**p
    if not isinstance(x, Node):
        return out
    return Node(out, x.tape, (x,), lambda g: [g * p * vx ** (p - 1)])


def sqrt(x):
    vx = _val(x)
    out = np.sqrt(vx)
    if not isinstance(x, Node):
        return out
    return Node(out, x.tape, (x,), lambda g: [g * 0.5 / out])


def exp(x):
    vx = _val(x)
    out = np.exp(vx)
    if not isinstance(x, Node):
        return out
    return Node(out, x.tape, (x,), lambda g: [g * out])


def log(x):
    vx = _val(x)
    out = np.log(vx)
    if not isinstance(x, Node):
        return out
    return Node(out, x.tape, (x,), lambda g: [g / vx])


def softplus(x):
    """log(1 + exp(x)) computed without overflow; gradient is sigmoid(x)."""
    vx = _val(x)
    out = np.log1p(np.exp(-np.abs(vx))) + np.maximum(vx, 0.0)
    if not isinstance(x, Node):
        return out

    def backward(g):
        sig = np.where(vx >= 0, 1.0 / (1.0 + np.exp(-vx)), np.exp(vx) / (1.0 + np.exp(vx)))
        return [g * sig]

    return Node(out, x.tape, (x,), backward)


def softmax_rows(x):
    """Row-wise softmax of a 2-D matrix."""
    vx = _val(x)
    shifted = vx - vx.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    if not isinstance(x, Node):
        return out

    def backward(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return [out * (g - dot)]

    return Node(out, x.tape, (x,), backward)


def logsumexp_rows(x):
    """Row-wise log-sum-exp of a 2-D matrix, returned with shape (n, 1)."""
    vx = _val(x)
    m = vx.max(axis=1, keepdims=True)
    out = m + np.log(np.exp(vx - m).sum(axis=1, keepdims=True))
    if not isinstance(x, Node):
        return out

    def backward(g):
        soft = np.exp(vx - out)
        return [g * soft]

    return Node(out, x.tape, (x,), backward)


def concat_cols(a, b):
    va, vb = _val(a), _val(b)
    if va.shape[0] != vb.shape[0]:
        raise ShapeError(f"row counts differ: {va.shape} vs {vb.shape}")
    out = np.concatenate([va, vb], axis=1)
    tape = _tape_of(a, b)
    if tape is None:
        return out
    split = va.shape[1]

    def backward(g):
        grads = []
        if isinstance(a, Node):
            grads.append(g[:, :split])
        if isinstance(b, Node):
            grads.append(g[:, split:])
        return grads

    return Node(out, tape, _node_parents(a, b), backward)


def take_rows(x, indices):
    """Gather rows by index; the backward pass scatter-adds."""
    vx = _val(x)
    idx = np.asarray(indices, dtype=np.intp)
    out = vx[idx]
    if not isinstance(x, Node):
        return out

    def backward(g):
        z = np.zeros_like(vx)
        np.add.at(z, idx, g)
        return [z]

    return Node(out, x.tape, (x,), backward)


def normalize_rows(x, eps: float = 1e-12):
    """Scale each row to unit L2 norm (eps keeps zero rows finite)."""
    sq = sum_(mul(x, x), axis=1, keepdims=True)
    return div(x, sqrt(add(sq, eps)))
