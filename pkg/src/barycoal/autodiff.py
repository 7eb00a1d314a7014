"""Minimal reverse-mode autodiff on float64 numpy arrays.

Every op's vjp is itself expressed in tensor ops, so gradients can be
differentiated again (``create_graph=True``); that is what the critic
gradient penalty needs.  Graphs are per-call and single-threaded; parameter
tensors are reused across steps by mutating ``.data`` in place.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "const", "param", "grad", "backward"]


def _unbroadcast(g: "Tensor", shape: tuple) -> "Tensor":
    """Reduce a broadcast gradient back to the original operand shape."""
    while g.data.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.data.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    """Node in the computation graph: a float64 array plus its provenance."""

    __slots__ = ("data", "parents", "vjp", "requires_grad", "grad")

    def __init__(self, data, parents=(), vjp=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        track = requires_grad or any(p.requires_grad for p in parents)
        self.parents = tuple(parents) if track else ()
        self.vjp = vjp if track else None
        self.requires_grad = track
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, (self, other))
        out.vjp = lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out.vjp = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, (self, other))
        out.vjp = lambda g: (
            _unbroadcast(g * other, self.shape),
            _unbroadcast(g * self, other.shape),
        )
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)
        out = Tensor(self.data / other.data, (self, other))
        out.vjp = lambda g: (
            _unbroadcast(g / other, self.shape),
            _unbroadcast(-g * self / (other * other), other.shape),
        )
        return out

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents supported")
        out = Tensor(self.data**exponent, (self,))
        out.vjp = lambda g: (g * (exponent * self ** (exponent - 1)),)
        return out

    def __matmul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data @ other.data, (self, other))
        out.vjp = lambda g: (g @ other.transpose(), self.transpose() @ g)
        return out

    # -- shape ops ----------------------------------------------------------

    def reshape(self, shape) -> "Tensor":
        src = self.shape
        out = Tensor(self.data.reshape(shape), (self,))
        out.vjp = lambda g: (g.reshape(src),)
        return out

    def transpose(self) -> "Tensor":
        out = Tensor(self.data.T, (self,))
        out.vjp = lambda g: (g.transpose(),)
        return out

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        src = self.shape

        def vjp(g):
            if axis is not None and not keepdims:
                g = g.reshape(_keepdims_shape(src, axis))
            return (g * Tensor(np.ones(src)),)

        out.vjp = vjp
        return out

    def mean(self) -> "Tensor":
        return self.sum() * (1.0 / self.data.size)

    # -- nonlinearities ------------------------------------------------------

    def relu(self) -> "Tensor":
        mask = (self.data > 0).astype(np.float64)
        out = Tensor(self.data * mask, (self,))
        out.vjp = lambda g: (g * Tensor(mask),)
        return out

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        scale = np.where(self.data > 0, 1.0, slope)
        out = Tensor(self.data * scale, (self,))
        out.vjp = lambda g: (g * Tensor(scale),)
        return out

    def tanh(self) -> "Tensor":
        out = Tensor(np.tanh(self.data), (self,))
        out.vjp = lambda g: (g * (1.0 - out * out),)
        return out

    def sigmoid(self) -> "Tensor":
        out = Tensor(1.0 / (1.0 + np.exp(-self.data)), (self,))
        out.vjp = lambda g: (g * (out * (1.0 - out)),)
        return out

    def exp(self) -> "Tensor":
        out = Tensor(np.exp(self.data), (self,))
        out.vjp = lambda g: (g * out,)
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), (self,))
        out.vjp = lambda g: (g / self,)
        return out

    def sqrt(self) -> "Tensor":
        out = Tensor(np.sqrt(self.data), (self,))
        out.vjp = lambda g: (g * (0.5 / out),)
        return out


def _keepdims_shape(shape, axis):
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(1 if i in axes or (i - len(shape)) in axes else n for i, n in enumerate(shape))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def const(x) -> Tensor:
    return Tensor(x)


def param(x) -> Tensor:
    return Tensor(np.array(x, dtype=np.float64), requires_grad=True)


def _topo_order(root: Tensor) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order


def grad(output: Tensor, inputs: list, create_graph: bool = False) -> list:
    """Gradients of a scalar output w.r.t. ``inputs``.

    Unreachable inputs get zero gradients.  With ``create_graph`` the returned
    tensors stay connected to the graph and can be differentiated again.
    """
    if output.data.size != 1:
        raise ValueError(f"output must be scalar, got shape {output.data.shape}")
    table: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    for node in reversed(_topo_order(output)):
        g = table.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = table.get(id(parent))
            table[id(parent)] = pg if acc is None else acc + pg
    out = []
    for x in inputs:
        g = table.get(id(x))
        if g is None:
            g = Tensor(np.zeros_like(x.data))
        out.append(g if create_graph else g.detach())
    return out


def backward(loss: Tensor, params: list) -> list:
    """Populate ``p.grad`` for every parameter and return the gradient list."""
    grads = grad(loss, params)
    for p, g in zip(params, grads):
        p.grad = g.data
    return grads
