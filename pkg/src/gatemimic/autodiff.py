"""Small reverse-mode automatic differentiation engine over numpy arrays.

Tensors wrap float64 arrays and record the operations applied to them;
backward() walks the tape in reverse topological order and accumulates
gradients.  Broadcasting follows numpy rules, with gradients summed
back down to each operand's shape.  The op set is exactly what the
trainable selector network needs, nothing more.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: "np.ndarray", shape: tuple) -> "np.ndarray":
    """Sum grad down to shape, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")
    __array_priority__ = 100  # keep numpy from hijacking reflected operators

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents: tuple = ()

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # -- graph plumbing -------------------------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def _make(self, data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set = set()
        stack: list[tuple] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: "np.ndarray") -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad), self.data.shape)
        self.grad = grad if self.grad is None else self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(g)

        return self._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self._accumulate(-g)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        other = Tensor._lift(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(-g)

        return self._make(self.data - other.data, (self, other), backward)

    def __rsub__(self, other):
        return Tensor._lift(other) - self

    def __mul__(self, other):
        other = Tensor._lift(other)

        def backward(g):
            self._accumulate(g * other.data)
            other._accumulate(g * self.data)

        return self._make(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)

        def backward(g):
            self._accumulate(g / other.data)
            other._accumulate(-g * self.data / (other.data**2))

        return self._make(self.data / other.data, (self, other), backward)

    def __rtruediv__(self, other):
        return Tensor._lift(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")

        def backward(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1))

        return self._make(self.data**exponent, (self,), backward)

    def __matmul__(self, other):
        other = Tensor._lift(other)

        def backward(g):
            self._accumulate(g @ other.data.T)
            other._accumulate(self.data.T @ g)

        return self._make(self.data @ other.data, (self, other), backward)

    # -- shape ops ------------------------------------------------------------

    @property
    def T(self) -> "Tensor":
        def backward(g):
            self._accumulate(g.T)

        return self._make(self.data.T, (self,), backward)

    def reshape(self, *shape) -> "Tensor":
        old = self.data.shape

        def backward(g):
            self._accumulate(g.reshape(old))

        return self._make(self.data.reshape(*shape), (self,), backward)

    @staticmethod
    def concat(tensors, axis: int = 0) -> "Tensor":
        tensors = [Tensor._lift(t) for t in tensors]
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def backward(g):
            for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
                t._accumulate(piece)

        data = np.concatenate([t.data for t in tensors], axis=axis)
        out = Tensor(data)
        if any(t.requires_grad for t in tensors):
            out.requires_grad = True
            out._parents = tuple(tensors)
            out._backward = backward
        return out

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def backward(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(gg, self.data.shape))

        return self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]

        def backward(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape) / count)
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(gg, self.data.shape) / count)

        return self._make(self.data.mean(axis=axis, keepdims=keepdims), (self,), backward)

    # -- elementwise nonlinearities --------------------------------------------

    def log(self) -> "Tensor":
        def backward(g):
            self._accumulate(g / self.data)

        return self._make(np.log(self.data), (self,), backward)

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(g):
            self._accumulate(g * out_data)

        return self._make(out_data, (self,), backward)

    def abs(self) -> "Tensor":
        def backward(g):
            self._accumulate(g * np.sign(self.data))

        return self._make(np.abs(self.data), (self,), backward)

    def maximum(self, other) -> "Tensor":
        """Elementwise max; gradient splits evenly on exact ties."""
        other = Tensor._lift(other)

        def backward(g):
            gt = self.data > other.data
            lt = self.data < other.data
            tie = ~(gt | lt)
            self._accumulate(g * (gt + 0.5 * tie))
            other._accumulate(g * (lt + 0.5 * tie))

        return self._make(np.maximum(self.data, other.data), (self, other), backward)

    def relu(self) -> "Tensor":
        def backward(g):
            self._accumulate(g * (self.data > 0))

        return self._make(np.maximum(self.data, 0.0), (self,), backward)

    def clip(self, lo: float, hi: float) -> "Tensor":
        def backward(g):
            inside = (self.data >= lo) & (self.data <= hi)
            self._accumulate(g * inside)

        return self._make(np.clip(self.data, lo, hi), (self,), backward)

    def softmax(self, axis: int = -1) -> "Tensor":
        """Softmax along axis with the usual detached max shift."""
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            self._accumulate(out_data * (g - dot))

        return self._make(out_data, (self,), backward)


class Adam:
    """Adam optimizer over a list of Tensors."""

    def __init__(self, params, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def gradcheck(fn, tensors, eps: float = 1e-5, rtol: float = 1e-4, floor: float = 1e-6) -> bool:
    """Compare analytic gradients of fn(*tensors) with central differences.

    fn must return a scalar Tensor.  Raises AssertionError naming the
    first offending element.
    """
    for t in tensors:
        t.zero_grad()
    out = fn(*tensors)
    out.backward()
    analytic = [None if t.grad is None else t.grad.copy() for t in tensors]
    for ti, t in enumerate(tensors):
        if not t.requires_grad:
            continue
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = float(fn(*tensors).data)
            flat[i] = keep - eps
            lo = float(fn(*tensors).data)
            flat[i] = keep
            num[i] = (hi - lo) / (2 * eps)
        ana = np.zeros_like(flat) if analytic[ti] is None else analytic[ti].reshape(-1)
        for i in range(flat.size):
            denom = max(abs(ana[i]), abs(num[i]), floor)
            if abs(ana[i] - num[i]) / denom > rtol:
                raise AssertionError(
                    f"grad mismatch tensor {ti} element {i}: analytic {ana[i]}, numeric {num[i]}"
                )
    return True
