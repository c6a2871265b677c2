"""Minimal reverse-mode automatic differentiation on numpy arrays.

A small tape: every op builds a `Tensor` holding the forward value and a
vector-Jacobian-product closure. `backward(loss)` walks the graph once in
reverse topological order. Everything is float64; gradients are exact, which
is what lets the fitting and denoiser gradient checks hold to <1e-6 against
central differences.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

__all__ = [
    "Tensor",
    "param",
    "constant",
    "backward",
    "concat",
    "softmax",
    "layer_norm",
    "gelu",
    "erf",
    "safe_norm",
    "cross3",
    "embedding",
    "Adam",
]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    # sum away leading dims
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # sum broadcast (size-1) dims
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = tuple(_parents) if self.requires_grad else ()
        self._vjp = _vjp if self.requires_grad else None

    # ---- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    # ---- arithmetic ----------------------------------------------------
    def __add__(self, other):
        other = _as_tensor(other)
        out_data = self.data + other.data

        def vjp(g):
            return (_unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape))

        return Tensor(out_data, _parents=(self, other), _vjp=vjp)

    __radd__ = __add__

    def __neg__(self):
        def vjp(g):
            return (-g,)

        return Tensor(-self.data, _parents=(self,), _vjp=vjp)

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        out_data = self.data * other.data
        a, b = self, other

        def vjp(g):
            return (_unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape))

        return Tensor(out_data, _parents=(a, b), _vjp=vjp)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out_data = self.data / other.data
        a, b = self, other

        def vjp(g):
            ga = _unbroadcast(g / b.data, a.data.shape)
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
            return (ga, gb)

        return Tensor(out_data, _parents=(a, b), _vjp=vjp)

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __pow__(self, c):
        if not np.isscalar(c):
            raise TypeError("only scalar exponents are supported")
        x = self.data

        def vjp(g):
            return (g * c * x ** (c - 1),)

        return Tensor(x**c, _parents=(self,), _vjp=vjp)

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self, other
        out_data = a.data @ b.data

        def vjp(g):
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape) \
                if a.requires_grad else None
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape) \
                if b.requires_grad else None
            return (ga, gb)

        return Tensor(out_data, _parents=(a, b), _vjp=vjp)

    # ---- reductions / shape ops ----------------------------------------
    def sum(self, axis=None, keepdims=False):
        x_shape = self.data.shape

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, x_shape).copy(),)
            gg = g
            if not keepdims:
                gg = np.expand_dims(g, axis)
            return (np.broadcast_to(gg, x_shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _vjp=vjp)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x_shape = self.data.shape

        def vjp(g):
            return (g.reshape(x_shape),)

        return Tensor(self.data.reshape(shape), _parents=(self,), _vjp=vjp)

    def transpose(self, axes):
        inv = np.argsort(axes)

        def vjp(g):
            return (g.transpose(inv),)

        return Tensor(self.data.transpose(axes), _parents=(self,), _vjp=vjp)

    def __getitem__(self, key):
        x_shape = self.data.shape

        def vjp(g):
            full = np.zeros(x_shape)
            np.add.at(full, key, g)
            return (full,)

        return Tensor(self.data[key], _parents=(self,), _vjp=vjp)

    # ---- elementwise functions ------------------------------------------
    def exp(self):
        out_data = np.exp(self.data)

        def vjp(g):
            return (g * out_data,)

        return Tensor(out_data, _parents=(self,), _vjp=vjp)

    def log(self):
        x = self.data

        def vjp(g):
            return (g / x,)

        return Tensor(np.log(x), _parents=(self,), _vjp=vjp)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def vjp(g):
            return (g * 0.5 / out_data,)

        return Tensor(out_data, _parents=(self,), _vjp=vjp)

    def tanh(self):
        out_data = np.tanh(self.data)

        def vjp(g):
            return (g * (1.0 - out_data * out_data),)

        return Tensor(out_data, _parents=(self,), _vjp=vjp)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    """Leaf tensor that collects gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data)


# ---- free functions -----------------------------------------------------


def concat(tensors, axis=-1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors), _vjp=vjp)


def erf(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    xd = x.data

    def vjp(g):
        return (g * (2.0 / np.sqrt(np.pi)) * np.exp(-xd * xd),)

    return Tensor(_erf(xd), _parents=(x,), _vjp=vjp)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x/2 * (1 + erf(x / sqrt(2))). Fused single op."""
    x = _as_tensor(x)
    xd = x.data
    cdf = 0.5 * (1.0 + _erf(xd * (1.0 / np.sqrt(2.0))))
    out_data = xd * cdf

    def vjp(g):
        pdf = np.exp(-0.5 * xd * xd) * (1.0 / np.sqrt(2.0 * np.pi))
        return (g * (cdf + xd * pdf),)

    return Tensor(out_data, _parents=(x,), _vjp=vjp)


def softmax(x: Tensor, axis=-1) -> Tensor:
    """Numerically stable softmax, fused with its analytic backward."""
    x = _as_tensor(x)
    z = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out_data = z / z.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - dot),)

    return Tensor(out_data, _parents=(x,), _vjp=vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def vjp(g):
        g_xhat = g * gain.data
        gx = inv * (g_xhat - g_xhat.mean(axis=-1, keepdims=True)
                    - xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True))
        g_gain = _unbroadcast(g * xhat, gain.data.shape)
        g_bias = _unbroadcast(g, bias.data.shape)
        return (gx, g_gain, g_bias)

    return Tensor(out_data, _parents=(x, gain, bias), _vjp=vjp)


def safe_norm(x: Tensor, eps: float = 1e-9) -> Tensor:
    """Euclidean norm along the last axis; gradient forced to 0 below `eps`.

    Keeps fitting losses finite when a deformed edge collapses.
    """
    x = _as_tensor(x)
    n = np.sqrt((x.data * x.data).sum(axis=-1))
    safe = np.where(n < eps, 1.0, n)
    mask = (n >= eps).astype(np.float64)

    def vjp(g):
        return ((g * mask / safe)[..., None] * x.data,)

    return Tensor(n, _parents=(x,), _vjp=vjp)


def cross3(a: Tensor, b: Tensor) -> Tensor:
    """Cross product along the last axis (size 3)."""
    a, b = _as_tensor(a), _as_tensor(b)

    def vjp(g):
        return (np.cross(b.data, g), np.cross(g, a.data))

    return Tensor(np.cross(a.data, b.data), _parents=(a, b), _vjp=vjp)


def embedding(table: Tensor, idx: np.ndarray) -> Tensor:
    """Look up table[..., idx] along the last axis; scatter-adds on backward."""
    table = _as_tensor(table)
    idx = np.asarray(idx)

    def vjp(g):
        gt = np.zeros_like(table.data)
        if table.data.ndim == 1:
            np.add.at(gt, idx, g)
        else:
            for h in range(table.data.shape[0]):
                np.add.at(gt[h], idx, g[h])
        return (gt,)

    return Tensor(table.data[..., idx] if table.data.ndim == 1 else table.data[:, idx],
                  _parents=(table,), _vjp=vjp)


# ---- backward pass -------------------------------------------------------


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, grad=None) -> None:
    """Accumulate gradients of `root` into every reachable leaf's `.grad`."""
    if not root.requires_grad:
        return
    root.grad = np.ones_like(root.data) if grad is None else np.asarray(grad, dtype=np.float64)
    for node in reversed(_toposort(root)):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# ---- optimizer ------------------------------------------------------------


class Adam:
    """Standard Adam over a dict of `param` tensors. Moments 0.9/0.999, eps 1e-8."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k] = b1 * self.m[k] + (1 - b1) * g
            v = self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
