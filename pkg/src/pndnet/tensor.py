"""Dense tensors with reverse-mode automatic differentiation.

Tensors wrap row-major numpy float32/float64 buffers. Operations record a
computation graph whenever any input requires gradients and grad recording is
enabled; ``Tensor.backward`` on a scalar then accumulates gradients into every
participating tensor's ``.grad``.

Conventions used across the package: images and feature maps are [H, W, C],
node matrices are [P, C]. Convolution is cross-correlation (no kernel flip).
"""

from __future__ import annotations

import contextlib
import hashlib
import math
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DimensionError, NumericalError

# Every registered op asserts its output is finite. Training relies on this
# to surface divergence at the op that produced it.
CHECK_FINITE = True

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (eval-mode forwards are plain numpy)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Rng:
    """Seedable PCG64 stream: identical seed, identical draws, any platform."""

    ALGORITHM = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, tag: str) -> "Rng":
        """Independent stream derived from (seed, tag), stable across runs."""
        digest = hashlib.sha256(f"{self.seed}:{tag}".encode()).digest()
        return Rng(int.from_bytes(digest[:8], "little"))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"Rng(seed={self.seed}, algorithm={self.ALGORITHM!r})"


class Tensor:
    """N-dimensional float tensor, optionally tracked by the autodiff graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ArgumentError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-topological gradient accumulation from a scalar node."""
        if self.data.size != 1:
            raise ArgumentError(f"backward requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        _accumulate(self, np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, op={self._op!r})"

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other, self))

    def __radd__(self, other):
        return add(_wrap(other, self), self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other, self)))

    def __rsub__(self, other):
        return add(_wrap(other, self), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other, self))

    def __rmul__(self, other):
        return mul(_wrap(other, self), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _record(data: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    if CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericalError(f"non-finite values produced by {op}")
    out = Tensor(data)
    out._op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting introduced or stretched."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra ops


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(data, (a, b), backward, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(data, (a, b), backward, "mul")


def neg(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, -g)

    return _record(-a.data, (a,), backward, "neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _record(data, (a, b), backward, "matmul")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        _accumulate(a, g * mask)

    return _record(np.where(mask, a.data, 0), (a,), backward, "relu")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ArgumentError(f"softmax axis {axis} invalid for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(a, (g - (g * y).sum(axis=axis, keepdims=True)) * y)

    return _record(y, (a,), backward, "softmax")


def tensor_sum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, np.full_like(a.data, float(g)))

    return _record(data, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.size // data.size

    def backward(g):
        expanded = g if keepdims or axis is None else np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(expanded / count, a.data.shape).astype(a.data.dtype, copy=False))

    return _record(np.asarray(data, dtype=a.data.dtype), (a,), backward, "mean")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _record(a.data.reshape(shape), (a,), backward, "reshape")


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along axis 0; the backward pass splits the gradient back."""
    if not parts:
        raise ArgumentError("concat_rows needs at least one tensor")
    data = np.concatenate([p.data for p in parts], axis=0)
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def backward(g):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(part, g[lo:hi])

    return _record(data, tuple(parts), backward, "concat_rows")


def broadcast_rows(a: Tensor, n: int) -> Tensor:
    """Tile a [1, C] row to [n, C]; gradient sums over the tiled rows."""
    if a.data.ndim != 2 or a.data.shape[0] != 1:
        raise DimensionError(f"broadcast_rows expects [1, C], got {a.data.shape}")
    if n < 1:
        raise ArgumentError(f"row count must be >= 1, got {n}")

    def backward(g):
        _accumulate(a, g.sum(axis=0, keepdims=True))

    return _record(np.broadcast_to(a.data, (n, a.data.shape[1])).copy(), (a,), backward, "broadcast_rows")


# ---------------------------------------------------------------------------
# spatial ops on [H, W, C] maps


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of an [H, W, Cin] map with a [kh, kw, Cin, Cout] kernel."""
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise DimensionError(f"conv2d expects [H,W,Cin] x [kh,kw,Cin,Cout], got {x.data.shape} x {kernel.data.shape}")
    if stride < 1:
        raise ArgumentError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ArgumentError(f"pad must be >= 0, got {pad}")
    h, w, cin = x.data.shape
    kh, kw, kcin, cout = kernel.data.shape
    if kcin != cin:
        raise DimensionError(f"conv2d channel mismatch: input {x.data.shape} vs kernel {kernel.data.shape}")
    hp, wp = h + 2 * pad, w + 2 * pad
    if kh > hp or kw > wp:
        raise DimensionError(f"kernel {kernel.data.shape} larger than padded input {(hp, wp, cin)}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0))) if pad else x.data
    kflat = kernel.data
    out = np.zeros((ho, wo, cout), dtype=x.data.dtype)
    for u in range(kh):
        for v in range(kw):
            patch = xp[u:u + (ho - 1) * stride + 1:stride, v:v + (wo - 1) * stride + 1:stride]
            out += (patch.reshape(-1, cin) @ kflat[u, v]).reshape(ho, wo, cout)

    def backward(g):
        gflat = g.reshape(-1, cout)
        if kernel.requires_grad:
            dk = np.zeros_like(kernel.data)
            for u in range(kh):
                for v in range(kw):
                    patch = xp[u:u + (ho - 1) * stride + 1:stride, v:v + (wo - 1) * stride + 1:stride]
                    dk[u, v] = patch.reshape(-1, cin).T @ gflat
            _accumulate(kernel, dk)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    contrib = (gflat @ kflat[u, v].T).reshape(ho, wo, cin)
                    dxp[u:u + (ho - 1) * stride + 1:stride, v:v + (wo - 1) * stride + 1:stride] += contrib
            _accumulate(x, dxp[pad:pad + h, pad:pad + w] if pad else dxp)

    return _record(out, (x, kernel), backward, "conv2d")


def _pool_bins(extent: int, n: int) -> list[tuple[int, int]]:
    # bin r spans [floor(r*extent/n), ceil((r+1)*extent/n)); bins may overlap
    # when n does not divide extent, and are always non-empty.
    return [(math.floor(r * extent / n), math.ceil((r + 1) * extent / n)) for r in range(n)]


def adaptive_max_pool2d(x: Tensor, n: int) -> Tensor:
    """Max-pool an [H, W, C] map onto an n x n grid of adaptive bins."""
    if x.data.ndim != 3:
        raise DimensionError(f"adaptive_max_pool2d expects [H,W,C], got {x.data.shape}")
    if n <= 0:
        raise ArgumentError(f"grid size must be positive, got {n}")
    h, w, c = x.data.shape
    rows = _pool_bins(h, n)
    cols = _pool_bins(w, n)
    out = np.empty((n, n, c), dtype=x.data.dtype)
    arg_r = np.empty((n, n, c), dtype=np.intp)
    arg_c = np.empty((n, n, c), dtype=np.intp)
    for r, (r0, r1) in enumerate(rows):
        for cc, (c0, c1) in enumerate(cols):
            patch = x.data[r0:r1, c0:c1, :]
            flat = patch.reshape(-1, c)
            idx = flat.argmax(axis=0)  # first maximum in row-major order
            out[r, cc] = flat[idx, np.arange(c)]
            pr, pc = np.unravel_index(idx, patch.shape[:2])
            arg_r[r, cc] = pr + r0
            arg_c[r, cc] = pc + c0

    def backward(g):
        dx = np.zeros_like(x.data)
        ch = np.arange(c)
        for r in range(n):
            for cc in range(n):
                np.add.at(dx, (arg_r[r, cc], arg_c[r, cc], ch), g[r, cc])
        _accumulate(x, dx)

    return _record(out, (x,), backward, "adaptive_max_pool2d")


def avg_pool_region(x: Tensor, rows: tuple[int, int], cols: tuple[int, int]) -> Tensor:
    """Per-channel mean over the half-open rectangle rows x cols -> [C]."""
    if x.data.ndim != 3:
        raise DimensionError(f"avg_pool_region expects [H,W,C], got {x.data.shape}")
    h, w, _ = x.data.shape
    r0, r1 = rows
    c0, c1 = cols
    if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= w):
        raise ArgumentError(f"region rows={rows} cols={cols} invalid for map {x.data.shape}")
    count = (r1 - r0) * (c1 - c0)
    data = x.data[r0:r1, c0:c1, :].mean(axis=(0, 1))

    def backward(g):
        dx = np.zeros_like(x.data)
        dx[r0:r1, c0:c1, :] = g / count
        _accumulate(x, dx)

    return _record(data, (x,), backward, "avg_pool_region")


def upsample_nearest(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Nearest-neighbor upsampling of an [h, w, C] map to [out_h, out_w, C]."""
    if x.data.ndim != 3:
        raise DimensionError(f"upsample_nearest expects [H,W,C], got {x.data.shape}")
    h, w, _ = x.data.shape
    if out_h < h or out_w < w:
        raise ArgumentError(f"upsample cannot shrink {x.data.shape[:2]} to {(out_h, out_w)}")
    ri = (np.arange(out_h) * h) // out_h
    ci = (np.arange(out_w) * w) // out_w
    data = x.data[ri[:, None], ci[None, :], :]

    def backward(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, (ri[:, None], ci[None, :]), g)
        _accumulate(x, dx)

    return _record(data, (x,), backward, "upsample_nearest")


def layer_norm(x: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along ``axis``.

    Learnable scale and shift are composed by callers as ``y * gamma + beta``
    so their gradients flow through the usual elementwise ops.
    """
    if x.data.shape[axis] < 1:
        raise ArgumentError(f"layer_norm axis extent must be >= 1 on shape {x.data.shape}")
    mu = x.data.mean(axis=axis, keepdims=True)
    var = x.data.var(axis=axis, keepdims=True)
    sigma = np.sqrt(var + eps)
    y = (x.data - mu) / sigma

    def backward(g):
        gm = g.mean(axis=axis, keepdims=True)
        gym = (g * y).mean(axis=axis, keepdims=True)
        _accumulate(x, (g - gm - y * gym) / sigma)

    return _record(y, (x,), backward, "layer_norm")


def dropout(x: Tensor, rate: float, mode: str, rng: Rng | None = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ArgumentError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ArgumentError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ArgumentError("dropout in train mode needs an Rng")
    keep = (rng.uniform(size=x.data.shape) >= rate)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.data.dtype)
    factor = keep * scale

    def backward(g):
        _accumulate(x, g * factor)

    return _record(x.data * factor, (x,), backward, "dropout")


def sgd_step(param: Tensor, grad, lr: float):
    """In-place SGD update: param <- param - lr * grad."""
    g = grad.data if isinstance(grad, Tensor) else np.asarray(grad)
    if g.shape != param.data.shape:
        raise DimensionError(f"sgd_step shape mismatch: param {param.data.shape} vs grad {g.shape}")
    param.data -= np.asarray(lr, dtype=param.data.dtype) * g.astype(param.data.dtype, copy=False)
