"""Reverse-mode autodiff over float64 numpy arrays.

Minimal tape: each Tensor remembers its parents and a closure that
scatters the upstream gradient to them. backward() toposorts from the
loss and runs closures in reverse order. Only nodes reachable from a
requires_grad leaf participate; everything else is treated as constant.

Sparse matrices enter only as constants on the left of spmm; gradients
flow to the dense operand. Every forward output is checked finite so a
NaN surfaces where it is born, not three layers later.
"""

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError

CHECK_FINITE = True


def _as_value(v):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
    return arr


def _check(value, op):
    if CHECK_FINITE and not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite value produced by {op}")
    return value


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "parents", "_backward", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward=None, name=None):
        self.value = _as_value(value)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        """Python float of a single-element tensor."""
        if self.value.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return self.value.item()

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, grad={'yes' if self.requires_grad else 'no'})"


def tensor(value, requires_grad=False, name=None):
    return Tensor(value, requires_grad=requires_grad, name=name)


def constant(value, name=None):
    return Tensor(value, requires_grad=False, name=name)


def _result(value, parents, backward, op):
    req = any(p.requires_grad for p in parents)
    return Tensor(_check(value, op), requires_grad=req,
                  parents=tuple(parents) if req else (),
                  backward=backward if req else None)


def _acc(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


class SparseMatrix:
    """Immutable CSR constant for sparse x dense products."""

    def __init__(self, a):
        m = sp.csr_matrix(a, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        if not np.all(np.isfinite(m.data)):
            raise NumericalError("sparse matrix has non-finite entries")
        self._m = m
        self._mt = None

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self):
        return self._m.nnz

    @property
    def scipy(self):
        return self._m

    @property
    def T_scipy(self):
        if self._mt is None:
            self._mt = self._m.T.tocsr()
        return self._mt

    def to_dense(self):
        return self._m.toarray()

    @classmethod
    def from_dense(cls, x):
        return cls(sp.csr_matrix(np.asarray(x, dtype=np.float64)))


# ---------------------------------------------------------------------------
# primitives

def matmul(a, b):
    value = a.value @ b.value

    def bw(g):
        _acc(a, g @ b.value.T)
        _acc(b, a.value.T @ g)
    return _result(value, (a, b), bw, "matmul")


def spmm(a, x):
    """Sparse constant times dense tensor; gradient flows to the dense side."""
    if not isinstance(a, SparseMatrix):
        a = SparseMatrix(a)
    value = a.scipy @ x.value

    def bw(g):
        _acc(x, a.T_scipy @ g)
    return _result(value, (x,), bw, "spmm")


def add(a, b):
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")
    value = a.value + b.value

    def bw(g):
        _acc(a, g)
        _acc(b, g)
    return _result(value, (a, b), bw, "add")


def sub(a, b):
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch {a.shape} vs {b.shape}")
    value = a.value - b.value

    def bw(g):
        _acc(a, g)
        _acc(b, -g)
    return _result(value, (a, b), bw, "sub")


def scale(a, c):
    """Multiply by a python float constant."""
    c = float(c)
    value = a.value * c

    def bw(g):
        _acc(a, g * c)
    return _result(value, (a,), bw, "scale")


def hadamard(a, b):
    if a.shape != b.shape:
        raise ValueError(f"hadamard shape mismatch {a.shape} vs {b.shape}")
    value = a.value * b.value

    def bw(g):
        _acc(a, g * b.value)
        _acc(b, g * a.value)
    return _result(value, (a, b), bw, "hadamard")


def row_scale(alpha, z):
    """diag(alpha) @ Z for an N x 1 alpha column."""
    if alpha.shape != (z.shape[0], 1):
        raise ValueError(f"row_scale needs ({z.shape[0]}, 1) alpha, got {alpha.shape}")
    value = alpha.value * z.value

    def bw(g):
        _acc(alpha, (g * z.value).sum(axis=1, keepdims=True))
        _acc(z, g * alpha.value)
    return _result(value, (alpha, z), bw, "row_scale")


def scalar_scale(a, s):
    """Multiply by a 1 x 1 tensor scalar."""
    if s.shape != (1, 1):
        raise ValueError(f"scalar_scale needs a 1x1 tensor, got {s.shape}")
    value = a.value * s.value

    def bw(g):
        _acc(a, g * s.value)
        _acc(s, np.array([[float(np.sum(g * a.value))]]))
    return _result(value, (a, s), bw, "scalar_scale")


def add_bias(z, b):
    """Row-broadcast 1 x d bias."""
    if b.shape != (1, z.shape[1]):
        raise ValueError(f"bias must be (1, {z.shape[1]}), got {b.shape}")
    value = z.value + b.value

    def bw(g):
        _acc(z, g)
        _acc(b, g.sum(axis=0, keepdims=True))
    return _result(value, (z, b), bw, "add_bias")


def relu(a):
    value = np.maximum(a.value, 0.0)

    def bw(g):
        _acc(a, g * (a.value > 0))
    return _result(value, (a,), bw, "relu")


def sigmoid(a):
    # two-branch form so exp never sees a large positive argument
    x = a.value
    neg = x < 0.0
    e = np.exp(np.where(neg, x, -x))
    value = np.where(neg, e / (1.0 + e), 1.0 / (1.0 + e))

    def bw(g):
        _acc(a, g * value * (1.0 - value))
    return _result(value, (a,), bw, "sigmoid")


def row_softmax(a):
    if a.shape[1] == 0:
        raise ValueError("softmax over an empty row")
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        inner = (g * value).sum(axis=1, keepdims=True)
        _acc(a, value * (g - inner))
    return _result(value, (a,), bw, "row_softmax")


def log(a):
    if np.any(a.value <= 0):
        raise NumericalError("log requires strictly positive input")
    value = np.log(a.value)

    def bw(g):
        _acc(a, g / a.value)
    return _result(value, (a,), bw, "log")


def concat_cols(tensors):
    tensors = list(tensors)
    n = tensors[0].shape[0]
    for t in tensors:
        if t.shape[0] != n:
            raise ValueError("concat_cols requires equal row counts")
    value = np.concatenate([t.value for t in tensors], axis=1)
    widths = [t.shape[1] for t in tensors]
    offsets = np.cumsum([0] + widths)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _acc(t, g[:, lo:hi])
    return _result(value, tuple(tensors), bw, "concat_cols")


def slice_cols(a, start, stop):
    value = a.value[:, start:stop]

    def bw(g):
        buf = np.zeros_like(a.value)
        buf[:, start:stop] = g
        _acc(a, buf)
    return _result(value, (a,), bw, "slice_cols")


def gather_rows(a, idx):
    idx = np.asarray(idx, dtype=np.int64)
    value = a.value[idx]

    def bw(g):
        buf = np.zeros_like(a.value)
        np.add.at(buf, idx, g)
        _acc(a, buf)
    return _result(value, (a,), bw, "gather_rows")


def l1_row_normalize(a):
    """Rows scaled to unit L1 mass; zero-mass rows stay zero (zero gradient)."""
    mass = np.abs(a.value).sum(axis=1, keepdims=True)
    nonzero = mass != 0
    safe = np.where(nonzero, mass, 1.0)
    value = np.where(nonzero, a.value / safe, 0.0)

    def bw(g):
        inner = (g * a.value).sum(axis=1, keepdims=True)
        grad = g / safe - np.sign(a.value) * inner / (safe * safe)
        _acc(a, np.where(nonzero, grad, 0.0))
    return _result(value, (a,), bw, "l1_row_normalize")


def cosine(u, v):
    """Cosine similarity of two 1 x d tensors; 0 with zero gradient if either is zero."""
    if u.shape != v.shape or u.shape[0] != 1:
        raise ValueError(f"cosine expects matching 1 x d tensors, got {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u.value))
    nv = float(np.linalg.norm(v.value))
    if nu == 0.0 or nv == 0.0:
        return _result(np.array([[0.0]]), (u, v), lambda g: None, "cosine")
    dot = (u.value @ v.value.T).item()
    c = dot / (nu * nv)

    def bw(g):
        gs = g.item()
        _acc(u, gs * (v.value / (nu * nv) - c * u.value / (nu * nu)))
        _acc(v, gs * (u.value / (nu * nv) - c * v.value / (nv * nv)))
    return _result(np.array([[c]]), (u, v), bw, "cosine")


def dropout(a, rate, rng=None, train=True, mask=None):
    """Inverted dropout: kept entries scale by 1/(1-rate); eval mode is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return a
    if mask is None:
        if rng is None:
            raise ValueError("dropout in train mode needs an rng (or explicit mask)")
        mask = (rng.random(a.shape) >= rate)
    keep = mask.astype(np.float64) / (1.0 - rate)
    value = a.value * keep

    def bw(g):
        _acc(a, g * keep)
    return _result(value, (a,), bw, "dropout")


def masked_cross_entropy(logits, labels, idx):
    """Mean softmax cross-entropy over the rows in idx."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cross-entropy over an empty index set")
    labels = np.asarray(labels, dtype=np.int64)[idx]
    rows = logits.value[idx]
    shifted = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + rows.max(axis=1, keepdims=True)
    picked = rows[np.arange(len(idx)), labels][:, None]
    value = np.array([[float(np.mean(lse - picked))]])

    def bw(g):
        gs = g.item()
        soft = np.exp(rows - lse)
        soft[np.arange(len(idx)), labels] -= 1.0
        buf = np.zeros_like(logits.value)
        np.add.at(buf, idx, soft * (gs / len(idx)))
        _acc(logits, buf)
    return _result(value, (logits,), bw, "masked_cross_entropy")


def tsum(a):
    value = np.array([[float(a.value.sum())]])

    def bw(g):
        _acc(a, np.full_like(a.value, g.item()))
    return _result(value, (a,), bw, "sum")


def tmean(a):
    n = a.value.size
    value = np.array([[float(a.value.mean())]])

    def bw(g):
        _acc(a, np.full_like(a.value, g.item() / n))
    return _result(value, (a,), bw, "mean")


# ---------------------------------------------------------------------------
# backward pass

def backward(loss):
    """Populate .grad on every requires_grad node reachable from `loss`."""
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params):
    for t in (params.values() if isinstance(params, dict) else params):
        t.grad = None


def grad_of(param):
    """Gradient array, zeros if the parameter never entered the graph."""
    return np.zeros_like(param.value) if param.grad is None else param.grad


def glorot(rng, shape):
    """Glorot-uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-a, a, size=shape)
