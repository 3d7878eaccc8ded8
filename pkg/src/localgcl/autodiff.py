"""Minimal define-by-run reverse-mode autodiff over dense 2-D float64 arrays.

Every value lives on a :class:`Tape`. Primitives append a node holding the
forward value and a closure mapping the output adjoint to the parents'
adjoints. Because nodes are appended after their parents, the tape order is
already topological and :meth:`Tape.backward` simply walks it in reverse.

The closed primitive set is ``matmul, add, mul, scale, relu, exp, log,
sum_all, mean_all, row_l2_normalize, concat_rows, segment_sum, gather_rows,
transpose``. Everything else in the package is composed from these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import NotScalarError, ShapeError

NORM_FLOOR = 1e-12


class DiffArray:
    """A 2-D array recorded on a tape."""

    __slots__ = ("value", "tape", "node_id", "parents", "backward_fn", "requires_grad", "name")
    __array_ufunc__ = None  # ndarray <op> DiffArray defers to the reflected method

    def __init__(self, value, tape, node_id, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.value = value
        self.tape = tape
        self.node_id = node_id
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def T(self) -> "DiffArray":
        return transpose(self)

    def item(self) -> float:
        return float(self.value[0, 0])

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"DiffArray{tag}(shape={self.shape}, id={self.node_id})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        if np.isscalar(other):
            return add(self, np.full(self.shape, float(other)))
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        if np.isscalar(other):
            return add(self, np.full(self.shape, -float(other)))
        if isinstance(other, DiffArray):
            return add(self, scale(other, -1.0))
        return add(self, -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return scale(self, 1.0 / float(other))
        return NotImplemented


class Tape:
    """Recording context (the gradient tape).

    Confined to one thread. ``check_finite=True`` raises ``FloatingPointError``
    as soon as a primitive produces a NaN or infinity.
    """

    def __init__(self, check_finite: bool = False):
        self.nodes: list[DiffArray] = []
        self.check_finite = check_finite

    def __len__(self):
        return len(self.nodes)

    def _push(self, value, parents=(), backward_fn=None, requires_grad=False, name=None) -> DiffArray:
        if value.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {value.shape}")
        if self.check_finite and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite value produced ({name or 'intermediate'})")
        node = DiffArray(value, self, len(self.nodes), parents, backward_fn, requires_grad, name)
        self.nodes.append(node)
        return node

    def leaf(self, value, name: str | None = None) -> DiffArray:
        """A differentiable input (parameter)."""
        v = np.array(value, dtype=np.float64, copy=True)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        return self._push(v, requires_grad=True, name=name)

    def constant(self, value, name: str | None = None) -> DiffArray:
        v = np.asarray(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        return self._push(v, name=name)

    def leaves(self) -> list[DiffArray]:
        return [n for n in self.nodes if n.requires_grad and not n.parents]

    def backward(self, output: DiffArray) -> dict[DiffArray, np.ndarray]:
        """Gradients of the scalar ``output`` w.r.t. every leaf on this tape.

        Leaves that do not influence ``output`` get zero arrays.
        """
        if output.tape is not self:
            raise ValueError("output was not recorded on this tape")
        if output.shape != (1, 1):
            raise NotScalarError(f"backward needs a (1, 1) output, got {output.shape}")
        adj: dict[int, np.ndarray] = {output.node_id: np.ones((1, 1))}
        for node in reversed(self.nodes[: output.node_id + 1]):
            g = adj.pop(node.node_id, None)
            if g is None or node.backward_fn is None:
                if g is not None:
                    adj[node.node_id] = g  # keep leaf adjoints
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = adj.get(parent.node_id)
                adj[parent.node_id] = pg if prev is None else prev + pg
        return {
            leaf: adj.get(leaf.node_id, np.zeros(leaf.shape))
            for leaf in self.leaves()
        }


def backward(output: DiffArray, ctx: Tape | None = None) -> dict[DiffArray, np.ndarray]:
    return (ctx or output.tape).backward(output)


def _lift(x, tape: Tape) -> DiffArray:
    if isinstance(x, DiffArray):
        if x.tape is not tape:
            raise ValueError("operands recorded on different tapes")
        return x
    return tape.constant(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, DiffArray):
            return x.tape
    raise TypeError("at least one operand must be a DiffArray")


def _op(tape: Tape, value, parents, backward_fn) -> DiffArray:
    rg = any(p.requires_grad for p in parents)
    return tape._push(value, parents, backward_fn if rg else None, rg)


def matmul(a, b) -> DiffArray:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _op(tape, av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a, b) -> DiffArray:
    """Elementwise sum; ``b`` may be a ``(1, cols)`` row broadcast over ``a``."""
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    if a.shape == b.shape:
        return _op(tape, a.value + b.value, (a, b), lambda g: (g, g))
    if b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        return _op(tape, a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))
    if a.shape[0] == 1 and a.shape[1] == b.shape[1]:
        return _op(tape, a.value + b.value, (a, b), lambda g: (g.sum(axis=0, keepdims=True), g))
    raise ShapeError(f"add: {a.shape} + {b.shape}")


def mul(a, b) -> DiffArray:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    if a.shape != b.shape:
        raise ShapeError(f"mul: {a.shape} * {b.shape}")
    av, bv = a.value, b.value
    return _op(tape, av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: DiffArray, c: float) -> DiffArray:
    c = float(c)
    return _op(a.tape, a.value * c, (a,), lambda g: (g * c,))


def relu(a: DiffArray) -> DiffArray:
    mask = a.value > 0
    return _op(a.tape, np.maximum(a.value, 0.0), (a,), lambda g: (g * mask,))


def exp(a: DiffArray) -> DiffArray:
    out = np.exp(a.value)
    return _op(a.tape, out, (a,), lambda g: (g * out,))


def log(a: DiffArray) -> DiffArray:
    av = a.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)
    return _op(a.tape, out, (a,), lambda g: (g / av,))


def sum_all(a: DiffArray) -> DiffArray:
    shape = a.shape
    return _op(a.tape, np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def mean_all(a: DiffArray) -> DiffArray:
    shape = a.shape
    n = a.value.size
    return _op(a.tape, np.array([[a.value.mean()]]), (a,), lambda g: (np.full(shape, g[0, 0] / n),))


def row_l2_normalize(a: DiffArray) -> DiffArray:
    """``x / ||x||`` per row; rows with norm below ``1e-12`` map to zero (zero gradient)."""
    x = a.value
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    ok = norm >= NORM_FLOOR
    safe = np.where(ok, norm, 1.0)
    y = np.where(ok, x / safe, 0.0)

    def bw(g):
        # J = (I - y y^T) / ||x||
        proj = (g * y).sum(axis=1, keepdims=True)
        return (np.where(ok, (g - y * proj) / safe, 0.0),)

    return _op(a.tape, y, (a,), bw)


def concat_rows(parts: Sequence) -> DiffArray:
    tape = _tape_of(*parts)
    parts = [_lift(p, tape) for p in parts]
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    value = np.concatenate([p.value for p in parts], axis=0)
    return _op(tape, value, tuple(parts),
               lambda g: tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts))))


def _segment_matrix(sorted_ids: np.ndarray, columns: np.ndarray, num_segments: int) -> sp.csr_matrix:
    """0/1 matrix whose row ``s`` selects ``columns[k]`` for every ``sorted_ids[k] == s``."""
    indptr = np.zeros(num_segments + 1, dtype=np.int64)
    np.cumsum(np.bincount(sorted_ids, minlength=num_segments), out=indptr[1:])
    return sp.csr_matrix((np.ones(len(columns)), columns, indptr), shape=(num_segments, len(columns)))


def segment_sum(a: DiffArray, segments, num_segments: int) -> DiffArray:
    """Sum rows sharing a segment id; ``segments`` must be sorted non-decreasing."""
    seg = np.asarray(segments, dtype=np.int64)
    if seg.ndim != 1 or len(seg) != a.shape[0]:
        raise ShapeError(f"segment_sum: {len(seg)} segment ids for {a.shape[0]} rows")
    if len(seg):
        if np.any(np.diff(seg) < 0):
            raise ValueError("segment_sum: segments must be sorted non-decreasing")
        if seg[0] < 0 or seg[-1] >= num_segments:
            raise ShapeError("segment_sum: segment id out of range")
    out = _segment_matrix(seg, np.arange(len(seg)), num_segments) @ a.value
    return _op(a.tape, out, (a,), lambda g: (g[seg],))


def gather_rows(a: DiffArray, indices) -> DiffArray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows: indices must be 1-D")
    if len(idx) and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.shape[0]} rows")
    rows = a.shape[0]

    def bw(g):
        out = np.zeros((rows, g.shape[1]))
        if len(idx) == 0:
            return (out,)
        pos = np.where(idx < 0, idx + rows, idx)
        if np.all(np.diff(pos) > 0):
            out[pos] = g
            return (out,)
        order = np.argsort(pos, kind="stable")
        return (_segment_matrix(pos[order], order, rows) @ g,)

    return _op(a.tape, a.value[idx], (a,), bw)


def transpose(a: DiffArray) -> DiffArray:
    return _op(a.tape, a.value.T.copy(), (a,), lambda g: (g.T,))


PRIMITIVES: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "scale": scale,
    "relu": relu,
    "exp": exp,
    "log": log,
    "sum_all": sum_all,
    "mean_all": mean_all,
    "row_l2_normalize": row_l2_normalize,
    "concat_rows": concat_rows,
    "segment_sum": segment_sum,
    "gather_rows": gather_rows,
    "transpose": transpose,
}


def broadcast_scalar(s: DiffArray, rows: int, cols: int) -> DiffArray:
    """Tile a ``(1, 1)`` array to ``(rows, cols)`` using two matmuls."""
    if s.shape != (1, 1):
        raise ShapeError(f"broadcast_scalar needs a (1, 1) array, got {s.shape}")
    return matmul(matmul(np.ones((rows, 1)), s), np.ones((1, cols)))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """One bias-corrected Adam update. Returns ``(new_params, state)``; ``state`` is updated in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    new = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"adam_step: grad {g.shape} vs param {p.shape} for {k!r}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        new[k] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, state


def numeric_gradient(fn: Callable[[list[np.ndarray]], float], values: list[np.ndarray],
                     h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of the scalar ``fn(values)`` w.r.t. every entry."""
    values = [np.array(v, dtype=np.float64) for v in values]
    out = []
    for v in values:
        g = np.zeros_like(v)
        for ix in np.ndindex(v.shape):
            old = v[ix]
            v[ix] = old + h
            up = fn(values)
            v[ix] = old - h
            down = fn(values)
            v[ix] = old
            g[ix] = (up - down) / (2 * h)
        out.append(g)
    return out


def gradient_check(build: Callable[..., DiffArray], values: list[np.ndarray],
                   h: float = 1e-5) -> list[float]:
    """Relative error ``|a - n| / max(|a|, |n|, 1e-8)`` (Frobenius norms) per input.

    ``build(*leaves)`` must return a scalar built from the leaves with tape ops.
    """
    tape = Tape()
    leaves = [tape.leaf(v) for v in values]
    grads = tape.backward(build(*leaves))
    analytic = [grads[leaf] for leaf in leaves]

    def f(vs):
        t = Tape()
        return build(*[t.leaf(v) for v in vs]).item()

    numeric = numeric_gradient(f, values, h)
    errs = []
    for a, n in zip(analytic, numeric):
        scale_ = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
        errs.append(float(np.linalg.norm(a - n) / scale_))
    return errs
