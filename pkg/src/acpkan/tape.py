"""Reverse-mode automatic differentiation on a dynamic tape.

The tape records a computation graph as it is built: every operation
appends one node holding its op kind, parent ids and the local partial
derivatives evaluated at record time.  Node ids are dense and parents
always precede children, so a single reverse sweep in descending id
order propagates adjoints to the parameter leaves.

Node values are float64 scalars or numpy float64 arrays with elementwise
semantics.  A scalar graph behaves exactly like a textbook scalar tape;
array-valued nodes let a whole batch of collocation points share one
graph, which is what makes CPU training of the PDE benchmarks feasible.
Binary ops follow numpy broadcasting; the reverse sweep sums adjoints
back over broadcast axes, so gradients are shape-correct either way.

A tape is single-owner: it must not be mutated from two execution
contexts at once.  Rebuilding the same graph with the same inputs yields
bit-identical values and adjoints.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DomainError",
    "Tape",
    "Var",
    "leaf",
    "var_binary",
    "var_unary",
    "affine",
    "matmul",
    "transpose2",
    "reshape",
    "concat2",
    "take_index",
    "sum_axis",
    "sum_all",
    "wsum",
    "backward",
    "grad_check",
]


class DomainError(ValueError):
    """An operation was evaluated outside its mathematical domain."""


_BINARY_KINDS = ("add", "sub", "mul", "div")
_UNARY_KINDS = ("tanh", "sin", "cos", "exp", "neg", "square", "sqrt", "ln", "abs", "recip", "sign")


def _as_value(x):
    a = np.asarray(x, dtype=np.float64)
    return a


class Tape:
    """Append-only record of a computation graph.

    Parallel lists keep per-node data compact: ``kinds[i]``,
    ``parents[i]`` (a tuple of at most two ids for arithmetic ops),
    ``partials[i]`` (op-specific data captured at record time) and
    ``values[i]``.  Parameter leaves are enumerated in ``param_ids`` in
    registration order; that order defines the gradient vector layout.
    """

    def __init__(self):
        self.kinds: list[str] = []
        self.parents: list[tuple] = []
        self.partials: list = []
        self.values: list = []
        self.param_ids: list[int] = []

    def __len__(self):
        return len(self.values)

    def _append(self, kind, parents, partial, value) -> "Var":
        self.kinds.append(kind)
        self.parents.append(parents)
        self.partials.append(partial)
        self.values.append(value)
        return Var(self, len(self.values) - 1)

    def value(self, i: int):
        return self.values[i]

    @property
    def param_count(self) -> int:
        """Total number of scalar parameters registered so far."""
        return sum(self.values[i].size for i in self.param_ids)


class Var:
    """Handle to one tape node."""

    __slots__ = ("tape", "id")

    def __init__(self, tape: Tape, id: int):
        self.tape = tape
        self.id = id

    @property
    def value(self):
        v = self.tape.values[self.id]
        return float(v) if v.ndim == 0 else v

    @property
    def shape(self):
        return self.tape.values[self.id].shape

    def __repr__(self):
        return f"Var(id={self.id}, value={self.value!r})"

    # Arithmetic sugar.  Var op Var records a binary node; Var op float
    # records a single affine node (y = a*x + b), which keeps graphs small.
    def __add__(self, other):
        if isinstance(other, Var):
            return var_binary("add", self, other)
        return affine(self, 1.0, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return var_binary("sub", self, other)
        return affine(self, 1.0, -float(other))

    def __rsub__(self, other):
        return affine(self, -1.0, float(other))

    def __mul__(self, other):
        if isinstance(other, Var):
            return var_binary("mul", self, other)
        return affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return var_binary("div", self, other)
        return affine(self, 1.0 / float(other), 0.0)

    def __neg__(self):
        return affine(self, -1.0, 0.0)


def leaf(tape: Tape, value, is_parameter: bool = False) -> Var:
    """Append a parentless node holding ``value``.

    Parameter leaves are enumerated in gradient-vector order; constant
    leaves never receive adjoints.
    """
    v = tape._append("leaf", (), None, _as_value(value))
    if is_parameter:
        tape.param_ids.append(v.id)
    return v


def _same_tape(a: Var, b: Var):
    if a.tape is not b.tape:
        raise ValueError("operands recorded on different tapes")
    return a.tape


def var_binary(kind: str, a: Var, b: Var) -> Var:
    """Record an elementwise binary op (add, sub, mul, div)."""
    t = _same_tape(a, b)
    av = t.values[a.id]
    bv = t.values[b.id]
    if kind == "add":
        return t._append("add", (a.id, b.id), None, av + bv)
    if kind == "sub":
        return t._append("sub", (a.id, b.id), None, av - bv)
    if kind == "mul":
        return t._append("mul", (a.id, b.id), (bv, av), av * bv)
    if kind == "div":
        if np.any(bv == 0.0):
            raise DomainError("div: division by zero")
        inv = 1.0 / bv
        return t._append("div", (a.id, b.id), (inv, -av * inv * inv), av * inv)
    raise ValueError(f"unknown binary op kind {kind!r}")


def var_unary(kind: str, a: Var) -> Var:
    """Record an elementwise unary op; the local partial is f'(value)."""
    t = a.tape
    av = t.values[a.id]
    if kind == "tanh":
        y = np.tanh(av)
        return t._append(kind, (a.id,), 1.0 - y * y, y)
    if kind == "sin":
        return t._append(kind, (a.id,), np.cos(av), np.sin(av))
    if kind == "cos":
        return t._append(kind, (a.id,), -np.sin(av), np.cos(av))
    if kind == "exp":
        y = np.exp(av)
        return t._append(kind, (a.id,), y, y)
    if kind == "neg":
        return t._append(kind, (a.id,), None, -av)
    if kind == "square":
        return t._append(kind, (a.id,), 2.0 * av, av * av)
    if kind == "sqrt":
        if np.any(av <= 0.0):
            raise DomainError("sqrt: argument must be positive")
        y = np.sqrt(av)
        return t._append(kind, (a.id,), 0.5 / y, y)
    if kind == "ln":
        if np.any(av <= 0.0):
            raise DomainError("ln: argument must be positive")
        return t._append(kind, (a.id,), 1.0 / av, np.log(av))
    if kind == "abs":
        # Subgradient choice: derivative 0 at 0.
        return t._append(kind, (a.id,), np.sign(av), np.abs(av))
    if kind == "recip":
        if np.any(av == 0.0):
            raise DomainError("recip: division by zero")
        y = 1.0 / av
        return t._append(kind, (a.id,), -y * y, y)
    if kind == "sign":
        return t._append(kind, (a.id,), np.zeros_like(av), np.sign(av))
    raise ValueError(f"unknown unary op kind {kind!r}")


def affine(x: Var, a: float, b: float) -> Var:
    """y = a*x + b with plain-number coefficients (partial is a)."""
    t = x.tape
    return t._append("affine", (x.id,), a, a * t.values[x.id] + b)


def matmul(a: Var, b: Var) -> Var:
    """Matrix product of two 2-D nodes."""
    t = _same_tape(a, b)
    av = t.values[a.id]
    bv = t.values[b.id]
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    return t._append("matmul", (a.id, b.id), (av, bv), av @ bv)


def transpose2(a: Var) -> Var:
    t = a.tape
    return t._append("transpose2", (a.id,), None, t.values[a.id].T)


def reshape(a: Var, shape) -> Var:
    t = a.tape
    v = t.values[a.id]
    return t._append("reshape", (a.id,), v.shape, v.reshape(shape))


def concat2(a: Var, b: Var, axis: int = 0) -> Var:
    t = _same_tape(a, b)
    av, bv = t.values[a.id], t.values[b.id]
    return t._append("concat2", (a.id, b.id), (axis, av.shape[axis]), np.concatenate((av, bv), axis=axis))


def take_index(a: Var, index: int, axis: int) -> Var:
    """Select one slice along ``axis`` (used for per-degree coefficient planes)."""
    t = a.tape
    v = t.values[a.id]
    return t._append("take", (a.id,), (index, axis, v.shape), np.take(v, index, axis=axis))


def sum_axis(a: Var, axis: int) -> Var:
    """Sum over one axis, keeping it as size 1."""
    t = a.tape
    v = t.values[a.id]
    return t._append("sum_axis", (a.id,), (axis, v.shape), v.sum(axis=axis, keepdims=True))


def sum_all(a: Var) -> Var:
    """Sum of every element, as a scalar node."""
    t = a.tape
    v = t.values[a.id]
    return t._append("sum_all", (a.id,), v.shape, np.asarray(v.sum()))


def wsum(a: Var, weights: np.ndarray) -> Var:
    """Weighted sum with constant weights; no gradient flows into ``weights``."""
    t = a.tape
    v = t.values[a.id]
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != v.shape:
        raise ValueError(f"wsum shape mismatch: {w.shape} vs {v.shape}")
    return t._append("wsum", (a.id,), w, np.asarray((w * v).sum()))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape``, inverting numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ts) in enumerate(zip(g.shape, shape)) if ts == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(tape: Tape, loss: Var) -> np.ndarray:
    """Single reverse sweep from ``loss``; returns the gradient vector.

    The result is the adjoint of every parameter leaf, flattened and
    concatenated in registration order (length = scalar parameter
    count).  Adjoints of non-parameter leaves are discarded.  Nodes
    outside the loss's ancestry are skipped, so several losses recorded
    on one tape can each be swept at the cost of their own subgraph.
    """
    if loss.tape is not tape:
        raise ValueError("loss does not live on this tape")
    lv = tape.values[loss.id]
    if lv.ndim != 0:
        raise ValueError("backward expects a scalar loss node")

    values = tape.values
    kinds = tape.kinds
    parents = tape.parents
    partials = tape.partials
    adj: list = [None] * (loss.id + 1)
    adj[loss.id] = np.ones((), dtype=np.float64)

    def acc(i, g):
        a = adj[i]
        adj[i] = g if a is None else a + g

    for i in range(loss.id, -1, -1):
        g = adj[i]
        if g is None:
            continue
        kind = kinds[i]
        if kind == "leaf":
            continue
        p = parents[i]
        if kind == "add":
            acc(p[0], _unbroadcast(g, values[p[0]].shape))
            acc(p[1], _unbroadcast(g, values[p[1]].shape))
        elif kind == "sub":
            acc(p[0], _unbroadcast(g, values[p[0]].shape))
            acc(p[1], _unbroadcast(-g, values[p[1]].shape))
        elif kind == "mul":
            pa, pb = partials[i]
            acc(p[0], _unbroadcast(g * pa, values[p[0]].shape))
            acc(p[1], _unbroadcast(g * pb, values[p[1]].shape))
        elif kind == "div":
            pa, pb = partials[i]
            acc(p[0], _unbroadcast(g * pa, values[p[0]].shape))
            acc(p[1], _unbroadcast(g * pb, values[p[1]].shape))
        elif kind == "affine":
            acc(p[0], g * partials[i] if partials[i] != 1.0 else g)
        elif kind == "matmul":
            av, bv = partials[i]
            acc(p[0], g @ bv.T)
            acc(p[1], av.T @ g)
        elif kind == "neg":
            acc(p[0], -g)
        elif kind == "transpose2":
            acc(p[0], g.T)
        elif kind == "reshape":
            acc(p[0], g.reshape(partials[i]))
        elif kind == "concat2":
            axis, n0 = partials[i]
            sl0 = [slice(None)] * g.ndim
            sl0[axis] = slice(0, n0)
            sl1 = [slice(None)] * g.ndim
            sl1[axis] = slice(n0, None)
            acc(p[0], g[tuple(sl0)])
            acc(p[1], g[tuple(sl1)])
        elif kind == "take":
            index, axis, shape = partials[i]
            full = np.zeros(shape, dtype=np.float64)
            sl = [slice(None)] * len(shape)
            sl[axis] = index
            full[tuple(sl)] = g
            acc(p[0], full)
        elif kind == "sum_axis":
            axis, shape = partials[i]
            acc(p[0], np.broadcast_to(g, shape))
        elif kind == "sum_all":
            acc(p[0], np.broadcast_to(g, partials[i]))
        elif kind == "wsum":
            acc(p[0], g * partials[i])
        else:  # stored elementwise unary partial
            acc(p[0], g * partials[i])

    pieces = []
    for pid in tape.param_ids:
        a = adj[pid] if pid <= loss.id else None
        if a is None:
            pieces.append(np.zeros(values[pid].size, dtype=np.float64))
        else:
            pieces.append(np.asarray(a, dtype=np.float64).reshape(-1))
    if not pieces:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate(pieces)


def grad_check(fn, point, h: float = 1e-5) -> float:
    """Max relative error of reverse-mode adjoints vs central differences.

    ``fn(tape, vars) -> Var`` builds a scalar expression from one
    parameter leaf per coordinate of ``point``.  Relative error uses
    denominator max(|analytic|, 1).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    point = [float(p) for p in point]

    def evaluate(coords):
        t = Tape()
        vs = [leaf(t, c, is_parameter=True) for c in coords]
        out = fn(t, vs)
        return t, out

    t, out = evaluate(point)
    analytic = backward(t, out)

    worst = 0.0
    for i in range(len(point)):
        plus = list(point)
        minus = list(point)
        plus[i] += h
        minus[i] -= h
        _, op = evaluate(plus)
        _, om = evaluate(minus)
        numeric = (float(op.value) - float(om.value)) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), 1.0)
        worst = max(worst, err)
    return worst
