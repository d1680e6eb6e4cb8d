"""Truncated second-order Taylor objects ("jets") over tape variables.

A jet tracks a quantity's value together with its first and second
derivatives with respect to a small set of seed inputs (the PDE
coordinates).  Every component is itself a tape variable, so a PDE
residual assembled from jet components stays differentiable with
respect to the network parameters: one reverse sweep through the tape
gives parameter gradients of expressions containing u_x, u_t, u_xx, ...

Storage is the upper triangle of the Hessian only; symmetry holds by
construction.  ``hess`` may be None for first-order jets and ``grad``
may be empty for order-0 jets (plain values): all arithmetic degrades
gracefully, which the training loop uses to skip derivative work that a
given problem never consumes.
"""

from __future__ import annotations

from . import tape as tp
from .tape import Tape, Var

__all__ = [
    "Jet",
    "hess_size",
    "hess_index",
    "jet_input",
    "jet_broadcast",
    "jet_add",
    "jet_sub",
    "jet_affine",
    "jet_scale",
    "jet_mul",
    "jet_div",
    "jet_unary",
    "jet_binary",
]

import numpy as np


def hess_size(d: int) -> int:
    return d * (d + 1) // 2


def hess_index(i: int, j: int, d: int) -> int:
    """Flat index of the (i, j) upper-triangular Hessian slot."""
    if i > j:
        i, j = j, i
    return i * d - (i * (i - 1)) // 2 + (j - i)


class Jet:
    """Value plus derivative components, each a tape variable.

    ``dim`` counts the seed inputs.  ``grad`` holds one variable per
    seed (empty list for order 0); ``hess`` holds the upper triangle in
    row order (None for order < 2).
    """

    __slots__ = ("dim", "val", "grad", "hess")

    def __init__(self, dim: int, val: Var, grad: list, hess):
        self.dim = dim
        self.val = val
        self.grad = grad
        self.hess = hess

    @property
    def order(self) -> int:
        if self.hess is not None:
            return 2
        return 1 if self.grad else 0

    def d2(self, i: int, j: int) -> Var:
        """Second-derivative component with respect to seeds i and j."""
        return self.hess[hess_index(i, j, self.dim)]

    def components(self) -> list:
        return [self.val, *self.grad, *(self.hess or [])]


def _pairs(d: int):
    return [(i, j) for i in range(d) for j in range(i, d)]


def jet_input(t: Tape, value, index: int, dim: int, order: int = 2) -> Jet:
    """Seed one PDE coordinate: grad[index] is exactly one, the rest zero."""
    if not 0 <= index < dim:
        raise IndexError(f"seed index {index} out of range for dim {dim}")
    v = np.asarray(value, dtype=np.float64)
    val = tp.leaf(t, v)
    grad = []
    if order >= 1:
        one = np.ones_like(v) if v.ndim else 1.0
        zero = np.zeros_like(v) if v.ndim else 0.0
        grad = [tp.leaf(t, one if i == index else zero) for i in range(dim)]
    hess = None
    if order >= 2:
        zero = np.zeros_like(v) if v.ndim else 0.0
        hess = [tp.leaf(t, zero) for _ in range(hess_size(dim))]
    return Jet(dim, val, grad, hess)


def jet_broadcast(v: Var, dim: int, order: int = 2) -> Jet:
    """Lift a value that is constant in the seed inputs (zero derivatives)."""
    t = v.tape
    grad = [tp.leaf(t, 0.0) for _ in range(dim)] if order >= 1 else []
    hess = [tp.leaf(t, 0.0) for _ in range(hess_size(dim))] if order >= 2 else None
    return Jet(dim, v, grad, hess)


def _check_dims(a: Jet, b: Jet):
    if a.dim != b.dim:
        raise ValueError(f"jet dim mismatch: {a.dim} vs {b.dim}")


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_dims(a, b)
    grad = [ga + gb for ga, gb in zip(a.grad, b.grad)]
    hess = None
    if a.hess is not None and b.hess is not None:
        hess = [ha + hb for ha, hb in zip(a.hess, b.hess)]
    return Jet(a.dim, a.val + b.val, grad, hess)


def jet_sub(a: Jet, b: Jet) -> Jet:
    _check_dims(a, b)
    grad = [ga - gb for ga, gb in zip(a.grad, b.grad)]
    hess = None
    if a.hess is not None and b.hess is not None:
        hess = [ha - hb for ha, hb in zip(a.hess, b.hess)]
    return Jet(a.dim, a.val - b.val, grad, hess)


def jet_affine(a: Jet, scale: float, shift: float) -> Jet:
    """scale*jet + shift with plain-number coefficients."""
    val = tp.affine(a.val, scale, shift)
    if scale == 1.0:
        return Jet(a.dim, val, list(a.grad), list(a.hess) if a.hess is not None else None)
    grad = [tp.affine(g, scale, 0.0) for g in a.grad]
    hess = [tp.affine(h, scale, 0.0) for h in a.hess] if a.hess is not None else None
    return Jet(a.dim, val, grad, hess)


def jet_scale(a: Jet, w: Var) -> Jet:
    """Multiply by a variable that is constant in the seed inputs."""
    grad = [g * w for g in a.grad]
    hess = [h * w for h in a.hess] if a.hess is not None else None
    return Jet(a.dim, a.val * w, grad, hess)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Leibniz product: (ab)''_ij = a''_ij b + a'_i b'_j + a'_j b'_i + a b''_ij."""
    _check_dims(a, b)
    d = a.dim
    val = a.val * b.val
    grad = [a.grad[i] * b.val + a.val * b.grad[i] for i in range(len(a.grad))]
    hess = None
    if a.hess is not None and b.hess is not None:
        hess = []
        for i, j in _pairs(d):
            k = hess_index(i, j, d)
            cross = a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i]
            hess.append(a.hess[k] * b.val + cross + a.val * b.hess[k])
    return Jet(d, val, grad, hess)


def _unary_rule(kind: str, x: Var):
    """Return (f(x), f'(x), f''(x)); f'' may be a plain float."""
    if kind == "tanh":
        y = tp.var_unary("tanh", x)
        fp = tp.affine(tp.var_unary("square", y), -1.0, 1.0)
        fpp = tp.affine(y * fp, -2.0, 0.0)
        return y, fp, fpp
    if kind == "sin":
        y = tp.var_unary("sin", x)
        fp = tp.var_unary("cos", x)
        fpp = tp.affine(y, -1.0, 0.0)
        return y, fp, fpp
    if kind == "cos":
        y = tp.var_unary("cos", x)
        fp = tp.affine(tp.var_unary("sin", x), -1.0, 0.0)
        fpp = tp.affine(y, -1.0, 0.0)
        return y, fp, fpp
    if kind == "exp":
        y = tp.var_unary("exp", x)
        return y, y, y
    if kind == "neg":
        return tp.var_unary("neg", x), None, None  # handled via jet_affine
    if kind == "square":
        y = tp.var_unary("square", x)
        fp = tp.affine(x, 2.0, 0.0)
        return y, fp, 2.0
    if kind == "sqrt":
        y = tp.var_unary("sqrt", x)
        fp = tp.affine(tp.var_unary("recip", y), 0.5, 0.0)
        fpp = tp.affine(fp * tp.var_unary("recip", x), -0.5, 0.0)
        return y, fp, fpp
    if kind == "ln":
        y = tp.var_unary("ln", x)
        fp = tp.var_unary("recip", x)
        fpp = tp.affine(tp.var_unary("square", fp), -1.0, 0.0)
        return y, fp, fpp
    if kind == "abs":
        y = tp.var_unary("abs", x)
        fp = tp.var_unary("sign", x)
        return y, fp, 0.0
    if kind == "recip":
        y = tp.var_unary("recip", x)
        y2 = tp.var_unary("square", y)
        fp = tp.affine(y2, -1.0, 0.0)
        fpp = tp.affine(y2 * y, 2.0, 0.0)
        return y, fp, fpp
    raise ValueError(f"unknown unary jet kind {kind!r}")


def jet_unary(kind: str, a: Jet) -> Jet:
    """Chain rule through f: grad f'a', hess f'' a'_i a'_j + f' a''_ij.

    The f' and f'' factors are tape expressions of the jet's value, so
    parameter gradients flow through them as well.
    """
    if kind == "neg":
        return jet_affine(a, -1.0, 0.0)
    d = a.dim
    val, fp, fpp = _unary_rule(kind, a.val)
    grad = [fp * g for g in a.grad]
    hess = None
    if a.hess is not None:
        hess = []
        for i, j in _pairs(d):
            k = hess_index(i, j, d)
            gij = a.grad[i] * a.grad[j]
            first = gij * fpp if isinstance(fpp, Var) else tp.affine(gij, fpp, 0.0)
            hess.append(first + fp * a.hess[k])
    return Jet(d, val, grad, hess)


def jet_div(a: Jet, b: Jet) -> Jet:
    return jet_mul(a, jet_unary("recip", b))


def jet_binary(kind: str, a: Jet, b: Jet) -> Jet:
    if kind == "add":
        return jet_add(a, b)
    if kind == "sub":
        return jet_sub(a, b)
    if kind == "mul":
        return jet_mul(a, b)
    if kind == "div":
        return jet_div(a, b)
    raise ValueError(f"unknown binary jet kind {kind!r}")
