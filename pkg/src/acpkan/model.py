"""Learnable architectures over jets.

The building blocks are a first-kind Chebyshev KAN layer (learnable
polynomial coefficients of tanh-normalized inputs), affine layers,
layer normalization, and the two-parameter sin/cos wavelet activation.
They combine into the attention-coupled model: an embedding, two
wavelet-activated encoder branches U and V, a stack of Chebyshev blocks
with residual connections whose outputs gate between U and V+1, and an
affine read-out.  A plain tanh MLP serves as the baseline.

All forwards operate on feature jets: one jet whose components are
(batch, width) arrays, so an entire batch of collocation points flows
through a single graph.  Models are immutable during a forward pass;
initialization and optimizer updates are single-owner operations.
"""

from __future__ import annotations

import numpy as np

from . import tape as tp
from .tape import Tape, Var
from . import jets as jt
from .jets import Jet
from .rng import Rng

__all__ = [
    "Cheby1KanLayer",
    "LinearLayer",
    "LayerNormLayer",
    "WaveletAct",
    "AcPkanModel",
    "MlpPinn",
    "cheby_basis",
    "cheby1kan_forward",
    "linear_forward",
    "layernorm_forward",
    "wavelet_forward",
    "acpkan_forward",
    "mlp_forward",
    "init_model",
    "seed_feature_jet",
    "output_coordinate",
]


def seed_feature_jet(tape: Tape, points: np.ndarray, order: int = 2) -> Jet:
    """Seed a (batch, d) matrix of PDE inputs as one feature jet.

    Column i carries seed input i: grad[i] is the indicator of column i,
    so per coordinate the usual seeding rule (own slot 1, rest 0) holds.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("points must be (batch, d)")
    batch, d = X.shape
    val = tp.leaf(tape, X)
    grad = []
    if order >= 1:
        for i in range(d):
            e = np.zeros((batch, d))
            e[:, i] = 1.0
            grad.append(tp.leaf(tape, e))
    hess = None
    if order >= 2:
        hess = [tp.leaf(tape, np.zeros((batch, d))) for _ in range(jt.hess_size(d))]
    return Jet(d, val, grad, hess)


def output_coordinate(y: Jet, k: int = 0) -> Jet:
    """Extract output column k of a (batch, d_out) feature jet as a (batch,) jet."""
    pick = lambda v: tp.take_index(v, k, axis=1)
    hess = [pick(h) for h in y.hess] if y.hess is not None else None
    return Jet(y.dim, pick(y.val), [pick(g) for g in y.grad], hess)


def _basis_tail(z: Jet, degree: int) -> list:
    """T_1..T_N of the three-term recurrence; T_0 == 1 is left implicit."""
    out = [z]
    if degree >= 2:
        prev2, prev1 = None, z
        for _ in range(degree - 1):
            zt = jt.jet_mul(z, prev1)
            two_zt = jt.jet_affine(zt, 2.0, 0.0)
            tn = jt.jet_affine(two_zt, 1.0, -1.0) if prev2 is None else jt.jet_sub(two_zt, prev2)
            out.append(tn)
            prev2, prev1 = prev1, tn
    return out


def cheby_basis(z: Jet, degree: int) -> list:
    """First-kind Chebyshev polynomials T_0..T_N of a jet, by recurrence.

    The recurrence T_n = 2 z T_{n-1} - T_{n-2} is polynomial and exact,
    unlike the cos/arccos closed form whose derivative blows up at the
    interval ends.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    t = z.val.tape
    ones = np.ones_like(t.values[z.val.id])
    t0 = jt.jet_broadcast(tp.leaf(t, ones), z.dim, order=z.order)
    if degree == 0:
        return [t0]
    return [t0] + _basis_tail(z, degree)


class Cheby1KanLayer:
    """Sum of per-input Chebyshev expansions: y_k = sum_i sum_n C[i,k,n] T_n(tanh x_i)."""

    def __init__(self, d_in: int, d_out: int, degree: int):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.d_in = d_in
        self.d_out = d_out
        self.degree = degree
        self.coeff = np.zeros((d_in, d_out, degree + 1))

    def tensors(self, prefix: str):
        return [(f"{prefix}.C", "cheby", self.coeff)]

    def forward(self, tape: Tape, bound, x: Jet, apply_tanh: bool = True) -> Jet:
        C = bound[0]
        z = jt.jet_unary("tanh", x) if apply_tanh else x
        basis = _basis_tail(z, self.degree)

        # Degree-0 plane: T_0 == 1 contributes a constant row sum_i C[i,k,0]
        # to the value and nothing to the derivatives.
        ones_row = tp.leaf(tape, np.ones((1, self.d_in)))
        planes = [tp.take_index(C, n, axis=2) for n in range(self.degree + 1)]
        val = tp.matmul(ones_row, planes[0])
        for n, tn in enumerate(basis, start=1):
            val = val + tp.matmul(tn.val, planes[n])
        grad = []
        for i in range(len(z.grad)):
            acc = None
            for n, tn in enumerate(basis, start=1):
                term = tp.matmul(tn.grad[i], planes[n])
                acc = term if acc is None else acc + term
            grad.append(acc)
        hess = None
        if z.hess is not None:
            hess = []
            for k in range(len(z.hess)):
                acc = None
                for n, tn in enumerate(basis, start=1):
                    term = tp.matmul(tn.hess[k], planes[n])
                    acc = term if acc is None else acc + term
                hess.append(acc)
        return Jet(x.dim, val, grad, hess)


class LinearLayer:
    """Affine map y = x W^T + b applied component-wise over jets."""

    def __init__(self, d_in: int, d_out: int):
        self.d_in = d_in
        self.d_out = d_out
        self.W = np.zeros((d_out, d_in))
        self.b = np.zeros(d_out)

    def tensors(self, prefix: str):
        return [(f"{prefix}.W", "linear_w", self.W), (f"{prefix}.b", "linear_b", self.b)]

    def forward(self, tape: Tape, bound, x: Jet) -> Jet:
        W, b = bound
        if x.val.shape[1] != self.d_in:
            raise ValueError(f"linear layer expects width {self.d_in}, got {x.val.shape[1]}")
        Wt = tp.transpose2(W)
        val = tp.matmul(x.val, Wt) + b
        grad = [tp.matmul(g, Wt) for g in x.grad]
        hess = [tp.matmul(h, Wt) for h in x.hess] if x.hess is not None else None
        return Jet(x.dim, val, grad, hess)


class LayerNormLayer:
    """Normalize over the hidden width with learnable affine (gamma, beta)."""

    def __init__(self, d: int, eps: float = 1e-5):
        if d < 2:
            raise ValueError("layer norm needs width >= 2")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.d = d
        self.eps = eps
        self.gamma = np.zeros(d)
        self.beta = np.zeros(d)

    def tensors(self, prefix: str):
        return [(f"{prefix}.gamma", "ln_gamma", self.gamma), (f"{prefix}.beta", "ln_beta", self.beta)]

    def forward(self, tape: Tape, bound, x: Jet) -> Jet:
        gamma, beta = bound
        inv_d = 1.0 / self.d

        def mean_jet(j: Jet) -> Jet:
            m = lambda v: tp.affine(tp.sum_axis(v, axis=1), inv_d, 0.0)
            hess = [m(h) for h in j.hess] if j.hess is not None else None
            return Jet(j.dim, m(j.val), [m(g) for g in j.grad], hess)

        mu = mean_jet(x)
        xc = jt.jet_sub(x, mu)
        var = mean_jet(jt.jet_mul(xc, xc))
        inv_std = jt.jet_unary("recip", jt.jet_unary("sqrt", jt.jet_affine(var, 1.0, self.eps)))
        norm = jt.jet_mul(xc, inv_std)
        scaled = jt.jet_scale(norm, gamma)
        return Jet(x.dim, scaled.val + beta, scaled.grad, scaled.hess)


class WaveletAct:
    """Elementwise w1*sin(x) + w2*cos(x) with learnable scalars."""

    def __init__(self):
        self.w1 = np.zeros(1)
        self.w2 = np.zeros(1)

    def tensors(self, prefix: str):
        return [(f"{prefix}.w1", "wavelet", self.w1), (f"{prefix}.w2", "wavelet", self.w2)]

    def forward(self, tape: Tape, bound, x: Jet) -> Jet:
        w1, w2 = bound
        return jt.jet_add(jt.jet_scale(jt.jet_unary("sin", x), w1), jt.jet_scale(jt.jet_unary("cos", x), w2))


def _collect(layers_with_prefixes):
    out = []
    for prefix, layer in layers_with_prefixes:
        out.extend(layer.tensors(prefix))
    return out


class _ModelBase:
    """Shared parameter bookkeeping: a flat vector with named views."""

    def _finalize(self, named_tensors):
        self._names = [n for n, _, _ in named_tensors]
        self._kinds = [k for _, k, _ in named_tensors]
        arrays = [a for _, _, a in named_tensors]
        sizes = [a.size for a in arrays]
        self.theta = np.zeros(sum(sizes))
        self._views = []
        off = 0
        for (name, kind, a) in named_tensors:
            view = self.theta[off : off + a.size].reshape(a.shape)
            view[...] = a
            self._views.append(view)
            off += a.size
        # Re-point every layer attribute at its view so optimizer updates
        # through theta are visible everywhere.
        self._rebind_views()

    def _rebind_views(self):
        idx = 0
        for prefix, layer in self._layer_list():
            n = len(layer.tensors(prefix))
            views = self._views[idx : idx + n]
            for (name, kind, _), view in zip(layer.tensors(prefix), views):
                attr = name.rsplit(".", 1)[1]
                attr = {"C": "coeff"}.get(attr, attr)
                setattr(layer, attr, view)
            idx += n

    def parameters(self):
        """(name, array) pairs in registration order."""
        return list(zip(self._names, self._views))

    @property
    def param_count(self) -> int:
        return self.theta.size

    def bind(self, tape: Tape):
        """Register every tensor as a parameter leaf, in registration order."""
        vars_ = [tp.leaf(tape, v, is_parameter=True) for v in self._views]
        bound = {}
        idx = 0
        for prefix, layer in self._layer_list():
            n = len(layer.tensors(prefix))
            bound[prefix] = vars_[idx : idx + n]
            idx += n
        return bound


class AcPkanModel(_ModelBase):
    """Attention-coupled Chebyshev-KAN network.

    Forward pass: embed the input, form U and V by wavelet-activated
    encoders, then for each block compute H = LayerNorm(Cheby(alpha)),
    alpha0 = H + alpha, alpha = (1 - alpha0) * U + alpha0 * (V + 1),
    and finally read out affinely.
    """

    kind = "acpkan"

    def __init__(self, d_in=2, d_model=16, d_hidden=32, blocks=2, degree=8, d_out=1):
        if blocks < 1:
            raise ValueError("need at least one block")
        self.d_in = d_in
        self.d_model = d_model
        self.d_hidden = d_hidden
        self.blocks = blocks
        self.degree = degree
        self.d_out = d_out

        self.embed = LinearLayer(d_in, d_model)
        self.enc_u = LinearLayer(d_model, d_hidden)
        self.wav_u = WaveletAct()
        self.enc_v = LinearLayer(d_model, d_hidden)
        self.wav_v = WaveletAct()
        self.cheby = [Cheby1KanLayer(d_hidden, d_hidden, degree) for _ in range(blocks)]
        self.norms = [LayerNormLayer(d_hidden) for _ in range(blocks)]
        self.out = LinearLayer(d_hidden, d_out)
        self._finalize(_collect(self._layer_list()))

    def _layer_list(self):
        layers = [
            ("embed", self.embed),
            ("enc_u", self.enc_u),
            ("wav_u", self.wav_u),
            ("enc_v", self.enc_v),
            ("wav_v", self.wav_v),
        ]
        for i, (c, n) in enumerate(zip(self.cheby, self.norms), start=1):
            layers.append((f"block{i}.cheby", c))
            layers.append((f"block{i}.ln", n))
        layers.append(("out", self.out))
        return layers

    def forward(self, tape: Tape, points: np.ndarray, order: int = 2, bound=None) -> Jet:
        if bound is None:
            bound = self.bind(tape)
        x = seed_feature_jet(tape, points, order=order)
        h0 = self.embed.forward(tape, bound["embed"], x)
        u = self.wav_u.forward(tape, bound["wav_u"], self.enc_u.forward(tape, bound["enc_u"], h0))
        v = self.wav_v.forward(tape, bound["wav_v"], self.enc_v.forward(tape, bound["enc_v"], h0))
        alpha = u
        v_plus_1 = jt.jet_affine(v, 1.0, 1.0)
        for i, (cheby, norm) in enumerate(zip(self.cheby, self.norms), start=1):
            h = norm.forward(tape, bound[f"block{i}.ln"], cheby.forward(tape, bound[f"block{i}.cheby"], alpha))
            alpha0 = jt.jet_add(h, alpha)
            gate = jt.jet_affine(alpha0, -1.0, 1.0)
            alpha = jt.jet_add(jt.jet_mul(gate, u), jt.jet_mul(alpha0, v_plus_1))
        return self.out.forward(tape, bound["out"], alpha)


class MlpPinn(_ModelBase):
    """Plain tanh MLP baseline."""

    kind = "mlp"

    def __init__(self, sizes):
        if len(sizes) < 3:
            raise ValueError("need at least two layers (sizes of length >= 3)")
        self.sizes = list(sizes)
        self.d_in = sizes[0]
        self.d_out = sizes[-1]
        self.layers = [LinearLayer(a, b) for a, b in zip(sizes[:-1], sizes[1:])]
        self._finalize(_collect(self._layer_list()))

    def _layer_list(self):
        return [(f"layer{i + 1}", l) for i, l in enumerate(self.layers)]

    def forward(self, tape: Tape, points: np.ndarray, order: int = 2, bound=None) -> Jet:
        if bound is None:
            bound = self.bind(tape)
        x = seed_feature_jet(tape, points, order=order)
        for i, layer in enumerate(self.layers):
            x = layer.forward(tape, bound[f"layer{i + 1}"], x)
            if i < len(self.layers) - 1:
                x = jt.jet_unary("tanh", x)
        return x


def init_model(model, rng: Rng) -> None:
    """Seeded in-place initialization, drawing in registration order.

    Affine weights are Xavier-uniform with zero bias; wavelet scalars
    start at exactly one; layer-norm is the identity; Chebyshev
    coefficients are zero-mean normal with std 1/(d_in*sqrt(N+1)) so the
    layer output variance stays O(1).
    """
    for (name, view), kind in zip(model.parameters(), model._kinds):
        if kind == "linear_w":
            d_out, d_in = view.shape
            a = np.sqrt(6.0 / (d_in + d_out))
            flat = view.reshape(-1)
            for i in range(flat.size):
                flat[i] = rng.uniform(-a, a)
        elif kind == "linear_b":
            view[...] = 0.0
        elif kind == "wavelet":
            view[...] = 1.0
        elif kind == "ln_gamma":
            view[...] = 1.0
        elif kind == "ln_beta":
            view[...] = 0.0
        elif kind == "cheby":
            d_in = view.shape[0]
            n_plus_1 = view.shape[2]
            std = 1.0 / (d_in * np.sqrt(n_plus_1))
            flat = view.reshape(-1)
            for i in range(flat.size):
                flat[i] = rng.normal(0.0, std)
        else:
            raise ValueError(f"unknown tensor kind {kind!r} for {name}")


# Functional aliases for standalone layers: bind fresh parameter leaves
# on the given tape and run the forward.

def _bind_layer(layer, tape: Tape):
    return [tp.leaf(tape, a, is_parameter=True) for _, _, a in layer.tensors("standalone")]


def cheby1kan_forward(layer: Cheby1KanLayer, tape: Tape, x: Jet, apply_tanh: bool = True) -> Jet:
    return layer.forward(tape, _bind_layer(layer, tape), x, apply_tanh=apply_tanh)


def linear_forward(layer: LinearLayer, tape: Tape, x: Jet) -> Jet:
    return layer.forward(tape, _bind_layer(layer, tape), x)


def layernorm_forward(layer: LayerNormLayer, tape: Tape, x: Jet) -> Jet:
    return layer.forward(tape, _bind_layer(layer, tape), x)


def wavelet_forward(act: WaveletAct, tape: Tape, x: Jet) -> Jet:
    return act.forward(tape, _bind_layer(act, tape), x)


def acpkan_forward(model: AcPkanModel, tape: Tape, points, order: int = 2) -> Jet:
    return model.forward(tape, np.atleast_2d(np.asarray(points, dtype=np.float64)), order=order)


def mlp_forward(model: MlpPinn, tape: Tape, points, order: int = 2) -> Jet:
    return model.forward(tape, np.atleast_2d(np.asarray(points, dtype=np.float64)), order=order)
