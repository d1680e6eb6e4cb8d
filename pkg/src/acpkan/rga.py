"""Residual-gradient attention: adaptive loss weighting.

Two coupled mechanisms rescale the loss terms every step:

* point-wise weights per term track the max-normalized absolute
  residual by exponential moving average (rate eta), so points with
  stubborn residuals gain influence;
* one scalar per data term tracks the ratio of the residual loss's
  largest parameter-gradient magnitude to the data term's mean
  magnitude (EMA rate beta_w), clamped from below at e + eps so its
  logarithm never drops under one.

The total loss multiplies each data term by the log of its scalar
(the log transform can be disabled for ablation; the scalar's own
update dynamics are identical either way - the transform only affects
loss assembly).  Weights and log factors enter the loss as constants:
no gradient flows through them.

State is single-owner and mutated only between optimization steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .tape import Var

__all__ = [
    "RgaConfig",
    "RgaState",
    "rba_update",
    "grad_stats",
    "gra_update",
    "term_loss",
    "rga_total_loss",
]

GRA_FLOOR_BASE = math.e


@dataclass
class RgaConfig:
    """Weighting hyperparameters; defaults are the benchmark settings."""

    eta: float = 0.001
    beta_w: float = 0.001
    eps: float = 1e-8
    lambda_r: float = 1.0
    lambda_d: float = 1.0
    use_log: bool = True
    gra_stride: int = 1
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if not 0.0 < self.beta_w <= 1.0:
            raise ValueError("beta_w must be in (0, 1]")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.gra_stride < 1:
            raise ValueError("gra_stride must be >= 1")

    @property
    def gra_floor(self) -> float:
        return GRA_FLOOR_BASE + self.eps


@dataclass
class RgaState:
    """Per-term point weights plus per-data-term scalars."""

    rba: dict = field(default_factory=dict)  # term name -> np.ndarray
    gra: dict = field(default_factory=dict)  # data term name -> float

    @classmethod
    def for_terms(cls, term_sizes: dict, data_terms) -> "RgaState":
        state = cls()
        for name, n in term_sizes.items():
            state.rba[name] = np.zeros(n)
        for name in data_terms:
            state.gra[name] = 1.0
        return state


def rba_update(weights: np.ndarray, abs_residuals: np.ndarray, eta: float) -> None:
    """EMA toward the max-normalized absolute residual, in place.

    An all-zero residual vector leaves the weights untouched (the
    normalization is undefined there, and zero residuals need no
    attention anyway).
    """
    r = np.abs(np.asarray(abs_residuals, dtype=np.float64))
    if r.shape != weights.shape:
        raise ValueError(f"residual length {r.shape} != weight length {weights.shape}")
    m = r.max() if r.size else 0.0
    if m == 0.0:
        return
    weights *= 1.0 - eta
    weights += eta * (r / m)


def grad_stats(g: np.ndarray) -> tuple:
    """(max |g_p|, mean |g_p|) over the scalar parameters."""
    g = np.asarray(g, dtype=np.float64)
    if g.size == 0:
        raise ValueError("gradient vector is empty")
    a = np.abs(g)
    return float(a.max()), float(a.mean())


def gra_update(lam: float, g_r_max: float, g_term_mean: float, beta_w: float, eps: float) -> float:
    """EMA toward g_r_max/(eps + mean), then clamp at the e + eps floor."""
    target = g_r_max / (eps + g_term_mean)
    lam = (1.0 - beta_w) * lam + beta_w * target
    return max(lam, GRA_FLOOR_BASE + eps)


def term_loss(rho: Var, weights: np.ndarray, count: int) -> Var:
    """(1/count) * sum_j w_j * rho_j^2 with the weights as constants."""
    sq = tp.var_unary("square", rho)
    return tp.wsum(sq, np.asarray(weights, dtype=np.float64) / count)


def rga_total_loss(residual_term, data_terms, state: RgaState, cfg: RgaConfig):
    """Assemble the weighted total loss on the tape.

    ``residual_term`` is (name, rho Var); ``data_terms`` a list of the
    same.  Returns (total Var, per-term loss Vars by name).  With the
    mechanism disabled every weight is one and the total reduces to the
    plain sum of mean-squared terms.
    """
    name_r, rho_r = residual_term
    losses = {}
    n_r = _rho_size(rho_r)
    w_r = state.rba[name_r] if cfg.enabled else np.ones(n_r)
    losses[name_r] = term_loss(rho_r, w_r, n_r)
    total = tp.affine(losses[name_r], cfg.lambda_r, 0.0)
    for name, rho in data_terms:
        n = _rho_size(rho)
        w = state.rba[name] if cfg.enabled else np.ones(n)
        losses[name] = term_loss(rho, w, n)
        factor = cfg.lambda_d * gra_factor(state.gra[name], cfg) if cfg.enabled else cfg.lambda_d
        total = total + tp.affine(losses[name], factor, 0.0)
    return total, losses


def gra_factor(lam: float, cfg: RgaConfig) -> float:
    """Multiplier contributed by a data term's scalar weight."""
    return math.log(lam) if cfg.use_log else lam


def _rho_size(rho: Var) -> int:
    v = rho.tape.values[rho.id]
    return int(v.size) if v.ndim else 1
