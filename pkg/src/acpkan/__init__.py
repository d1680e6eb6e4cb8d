"""Chebyshev-KAN physics-informed networks with residual-gradient attention.

Library + CLI: a reverse-mode tape with second-order jets, the
attention-coupled Chebyshev-KAN architecture and an MLP baseline,
residual/gradient adaptive loss weighting, desk-scale PDE benchmarks
with analytical oracles, and a Jacobian rank-diagnostics lab.
"""

__version__ = "0.1.0"
