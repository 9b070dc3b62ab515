"""Histogram normalization and the explicit chi-squared kernel map.

The map turns each non-negative input coordinate into 2n+1 features whose
inner products approximate the additive chi-squared kernel, so a linear
classifier on mapped features behaves like a chi-squared kernel machine.
Per coordinate x the features are

    sqrt(x * L * kappa(0)),
    sqrt(2 * x * L * kappa(j*L)) * cos(j*L*log x),   j = 1..n
    sqrt(2 * x * L * kappa(j*L)) * sin(j*L*log x),

with kappa(lam) = sech(pi * lam), the chi-squared kernel signature, and L
the sampling period.  Zero coordinates map to all-zero features.  A
homogeneity degree gamma != 1 is applied by substituting x -> x**gamma
before the map, so the approximated kernel is the chi-squared kernel of the
gamma-powered inputs.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelMapConfig:
    n: int = 3
    gamma: float = 0.5
    period: float = 0.5  # sampling period L

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("approximation order n must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.period <= 0.0:
            raise ValueError("sampling period must be positive")


DEFAULT_KERNEL_MAP = KernelMapConfig()


def l1_normalize(counts):
    """Counts scaled to sum 1; an all-zero histogram stays all-zero."""
    v = np.asarray(counts, dtype=np.float64)
    total = v.sum(axis=-1, keepdims=True)
    return np.divide(v, total, out=np.zeros_like(v), where=total > 0)


def kernel_map(v, cfg=DEFAULT_KERNEL_MAP):
    """Explicit feature map; input (..., D) -> output (..., D * (2n+1)).

    Raises on negative entries; exact zeros produce zero features, so the
    output is finite for every valid input.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size and v.min() < 0:
        raise ValueError("kernel_map requires non-negative inputs")
    u = v if cfg.gamma == 1.0 else np.power(v, cfg.gamma)
    L = cfg.period
    out = np.zeros(u.shape + (2 * cfg.n + 1,))
    positive = u > 0
    up = u[positive]
    logu = np.log(up)
    out[positive, 0] = np.sqrt(up * L)
    for j in range(1, cfg.n + 1):
        amplitude = np.sqrt(2.0 * up * L / np.cosh(np.pi * j * L))
        out[positive, 2 * j - 1] = amplitude * np.cos(j * L * logu)
        out[positive, 2 * j] = amplitude * np.sin(j * L * logu)
    return out.reshape(v.shape[:-1] + (v.shape[-1] * (2 * cfg.n + 1),))


def exact_chi2_kernel(x, y):
    """The additive chi-squared kernel sum(2*x*y / (x+y)), zero terms skipped.

    This is the quantity kernel_map approximates (on gamma-powered inputs);
    it doubles as the oracle the map is validated against.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if (x.size and x.min() < 0) or (y.size and y.min() < 0):
        raise ValueError("chi-squared kernel requires non-negative inputs")
    s = x + y
    safe = np.where(s > 0, s, 1.0)
    return float(np.where(s > 0, 2.0 * x * y / safe, 0.0).sum())
