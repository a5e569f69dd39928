"""Robust local quadratic regression smoothing of prediction sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError

DEGREE = 2  # local polynomial degree


@dataclass(frozen=True)
class SmootherConfig:
    span: int = 9
    robust_iterations: int = 3

    def __post_init__(self):
        if self.span % 2 == 0:
            raise InvalidInputError("span must be odd")
        if self.span < DEGREE + 2:
            raise InvalidInputError(f"span must be at least {DEGREE + 2}")


def _tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def _bisquare(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**2) ** 2


def _fit_point(t, y, i, lo, hi, robust_w):
    """Weighted quadratic fit over window [lo, hi), evaluated at t[i]."""
    tw = t[lo:hi] - t[i]
    yw = y[lo:hi]
    dmax = np.max(np.abs(tw))
    # farthest point keeps a sliver of weight so truncated windows stay full rank
    w = _tricube(tw / (dmax * (1.0 + 1e-12))) + 1e-12 if dmax > 0 else np.ones_like(tw)
    w = w * robust_w[lo:hi]
    basis = np.stack([np.ones_like(tw), tw, tw * tw], axis=1)
    bw = basis * w[:, None]
    coeff, *_ = np.linalg.lstsq(bw.T @ basis, bw.T @ yw, rcond=None)
    return coeff[0]


def smooth(series, config=None, t=None):
    """Smooth a 1-D series with robust local quadratic regression.

    Each point is refit by weighted least squares over its centered
    window (tricube distance weights, truncated one-sided at the ends),
    then `robust_iterations` rounds of bisquare reweighting by residual
    downweight outliers.  Returns a series of equal length.
    """
    config = config or SmootherConfig()
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidInputError("series must be one-dimensional")
    n = len(y)
    if n < DEGREE + 2:
        raise InvalidInputError(f"series must have at least {DEGREE + 2} samples")
    t = np.arange(n, dtype=np.float64) if t is None else np.asarray(t, dtype=np.float64)
    half = config.span // 2

    robust_w = np.ones(n)
    out = y.copy()
    for iteration in range(config.robust_iterations + 1):
        for i in range(n):
            lo = max(0, i - half)
            hi = min(n, i + half + 1)
            out[i] = _fit_point(t, y, i, lo, hi, robust_w)
        if iteration == config.robust_iterations:
            break
        residuals = y - out
        scale = np.median(np.abs(residuals))
        if scale <= 0:
            break
        robust_w = _bisquare(residuals / (6.0 * scale))
    return out


def smooth_components(matrix, config=None):
    """Smooth each column of an (n, k) prediction matrix independently."""
    m = np.asarray(matrix, dtype=np.float64)
    return np.stack([smooth(m[:, j], config) for j in range(m.shape[1])], axis=1)
