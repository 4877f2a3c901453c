"""Smoothing, derivative and scaling transforms for single spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .core import WavelengthAxis


@dataclass(frozen=True)
class SgFilterSpec:
    window: int = 11
    poly_order: int = 2
    deriv_order: int = 0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not 0 <= self.poly_order < self.window:
            raise ValueError("poly_order must be non-negative and below window")
        if not 0 <= self.deriv_order <= self.poly_order:
            raise ValueError("deriv_order must lie in [0, poly_order]")


def savitsky_golay(x, axis: WavelengthAxis, spec: SgFilterSpec = SgFilterSpec()) -> np.ndarray:
    """Savitzky-Golay smoothing or differentiation along a uniform axis.

    Edge points are taken from a polynomial fitted to the outermost full
    window, so the output keeps the input length.
    """
    x = np.asarray(x, dtype=float)
    if x.size != len(axis):
        raise ValueError("spectrum length does not match axis")
    if x.size < spec.window:
        raise ValueError(f"spectrum of length {x.size} shorter than window {spec.window}")
    h = axis.spacing()
    return savgol_filter(
        x, spec.window, spec.poly_order, deriv=spec.deriv_order, delta=h, mode="interp"
    )


def range_scale(v, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vmin, vmax = v.min(), v.max()
    if not vmax > vmin:
        raise ValueError("cannot range-scale a constant vector")
    return lo + (v - vmin) * ((hi - lo) / (vmax - vmin))


def max_rescale(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m = x.max()
    if not m > 0:
        raise ValueError("max_rescale needs a positive maximum")
    return x / m


def derivative(x, axis: WavelengthAxis, order: int = 1) -> np.ndarray:
    """Finite-difference derivative: second-order central in the interior,
    second-order one-sided at the edges, applied ``order`` times."""
    x = np.asarray(x, dtype=float)
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if x.size < order + 2 or x.size < 3:
        raise ValueError(f"need at least {max(order + 2, 3)} points for order {order}")
    if x.size != len(axis):
        raise ValueError("spectrum length does not match axis")
    d = x
    for _ in range(order):
        d = np.gradient(d, axis.values, edge_order=2)
    return d
