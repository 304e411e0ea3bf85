"""SSIM and plain Lp distances sharing the metric call convention."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from watsonsim.errors import InputDomainError


@dataclass(frozen=True)
class SsimParams:
    """Constants of the structural-similarity index (not trainable)."""

    k1: float = 0.01
    k2: float = 0.03
    window_size: int = 11
    window_sigma: float = 1.5
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise InputDomainError("window_size must be odd and >= 3")
        if self.k1 <= 0 or self.k2 <= 0 or self.window_sigma <= 0:
            raise InputDomainError("k1, k2, window_sigma must be positive")
        if self.dynamic_range <= 0:
            raise InputDomainError("dynamic_range must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized, separable Gaussian sampling window."""
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g1 = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    g = np.outer(g1, g1)
    return g / g.sum()


def ssim_block(x: np.ndarray, y: np.ndarray, weights: np.ndarray,
               params: SsimParams | None = None) -> float:
    """SSIM of a single window pair under the given sampling weights."""
    params = params or SsimParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.shape != weights.shape:
        raise InputDomainError("ssim_block needs equal-shaped x, y, weights")
    mx = float(np.sum(weights * x))
    my = float(np.sum(weights * y))
    vx = float(np.sum(weights * x * x)) - mx * mx
    vy = float(np.sum(weights * y * y)) - my * my
    cxy = float(np.sum(weights * x * y)) - mx * my
    return ((2 * mx * my + params.c1) * (2 * cxy + params.c2)) / (
        (mx * mx + my * my + params.c1) * (vx + vy + params.c2)
    )


def _as_channels(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return arr[:, :, None]
    if arr.ndim == 3:
        return arr
    raise InputDomainError("expected a 2D or (H, W, C) array")


def _corr_valid(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = sliding_window_view(arr, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim_forward(x, y, params: SsimParams | None = None):
    """1 - mean SSIM over all window positions and channels, with cache.

    Windows slide pixel-by-pixel; only fully interior positions count.
    """
    params = params or SsimParams()
    xc = _as_channels(x)
    yc = _as_channels(y)
    if xc.shape != yc.shape:
        raise InputDomainError(f"image shapes differ: {xc.shape} vs {yc.shape}")
    size = params.window_size
    if xc.shape[0] < size or xc.shape[1] < size:
        raise InputDomainError(
            f"image {xc.shape[0]}x{xc.shape[1]} smaller than the "
            f"{size}x{size} window"
        )
    g = gaussian_window(size, params.window_sigma)
    c1, c2 = params.c1, params.c2
    per_channel = []
    for c in range(xc.shape[2]):
        xa = xc[:, :, c]
        ya = yc[:, :, c]
        u1 = _corr_valid(xa, g)
        u2 = _corr_valid(ya, g)
        p1 = _corr_valid(xa * xa, g)
        p2 = _corr_valid(ya * ya, g)
        q = _corr_valid(xa * ya, g)
        v1 = p1 - u1 * u1
        v2 = p2 - u2 * u2
        cv = q - u1 * u2
        n1 = 2.0 * u1 * u2 + c1
        n2 = 2.0 * cv + c2
        d1 = u1 * u1 + u2 * u2 + c1
        d2 = v1 + v2 + c2
        smap = (n1 * n2) / (d1 * d2)
        per_channel.append(
            {"u1": u1, "u2": u2, "v1": v1, "v2": v2, "cv": cv,
             "n1": n1, "n2": n2, "d1": d1, "d2": d2, "smap": smap}
        )
    # exact summation: a probe that perturbs one pixel must see only that
    # pixel's windows move, not reshuffled rounding of untouched terms
    count = sum(ch["smap"].size for ch in per_channel)
    total = math.fsum(
        v for ch in per_channel for v in ch["smap"].ravel().tolist()
    )
    value = 1.0 - total / count
    cache = {"params": params, "g": g, "x": xc, "y": yc,
             "channels": per_channel}
    return value, cache


def ssim_distance(x, y, params: SsimParams | None = None) -> float:
    value, _ = ssim_forward(x, y, params)
    return value


def lp_forward(x, y, p: float = 2.0):
    if p < 1.0:
        raise InputDomainError("p must be >= 1")
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise InputDomainError(f"image shapes differ: {xa.shape} vs {ya.shape}")
    delta = xa - ya
    value = float(np.sum(np.abs(delta) ** p) ** (1.0 / p))
    return value, {"delta": delta, "p": p, "value": value}


def lp_distance(x, y, p: float = 2.0) -> float:
    """Pixelwise p-norm of the difference, all channels pooled."""
    value, _ = lp_forward(x, y, p)
    return value
