"""Reconstruction and segmentation quality measures."""

import math

import numpy as np


def psnr(x, ref, peak=None):
    """Peak signal-to-noise ratio in decibels, 10*log10(peak^2 / MSE).

    ``peak`` defaults to the maximum of the reference image. A zero MSE is
    reported as math.inf.
    """
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    if peak is None:
        peak = float(ref.max())
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _as_binary(mask, name):
    m = np.asarray(mask)
    if m.dtype != bool:
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError(f"{name} is not a binary mask")
        m = m.astype(bool)
    return m


def dice_coefficient(mask_a, mask_b):
    """Dice overlap 2|A & B| / (|A| + |B|); 1.0 when both masks are empty."""
    a = _as_binary(mask_a, "mask_a")
    b = _as_binary(mask_b, "mask_b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / denom


def dice_squared(mask_a, mask_b):
    """Square of the Dice coefficient."""
    return dice_coefficient(mask_a, mask_b) ** 2


def block_average(values, center, half_width=5):
    """Mean over the window [center - half_width, center + half_width]."""
    values = np.asarray(values, dtype=float)
    lo = center - half_width
    hi = center + half_width
    if lo < 0 or hi >= len(values):
        raise IndexError(
            f"block [{lo}, {hi}] outside the available range 0..{len(values) - 1}"
        )
    return float(values[lo : hi + 1].mean())
