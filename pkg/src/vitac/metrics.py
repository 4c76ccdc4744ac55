"""Image quality metrics for generated-touch evaluation.

PSNR over a known peak, and mean SSIM with an 11x11 uniform window, sample
covariance normalization, and the standard stabilizers k1=0.01, k2=0.03.
Windows are evaluated only where fully inside the image.
"""

from __future__ import annotations

import numpy as np

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB; identical images return ``cap``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    err = float(np.mean((a - b) ** 2))
    if err == 0.0:
        return cap
    return min(cap, 10.0 * np.log10(peak * peak / err))


def _box_mean_valid(x: np.ndarray, w: int) -> np.ndarray:
    """Mean over every fully-inside w x w window (integral image)."""
    s = np.cumsum(np.cumsum(x, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    total = s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]
    return total / (w * w)


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity of two 2D images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("ssim expects 2D grayscale images")
    if min(a.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} window")

    ux = _box_mean_valid(a, window)
    uy = _box_mean_valid(b, window)
    uxx = _box_mean_valid(a * a, window)
    uyy = _box_mean_valid(b * b, window)
    uxy = _box_mean_valid(a * b, window)

    n = window * window
    cov_norm = n / (n - 1)  # sample covariance
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(s.mean())
