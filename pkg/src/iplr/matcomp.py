"""Matrix-completion recovery metrics.

Note the RMSE convention: the Frobenius distance is divided by nhat, not by
the entry count nhat^2. This matches the experimental protocol this package
reproduces and differs from the usual per-entry RMSE.
"""

from __future__ import annotations

import numpy as np

PSNR_CAP = 999.0


def relative_error(X: np.ndarray, B: np.ndarray) -> float:
    """||X - B||_F / ||B||_F; recovery is usually declared below 1e-3."""
    X, B = np.asarray(X), np.asarray(B)
    if X.shape != B.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {B.shape}")
    denom = np.linalg.norm(B)
    if denom == 0:
        raise ValueError("reference matrix is zero")
    return float(np.linalg.norm(X - B) / denom)


def rmse(X: np.ndarray, B: np.ndarray) -> float:
    """||X - B||_F / nhat for square nhat x nhat inputs."""
    X, B = np.asarray(X), np.asarray(B)
    if X.shape != B.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("inputs must be square matrices of equal shape")
    return float(np.linalg.norm(X - B) / X.shape[0])


def rmse_oracle(eta: float, nhat: int, r: int, m: int) -> float:
    """Reference error eta * sqrt(df / m) with df = r(2*nhat - r) degrees of freedom."""
    return float(eta * np.sqrt(r * (2 * nhat - r) / m))


def psnr(X: np.ndarray, B: np.ndarray, peak: float = 255.0) -> float:
    """10 log10(peak^2 nhat^2 / ||X - B||_F^2), capped at 999.0 for exact matches."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    X, B = np.asarray(X), np.asarray(B)
    err_sq = float(np.sum((X - B) ** 2))
    if err_sq == 0:
        return PSNR_CAP
    val = 10.0 * np.log10(peak * peak * X.size / err_sq)
    return float(min(val, PSNR_CAP))


def numerical_rank(X: np.ndarray, rtol: float = 1e-8) -> int:
    """Number of singular values above rtol * sigma_1."""
    sigma = np.linalg.svd(np.asarray(X), compute_uv=False)
    if len(sigma) == 0 or sigma[0] == 0:
        return 0
    return int(np.sum(sigma > rtol * sigma[0]))
