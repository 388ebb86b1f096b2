"""Input validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from .prices import SYNTHETIC_START, PriceSeries


def as_price_series(X) -> PriceSeries:
    """Coerce estimator input to a PriceSeries.

    Accepts a PriceSeries as-is, or a 1-D array-like of hourly prices
    (assigned a synthetic start timestamp).
    """
    if isinstance(X, PriceSeries):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(
            f"expected a PriceSeries or a 1-D array of hourly prices, got shape {arr.shape}"
        )
    return PriceSeries(start=SYNTHETIC_START, prices=arr)


def check_observations(X, expected_dim: int) -> np.ndarray:
    """Coerce to a finite 2-D float64 batch with the fitted observation width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"observations must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] != expected_dim:
        raise ValueError(
            f"observation width {arr.shape[1]} does not match the fitted width {expected_dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations must be finite")
    return arr
