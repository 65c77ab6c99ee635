"""Input validation shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DimensionMismatch


def check_jet_array(jet, name: str = "jet", levels: int | None = None, m: int | None = None) -> np.ndarray:
    """2-D finite float array of shape (levels, m); 1-D input is read as one channel."""
    arr = np.asarray(jet, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, dtype=float, ensure_min_samples=2, input_name=name)
    if levels is not None and arr.shape[0] != levels:
        raise DimensionMismatch(f"{name} must have {levels} levels, got {arr.shape[0]}")
    if m is not None and arr.shape[1] != m:
        raise DimensionMismatch(f"{name} must have {m} channel(s), got {arr.shape[1]}")
    return arr


def check_times(t, horizon: float) -> np.ndarray:
    times = check_array(np.atleast_1d(np.asarray(t, dtype=float)).reshape(-1, 1), dtype=float, input_name="t").ravel()
    if times.min() < 0 or times.max() > horizon * (1 + 1e-12):
        raise ValueError(f"times must lie in [0, {horizon}]")
    return times
