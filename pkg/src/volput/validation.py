"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils import check_array

from .model import ModelParams

PARAM_NAMES = ("alpha", "beta", "k", "r", "strike", "delta")


def check_params(mapping, warn: bool = True) -> ModelParams:
    """Build :class:`ModelParams` from a mapping, rejecting missing or non-numeric fields."""
    missing = [name for name in PARAM_NAMES if name not in mapping and name != "delta"]
    if missing:
        raise ValueError(f"missing model parameter(s): {', '.join(missing)}")
    values = {}
    for name in PARAM_NAMES:
        if name not in mapping:
            continue
        val = mapping[name]
        if isinstance(val, bool) or not isinstance(val, numbers.Real):
            raise TypeError(f"{name} must be a real number, got {type(val).__name__}")
        values[name] = float(val)
    return ModelParams(**values, warn=warn)


def check_state(X) -> np.ndarray:
    """Validate index levels: a 1-d array or an ``(n, 1)`` column of finite x > 0.

    Returns a flat float array.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim <= 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, ensure_2d=True, dtype=float)
    if arr.shape[1] != 1:
        raise ValueError(f"expected a single state column, got {arr.shape[1]}")
    flat = arr[:, 0]
    if np.any(flat <= 0.0):
        raise ValueError("index levels must be > 0")
    return flat


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive_float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not (
        math.isfinite(value) and value > 0
    ):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return float(value)
