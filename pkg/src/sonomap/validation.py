"""Input validation helpers used across estimators and feature ops."""

import numpy as np

from .errors import InsufficientDataError, SchemaError


def as_float_array(x, name="array"):
    """Coerce to a float64 ndarray and reject non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} contains non-finite values")
    return arr


def check_2d(x, name="X"):
    """Coerce to a 2-D float array (rows = samples)."""
    arr = as_float_array(x, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise SchemaError(f"{name} must be 1-D or 2-D, got {arr.ndim}-D")
    return arr


def check_paired(X, y, x_name="X", y_name="y"):
    if len(X) != len(y):
        raise SchemaError(
            f"{x_name} and {y_name} lengths differ: {len(X)} vs {len(y)}"
        )
    if len(X) == 0:
        raise InsufficientDataError(f"{x_name} is empty")


def check_dimension(x, expected, name="input"):
    got = np.shape(x)[-1]
    if got != expected:
        raise SchemaError(f"{name} has dimension {got}, expected {expected}")


def check_min_length(x, minimum, name="window"):
    if len(x) < minimum:
        raise InsufficientDataError(
            f"{name} has {len(x)} samples, needs at least {minimum}"
        )
