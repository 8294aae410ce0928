"""Input checking shared by the estimators and the functional API."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


class DimensionError(ValueError):
    """Raised when an array does not have the dimension an operation needs."""


class ArchitectureError(ValueError):
    """Raised for malformed network width lists."""


class NotConvergedError(RuntimeError):
    """An iterative solve stopped before reaching its tolerance.

    The partial result is attached as ``result`` so callers can still use it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


def check_points(X, dim: int | None = None, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite float64 array of shape (n, d)."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"{name} has {X.shape[1]} columns, expected {dim}")
    return X


def check_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {dim}")
    return x
