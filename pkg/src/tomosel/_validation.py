"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_observations(X, y, design) -> tuple[np.ndarray, np.ndarray]:
    """Validate ``(nu, s)`` rows against the acquisition grid and reshape ``y`` to ``(K, q)``."""
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    expected = design.sampling_design()
    if X.shape != expected.shape:
        raise ValueError(
            f"expected {expected.shape[0]} observations with {expected.shape[1]} columns, got {X.shape}; "
            "use sampling_design() for the acquisition grid"
        )
    if not np.allclose(X, expected, rtol=0, atol=1e-9):
        bad = int(np.argmax(np.any(np.abs(X - expected) > 1e-9, axis=1)))
        raise ValueError(f"row {bad} of X does not match the acquisition grid")
    return X, y.reshape(design.n_directions, design.q)


def check_points(X, d: int) -> np.ndarray:
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != d:
        raise ValueError(f"expected points with {d} coordinates, got {X.shape[1]}")
    return X
