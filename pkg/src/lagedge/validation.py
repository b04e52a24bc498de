"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np

from .edge import ScalarField
from .exceptions import DataError, InvalidConfig
from .grid import GridSpec, MultifieldDataset


def check_dataset(X) -> MultifieldDataset:
    if not isinstance(X, MultifieldDataset):
        raise DataError(f"expected a MultifieldDataset, got {type(X).__name__}")
    return X


def check_scalar_field(X, grid: GridSpec | None = None):
    """Return ``(values, grid)`` for a ScalarField or a bare 2D/3D array."""
    if isinstance(X, ScalarField):
        return X.values, X.grid
    values = np.asarray(X, dtype=np.float64)
    if values.ndim not in (2, 3):
        raise DataError(f"expected a 2D or 3D field, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DataError("field contains non-finite values")
    grid = grid if grid is not None else GridSpec(values.shape, (1.0,) * values.ndim)
    if tuple(grid.dims) != values.shape:
        raise DataError(f"field shape {values.shape} does not match grid {grid.dims}")
    return values, grid


def check_n_jobs(n_jobs) -> int | None:
    if n_jobs is None:
        return None
    if int(n_jobs) != n_jobs:
        raise InvalidConfig(f"n_jobs must be an integer or None, got {n_jobs!r}")
    return int(n_jobs)
