"""Input checks for multi-view estimators.

Multi-view input is a list (or tuple) of 2-D arrays, one per view, with the
same number of rows.  A :class:`~mvtrust.data.MultiViewDataset` is accepted
wherever a list of views is.
"""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_views(X, n_views: int | None = None, dims=None) -> list[np.ndarray]:
    if hasattr(X, "views"):
        X = X.views
    if isinstance(X, np.ndarray):
        raise TypeError("multi-view input must be a sequence of 2-D arrays, not a single array")
    views = [check_array(A, dtype=np.float64, ensure_all_finite=True) for A in X]
    if not views:
        raise ValueError("no views given")
    if n_views is not None and len(views) != n_views:
        raise ValueError(f"expected {n_views} views, got {len(views)}")
    n = views[0].shape[0]
    for v, A in enumerate(views):
        if A.shape[0] != n:
            raise ValueError(f"view {v} has {A.shape[0]} rows, view 0 has {n}")
    if dims is not None:
        got = [A.shape[1] for A in views]
        if list(dims) != got:
            raise ValueError(f"view dimensions {got} do not match fitted {list(dims)}")
    return views


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValueError(f"y must be 1-D with {n_samples} entries")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if np.any(y < 0):
        raise ValueError("labels must be nonnegative")
    return y
