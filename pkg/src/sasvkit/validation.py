"""Input validation helpers shared across the package.

All numeric entry points funnel through these checks so estimators and
functional ops reject bad input the same way. Vectors are validated as
1-D float64 arrays; trial feature matrices as 2-D arrays whose width is
a multiple of the embedding dimension.
"""

import numpy as np

from .exceptions import DimMismatchError, ShapeMismatchError, ZeroVectorError

ZERO_NORM_EPS = 1e-12


def as_vector(v, name="vector"):
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite values")
    return arr


def check_same_dim(*vectors, names=None):
    dims = {v.shape[0] for v in vectors}
    if len(dims) > 1:
        labels = names or [f"arg{i}" for i in range(len(vectors))]
        pairs = ", ".join(f"{n}={v.shape[0]}" for n, v in zip(labels, vectors))
        raise DimMismatchError(f"dimension mismatch: {pairs}")
    return dims.pop()


def l2_normalize(v):
    """Return v / ||v||_2.

    Raises ZeroVectorError when the norm is below 1e-12; the result has
    unit norm to within 1e-12.
    """
    arr = as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM_EPS:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:.3e}")
    return arr / norm


def check_trial_features(X, dim, name="X"):
    """Validate a trial feature matrix laid out as [e_test | e_en | e_cm].

    Returns the matrix as a float64 array of shape (n_trials, 3*dim).
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] != 3 * dim:
        raise ShapeMismatchError(
            f"{name} has {arr.shape[1]} columns, expected 3*dim = {3 * dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite values")
    return arr


def split_trial_features(X, dim):
    """Slice [e_test | e_en | e_cm] columns out of a validated matrix."""
    return X[:, :dim], X[:, dim : 2 * dim], X[:, 2 * dim :]


def normalize_rows(M):
    """Row-wise L2 normalization; raises on any zero row."""
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms < ZERO_NORM_EPS):
        bad = int(np.argmin(norms))
        raise ZeroVectorError(f"row {bad} has norm {norms[bad]:.3e}")
    return M / norms[:, None]
