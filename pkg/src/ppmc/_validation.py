"""Input validation helpers shared by the public functions and estimators."""
import numbers

import numpy as np

from .exceptions import DimensionError, DomainError


def check_matrix(a, name="matrix", allow_nan=False):
    """Return ``a`` as a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if allow_nan:
        if np.isinf(arr).any():
            raise DomainError(f"{name} contains infinite entries")
    elif not np.isfinite(arr).all():
        raise DomainError(f"{name} contains NaN or infinite entries")
    return arr


def check_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains NaN or infinite entries")
    return arr


def check_mask(mask, shape=None, name="mask"):
    """Return ``mask`` as a boolean array after checking every entry is 0 or 1."""
    arr = np.asarray(mask)
    if arr.dtype != bool:
        numeric = arr.astype(np.float64)
        if not np.isin(numeric, (0.0, 1.0)).all():
            raise DomainError(f"{name} entries must be exactly 0 or 1")
        arr = numeric.astype(bool)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} shape {arr.shape} does not match {tuple(shape)}")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {names[0]}{a.shape} vs {names[1]}{b.shape}")


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_seed(seed):
    """Validate an unsigned 64-bit seed."""
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise DomainError(f"seed must be an unsigned integer, got {seed!r}")
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(seed)


def rng_from_seed(seed):
    return np.random.default_rng(check_seed(seed))


def child_seeds(seed, n):
    """Derive ``n`` independent integer seeds from ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed))
    return [int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(n)]
