"""Dense matrix primitives: Hadamard product, norms, thin QR, RSE and
seeded generators for synthetic low-rank data and observation masks.

Matrices are plain 2-D ``float64`` numpy arrays; observation masks are
boolean arrays of the same shape (``True`` marks an observed entry).
"""
import csv
import math

import numpy as np

from ._validation import (
    check_count,
    check_mask,
    check_matrix,
    check_same_shape,
    rng_from_seed,
)
from .exceptions import DimensionError, DomainError


def hadamard(a, b):
    """Entrywise product of two equally shaped matrices (``b`` may be a mask)."""
    a = check_matrix(a, "a")
    b = np.asarray(b)
    if b.dtype == bool:
        check_same_shape(a, b, ("a", "b"))
        return np.where(b, a, 0.0)
    b = check_matrix(b, "b")
    check_same_shape(a, b, ("a", "b"))
    return a * b


def frobenius_norm(a):
    a = check_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def l21_norm(a):
    """Sum of the Euclidean norms of the columns of ``a``."""
    a = check_matrix(a)
    return float(np.sum(np.sqrt(np.sum(a * a, axis=0))))


def qr_thin(a):
    """Thin QR factorization with a nonnegative diagonal on the triangular factor.

    Parameters
    ----------
    a : array of shape (S, r) with S >= r

    Returns
    -------
    q : array of shape (S, r)
        Orthonormal columns.
    rtri : array of shape (r, r)
        Upper triangular, ``q @ rtri == a``. Zero diagonal entries are left
        as they are, so rank-deficient input is accepted.
    """
    a = check_matrix(a, "a")
    S, r = a.shape
    if S < r:
        raise DimensionError(f"qr_thin needs rows >= cols, got {a.shape}")
    q, rtri = np.linalg.qr(a, mode="reduced")
    signs = np.sign(np.diag(rtri))
    signs[signs == 0] = 1.0
    return q * signs, rtri * signs[:, None]


def rse(recovered, truth):
    """Relative error ``||truth - recovered||_F / ||truth||_F``."""
    recovered = check_matrix(recovered, "recovered")
    truth = check_matrix(truth, "truth")
    check_same_shape(recovered, truth, ("recovered", "truth"))
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise DomainError("rse is undefined for an all-zero truth matrix")
    return float(np.linalg.norm(truth - recovered) / denom)


def synthetic_rank(S, T, fraction=0.01):
    """Rank used for the synthetic benchmarks, ``max(1, ceil(fraction * min(S, T)))``."""
    return max(1, math.ceil(fraction * min(S, T)))


def gen_low_rank(S, T, r, seed):
    """Product of S x r and r x T standard-normal factors."""
    S = check_count(S, "S")
    T = check_count(T, "T")
    r = check_count(r, "r")
    if r > min(S, T):
        raise DomainError(f"rank {r} exceeds min(S, T) = {min(S, T)}")
    rng = rng_from_seed(seed)
    left = rng.standard_normal((S, r))
    right = rng.standard_normal((r, T))
    return left @ right


def gen_mask(S, T, alpha, seed):
    """Bernoulli observation mask; each entry is missing with probability ``alpha``."""
    S = check_count(S, "S")
    T = check_count(T, "T")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"loss rate alpha must lie in [0, 1], got {alpha}")
    rng = rng_from_seed(seed)
    return rng.random((S, T)) >= alpha


def write_matrix_csv(path, a):
    """Write ``a`` as CSV with 17 significant digits (exact float64 roundtrip)."""
    a = check_matrix(a)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in a:
            writer.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    if not rows:
        raise DimensionError(f"{path}: empty matrix file")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise DimensionError(f"{path}: ragged rows {sorted(widths)}")
    return check_matrix(np.array(rows), str(path))


def write_mask_csv(path, mask):
    mask = check_mask(mask)
    if mask.ndim != 2:
        raise DimensionError("mask must be 2-D")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mask.astype(np.int8):
            writer.writerow(row.tolist())


def read_mask_csv(path):
    with open(path, newline="") as fh:
        rows = [[int(float(x)) for x in row] for row in csv.reader(fh) if row]
    if not rows:
        raise DimensionError(f"{path}: empty mask file")
    return check_mask(np.array(rows), name=str(path))
