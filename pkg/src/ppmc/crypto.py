"""Additive masking of per-user data columns.

Each user holds private convex weights ``psi = (psi_0, ..., psi_I)`` and
shares a public matrix ``P`` (S x I). A column ``m`` is masked as
``(psi_0 * m + P @ psi[1:]) * observed`` and unmasked with
``(m_hat - P @ psi[1:]) / psi_0``.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_count,
    check_mask,
    check_matrix,
    check_seed,
    check_vector,
    child_seeds,
    rng_from_seed,
)
from .exceptions import DimensionError, DomainError

DEFAULT_PSI_MIN = 0.3


@dataclass(frozen=True)
class PublicMatrix:
    p: np.ndarray

    def __post_init__(self):
        p = check_matrix(self.p, "public matrix")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def rows(self):
        return self.p.shape[0]

    @property
    def key_count(self):
        return self.p.shape[1]


@dataclass(frozen=True)
class PrivateKeys:
    """Convex weights ``psi_0..psi_I``; ``psi_0`` scales the user's own data."""

    psi: np.ndarray
    psi_min: float = DEFAULT_PSI_MIN
    seed: int | None = None
    user_id: str | None = None

    def __post_init__(self):
        psi = check_vector(self.psi, "psi")
        if psi.size < 2:
            raise DimensionError("psi needs psi_0 and at least one public-key weight")
        if (psi < 0).any() or (psi > 1).any():
            raise DomainError("every psi_i must lie in [0, 1]")
        if abs(psi.sum() - 1.0) > 1e-12:
            raise DomainError(f"psi must sum to 1, got {psi.sum()!r}")
        if psi[0] < self.psi_min:
            raise DomainError(f"psi_0={psi[0]} is below psi_min={self.psi_min}")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def psi0(self):
        return float(self.psi[0])

    @property
    def key_count(self):
        return self.psi.size - 1

    def to_dict(self):
        return {
            "user_id": self.user_id,
            "psi": [float(x) for x in self.psi],
            "psi_min": self.psi_min,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["psi"], dtype=float), d["psi_min"], d.get("seed"), d.get("user_id"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class EncryptedColumn:
    data: np.ndarray
    user_id: str | None = None
    observed: np.ndarray | None = field(default=None, repr=False)


def gen_public_matrix(S, I, seed):
    """S x I matrix of i.i.d. standard-normal public keys."""
    S = check_count(S, "S")
    I = check_count(I, "I")
    return PublicMatrix(rng_from_seed(seed).standard_normal((S, I)))


def gen_private_keys(I, psi_min=DEFAULT_PSI_MIN, seed=0, user_id=None):
    """Draw ``psi_0`` uniformly from ``[psi_min, 1]`` and split the remaining
    mass over ``psi_1..psi_I`` by normalized uniform draws."""
    I = check_count(I, "I")
    if not 0.0 < psi_min < 1.0:
        raise DomainError(f"psi_min must lie in (0, 1), got {psi_min}")
    seed = check_seed(seed)
    rng = rng_from_seed(seed)
    psi0 = rng.uniform(psi_min, 1.0)
    draws = rng.random(I)
    total = draws.sum()
    if total == 0.0:
        draws = np.ones(I)
        total = float(I)
    rest = draws / total * (1.0 - psi0)
    return PrivateKeys(np.concatenate(([psi0], rest)), psi_min, seed, user_id)


def _check_keys(pub, keys):
    if keys.key_count != pub.key_count:
        raise DimensionError(
            f"private keys hold {keys.key_count} public-key weights, "
            f"public matrix has {pub.key_count} columns"
        )


def encrypt_column(m, mask_col, pub, keys):
    m = check_vector(m, "m")
    mask_col = check_mask(mask_col, name="mask_col")
    if mask_col.shape != m.shape or m.shape[0] != pub.rows:
        raise DimensionError(
            f"length mismatch: m={m.shape[0]}, mask={mask_col.shape}, public rows={pub.rows}"
        )
    _check_keys(pub, keys)
    data = np.where(mask_col, keys.psi[0] * m + pub.p @ keys.psi[1:], 0.0)
    return EncryptedColumn(data, keys.user_id, mask_col)


def decrypt_column(m_hat, pub, keys):
    m_hat = check_vector(m_hat, "m_hat")
    if m_hat.shape[0] != pub.rows:
        raise DimensionError(f"length {m_hat.shape[0]} does not match public rows {pub.rows}")
    _check_keys(pub, keys)
    if keys.psi[0] == 0.0:
        raise DomainError("cannot decrypt with psi_0 == 0")
    return (m_hat - pub.p @ keys.psi[1:]) / keys.psi[0]


class MaskingEncryptor(BaseEstimator, TransformerMixin):
    """Column-wise masking of a data matrix whose columns belong to distinct users.

    ``fit`` draws one shared public matrix and per-column private keys,
    ``transform`` masks, ``inverse_transform`` unmasks.

    Parameters
    ----------
    public_rank : int
        Number of public-key columns ``I``.
    psi_min : float
        Lower bound on ``psi_0``; decryption amplifies error by ``1 / psi_0``.
    seed : int
    """

    def __init__(self, public_rank=5, psi_min=DEFAULT_PSI_MIN, seed=0):
        self.public_rank = public_rank
        self.psi_min = psi_min
        self.seed = seed

    def fit(self, X, y=None):
        X = check_matrix(X, "X", allow_nan=True)
        S, K = X.shape
        pub_seed, *key_seeds = child_seeds(self.seed, K + 1)
        self.public_ = gen_public_matrix(S, self.public_rank, pub_seed)
        self.keys_ = [
            gen_private_keys(self.public_rank, self.psi_min, s, user_id=f"user_{k:03d}")
            for k, s in enumerate(key_seeds)
        ]
        self.n_features_in_ = K
        return self

    def _check_columns(self, X):
        check_is_fitted(self, "keys_")
        if X.shape != (self.public_.rows, len(self.keys_)):
            raise DimensionError(
                f"expected shape {(self.public_.rows, len(self.keys_))}, got {X.shape}"
            )

    def transform(self, X, mask=None):
        """Mask every column; entries that are NaN or unobserved become 0."""
        X = check_matrix(X, "X", allow_nan=True)
        self._check_columns(X)
        observed = ~np.isnan(X) if mask is None else check_mask(mask, X.shape) & ~np.isnan(X)
        X = np.nan_to_num(X, nan=0.0)
        cols = [
            encrypt_column(X[:, k], observed[:, k], self.public_, keys).data
            for k, keys in enumerate(self.keys_)
        ]
        return np.column_stack(cols)

    def inverse_transform(self, X):
        X = check_matrix(X, "X")
        self._check_columns(X)
        cols = [decrypt_column(X[:, k], self.public_, keys) for k, keys in enumerate(self.keys_)]
        return np.column_stack(cols)
