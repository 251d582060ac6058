"""Low-rank matrix completion solvers.

``pplnm_qr`` runs an ADMM loop over a QR-maintained tri-factorization
``X ~ L @ D @ R`` (L column-orthonormal, R row-orthonormal) and shrinks the
columns of the core ``D`` with threshold ``1 / mu``. ``alt_min`` is the
alternating least-squares baseline.

Both solvers take the (possibly masked) data matrix with zeros at missing
positions plus the observation mask, and return a :class:`CompletionResult`.
The step functions ``init_state``, ``update_factors``, ``shrink_columns``,
``update_x`` and ``update_y_mu`` are exposed for inspection and testing.
"""
import time
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_mask, check_matrix, check_same_shape
from .exceptions import DimensionError, DomainError, SolverDivergenceError
from .matrix import qr_thin

MAGNITUDE_GUARD = 1e100
RIDGE = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    rank: int
    mu0: float = 1.0
    rho: float = 1.5
    eps: float = 1e-24
    max_iters: int = 100

    def __post_init__(self):
        check_count(self.rank, "rank")
        check_count(self.max_iters, "max_iters")
        if not self.mu0 > 0:
            raise DomainError(f"mu0 must be positive, got {self.mu0}")
        if not self.rho >= 1:
            raise DomainError(f"rho must be >= 1, got {self.rho}")
        if not self.eps >= 0:
            raise DomainError(f"eps must be nonnegative, got {self.eps}")


@dataclass(frozen=True)
class TriFactor:
    lf: np.ndarray
    dc: np.ndarray
    rf: np.ndarray

    def product(self):
        return self.lf @ (self.dc @ self.rf)


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    y: np.ndarray
    mu: float
    factors: TriFactor
    iter: int = 0
    last_step_sq: float = float("inf")
    # cached factors.product() from the latest update_x
    z: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class CompletionResult:
    recovered: np.ndarray
    iterations_run: int
    step_history: list
    wall_time: float

    def report(self):
        return {
            "iterations_run": self.iterations_run,
            "wall_time_s": self.wall_time,
            "step_history": [float(s) for s in self.step_history],
        }


def _check_problem(m_enc, mask, rank):
    m_enc = check_matrix(m_enc, "m_enc")
    mask = check_mask(mask, m_enc.shape)
    if rank > min(m_enc.shape):
        raise DomainError(f"rank {rank} exceeds min(S, T) = {min(m_enc.shape)}")
    return m_enc, mask


def init_state(m_enc, mask, cfg):
    m_enc, mask = _check_problem(m_enc, mask, cfg.rank)
    S, T = m_enc.shape
    r = cfg.rank
    factors = TriFactor(np.eye(S, r), np.eye(r), np.eye(r, T))
    return SolverState(
        x=np.where(mask, m_enc, 0.0),
        y=np.zeros((S, T)),
        mu=float(cfg.mu0),
        factors=factors,
    )


def update_factors(state):
    """One sweep of the QR tri-factorization of ``W = x + y / mu``.

    The returned core ``dc`` is the unshrunk ``D_T`` (transpose of the
    triangular factor from the second QR).
    """
    w = state.x + state.y / state.mu
    lf, _ = qr_thin(w @ state.factors.rf.T)
    q, dt_t = qr_thin(w.T @ lf)
    return replace(state, factors=TriFactor(lf, dt_t.T, q.T), z=None)


def shrink_columns(dt, mu):
    """Column-wise soft threshold: each column is scaled by ``max(c - 1/mu, 0) / c``
    where ``c`` is its Euclidean norm. Zero columns stay zero."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    dt = np.asarray(dt, dtype=np.float64)
    norms = np.sqrt(np.sum(dt * dt, axis=0))
    tau = 1.0 / mu
    keep = norms > tau
    scale = np.zeros_like(norms)
    scale[keep] = (norms[keep] - tau) / norms[keep]
    return dt * scale


def update_x(state, m_enc, mask):
    """Fill unobserved entries from the factorization, pin observed ones to data."""
    z = state.factors.product()
    x = np.where(mask, m_enc, z)
    step = float(np.sum((x - state.x) ** 2))
    return replace(state, x=x, z=z, last_step_sq=step)


def update_y_mu(state, rho):
    z = state.z if state.z is not None else state.factors.product()
    y = state.y + state.mu * (state.x - z)
    return replace(state, y=y, mu=state.mu * rho, iter=state.iter + 1)


def _guard(state):
    for name, arr in (("x", state.x), ("y", state.y)):
        peak = np.max(np.abs(arr)) if arr.size else 0.0
        if not np.isfinite(peak) or peak > MAGNITUDE_GUARD:
            raise SolverDivergenceError(
                f"{name} magnitude {peak:.3e} exceeds {MAGNITUDE_GUARD:.0e} (mu={state.mu:.3e})",
                state.iter,
            )


def iterate_pplnm_qr(m_enc, mask, cfg):
    """Yield the solver state after every ADMM iteration."""
    state = init_state(m_enc, mask, cfg)
    m_enc = state.x
    mask = check_mask(mask, m_enc.shape)
    while state.iter < cfg.max_iters:
        state = update_factors(state)
        f = state.factors
        state = replace(state, factors=TriFactor(f.lf, shrink_columns(f.dc, state.mu), f.rf))
        state = update_x(state, m_enc, mask)
        state = update_y_mu(state, cfg.rho)
        _guard(state)
        yield state
        if state.last_step_sq < cfg.eps:
            break


def pplnm_qr(m_enc, mask, cfg):
    """Complete ``m_enc`` (zeros off the mask support) at rank ``cfg.rank``.

    Stops once the squared Frobenius change of ``x`` drops below ``cfg.eps``
    or after ``cfg.max_iters`` iterations. Pass ``eps=0`` to always run the
    full iteration budget.
    """
    history = []
    state = None
    start = time.perf_counter()
    for state in iterate_pplnm_qr(m_enc, mask, cfg):
        history.append(state.last_step_sq)
    elapsed = time.perf_counter() - start
    return CompletionResult(state.x, state.iter, history, elapsed)


def svd_topk(a, k):
    """Leading ``k`` singular triplets, ``sigma`` in nonincreasing order."""
    a = check_matrix(a, "a")
    k = check_count(k, "k")
    if k > min(a.shape):
        raise DomainError(f"k={k} exceeds min(S, T) = {min(a.shape)}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u[:, :k], s[:k], vt[:k].T


def _solve_rows(factor, data, mask):
    """Least-squares coefficients for each row of ``data`` on its observed entries.

    Row ``i`` solves ``min ||data[i, obs] - coef @ factor[obs].T||`` with the
    normal equations, adding a ``RIDGE * I`` term when they are singular.
    """
    n, r = data.shape[0], factor.shape[1]
    out = np.empty((n, r))
    eye = np.eye(r)
    for i in range(n):
        obs = mask[i]
        sub = factor[obs]
        gram = sub.T @ sub
        rhs = sub.T @ data[i, obs]
        try:
            out[i] = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            out[i] = np.linalg.solve(gram + RIDGE * eye, rhs)
    return out


def alt_min(m_enc, mask, cfg):
    """Alternating minimization baseline with spectral initialization."""
    m_enc, mask = _check_problem(m_enc, mask, cfg.rank)
    m_enc = np.where(mask, m_enc, 0.0)
    start = time.perf_counter()
    u, _, _ = svd_topk(m_enc, cfg.rank)
    x = np.where(mask, m_enc, 0.0)
    history = []
    for it in range(1, cfg.max_iters + 1):
        v = _solve_rows(u, m_enc.T, mask.T)
        u = _solve_rows(v, m_enc, mask)
        x_new = np.where(mask, m_enc, u @ v.T)
        step = float(np.sum((x_new - x) ** 2))
        x = x_new
        history.append(step)
        if not np.isfinite(step) or np.max(np.abs(x)) > MAGNITUDE_GUARD:
            raise SolverDivergenceError("alternating minimization diverged", it)
        if step < cfg.eps:
            break
    elapsed = time.perf_counter() - start
    return CompletionResult(x, len(history), history, elapsed)


ALGORITHMS = {"pplnm-qr": pplnm_qr, "alt-min": alt_min}


class _BaseCompleter(TransformerMixin, BaseEstimator):
    _algorithm = None

    def __init__(self, rank=1, mu0=1.0, rho=1.5, eps=1e-24, max_iters=100):
        self.rank = rank
        self.mu0 = mu0
        self.rho = rho
        self.eps = eps
        self.max_iters = max_iters

    def _config(self):
        return SolverConfig(self.rank, self.mu0, self.rho, self.eps, self.max_iters)

    def _solve(self, X, mask):
        X = check_matrix(X, "X", allow_nan=True)
        if mask is None:
            mask = ~np.isnan(X)
        else:
            mask = check_mask(mask, X.shape) & ~np.isnan(X)
        data = np.where(mask, np.nan_to_num(X, nan=0.0), 0.0)
        return type(self)._algorithm(data, mask, self._config())

    def fit(self, X, y=None, mask=None):
        """Complete ``X``. Missing entries are NaN or flagged by ``mask == 0``."""
        result = self._solve(X, mask)
        self.completion_ = result.recovered
        self.n_iter_ = result.iterations_run
        self.step_history_ = list(result.step_history)
        self.wall_time_ = result.wall_time
        self.n_features_in_ = self.completion_.shape[1]
        return self

    def transform(self, X, mask=None):
        check_is_fitted(self, "completion_")
        X = check_matrix(X, "X", allow_nan=True)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return self._solve(X, mask).recovered

    def fit_transform(self, X, y=None, mask=None):
        return self.fit(X, mask=mask).completion_


class PPLNMQRCompleter(_BaseCompleter):
    """Matrix completion by ADMM over a QR tri-factorization with L2,1 core shrinkage.

    Parameters
    ----------
    rank : int
        Target rank of the tri-factorization.
    mu0 : float
        Initial penalty; the shrinkage threshold is ``1 / mu``.
    rho : float
        Penalty growth factor per iteration (>= 1).
    eps : float
        Stop once the squared change of the iterate falls below this value.
    max_iters : int

    Attributes
    ----------
    completion_ : ndarray
        Completed matrix; observed entries equal the input.
    n_iter_ : int
    step_history_ : list of float
    wall_time_ : float
    """

    _algorithm = staticmethod(pplnm_qr)


class AltMinCompleter(_BaseCompleter):
    """Alternating least-squares completion; same parameters as
    :class:`PPLNMQRCompleter` (``mu0`` and ``rho`` are ignored)."""

    _algorithm = staticmethod(alt_min)
