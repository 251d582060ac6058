"""In-process simulation of the outsourced completion round trip.

Users mask their columns locally and upload them with their observed bits;
the cloud assembles the masked matrix, completes it, and hands each column
back for local unmasking.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_matrix, child_seeds
from .crypto import DEFAULT_PSI_MIN, decrypt_column, encrypt_column, gen_private_keys, gen_public_matrix
from .exceptions import DimensionError, DomainError
from .matrix import gen_mask, rse
from .solver import SolverConfig, pplnm_qr


@dataclass(frozen=True)
class UploadRecord:
    user_id: str
    column: list
    observed: list

    def to_json(self):
        return json.dumps({"user_id": self.user_id, "column": self.column, "observed": self.observed})

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(d["user_id"], list(d["column"]), [int(b) for b in d["observed"]])


@dataclass(frozen=True)
class DownloadRecord:
    user_id: str
    column: list

    def to_json(self):
        return json.dumps({"user_id": self.user_id, "column": self.column})

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(d["user_id"], list(d["column"]))


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_jsonl(path, record_type):
    with open(path) as fh:
        return [record_type.from_json(line) for line in fh if line.strip()]


class UserAgent:
    """Holds one user's data column, observed bits and private keys."""

    def __init__(self, user_id, data, observed, public, keys):
        self.user_id = user_id
        self.data = np.asarray(data, dtype=float)
        self.observed = np.asarray(observed, dtype=bool)
        self.public = public
        self.keys = keys

    def upload(self):
        enc = encrypt_column(self.data, self.observed, self.public, self.keys)
        return UploadRecord(
            self.user_id, [float(x) for x in enc.data], self.observed.astype(int).tolist()
        )

    def decrypt(self, record):
        if record.user_id != self.user_id:
            raise ValueError(f"record for {record.user_id!r} sent to {self.user_id!r}")
        return decrypt_column(np.array(record.column), self.public, self.keys)


class CloudNode:
    def __init__(self, cfg):
        self.cfg = cfg
        self.result = None

    def assemble(self, uploads):
        if not uploads:
            raise DimensionError("no uploads received")
        lengths = {len(u.column) for u in uploads} | {len(u.observed) for u in uploads}
        if len(lengths) != 1:
            raise DimensionError(f"uploaded columns have differing lengths {sorted(lengths)}")
        self.user_order = [u.user_id for u in uploads]
        matrix = np.column_stack([u.column for u in uploads]).astype(float)
        mask = np.column_stack([u.observed for u in uploads]).astype(bool)
        return matrix, mask

    def complete(self, uploads):
        matrix, mask = self.assemble(uploads)
        self.result = pplnm_qr(matrix, mask, self.cfg)
        rec = self.result.recovered
        return [DownloadRecord(uid, [float(x) for x in rec[:, k]]) for k, uid in enumerate(self.user_order)]


@dataclass(frozen=True)
class SessionConfig:
    user_count: int
    public_rank: int
    data_rank: int
    alpha: float
    solver: SolverConfig | None = None
    completion_rank: int | None = None
    seed: int = 0
    psi_min: float = DEFAULT_PSI_MIN

    def __post_init__(self):
        check_count(self.user_count, "user_count")
        check_count(self.public_rank, "public_rank")
        check_count(self.data_rank, "data_rank")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def effective_rank(self):
        if self.completion_rank is not None:
            return self.completion_rank
        return self.data_rank + self.public_rank

    def solver_config(self):
        base = self.solver or SolverConfig(self.effective_rank)
        return SolverConfig(self.effective_rank, base.mu0, base.rho, base.eps, base.max_iters)


@dataclass
class SessionReport:
    per_user_rse: dict
    aggregate_rse: float
    solver_report: dict
    leakage_probe: float
    recovered: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "per_user_rse": self.per_user_rse,
            "aggregate_rse": self.aggregate_rse,
            "leakage_probe": self.leakage_probe,
            "solver_report": self.solver_report,
        }


def _pearson_abs(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0.0:
        return 0.0
    return float(min(1.0, abs(np.dot(a, b)) / denom))


def leakage_probe(plain, encrypted, mask=None):
    """Max over columns of the absolute Pearson correlation between the plain
    and masked column on observed entries. Constant columns count as 0."""
    plain = check_matrix(plain, "plain")
    encrypted = check_matrix(encrypted, "encrypted")
    if plain.shape != encrypted.shape:
        raise DimensionError(f"shape mismatch {plain.shape} vs {encrypted.shape}")
    mask = np.ones(plain.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    best = 0.0
    for k in range(plain.shape[1]):
        obs = mask[:, k]
        if obs.sum() < 2:
            continue
        best = max(best, _pearson_abs(plain[obs, k], encrypted[obs, k]))
    return best


def make_agents(truth, cfg, mask=None):
    """Build the user agents for ``truth`` (rows x users) under ``cfg``.

    Returns ``(agents, public, mask)``; the mask is drawn at ``cfg.alpha``
    unless given.
    """
    truth = check_matrix(truth, "truth")
    S, K = truth.shape
    if K != cfg.user_count:
        raise DimensionError(f"truth has {K} columns, config expects {cfg.user_count} users")
    pub_seed, mask_seed, *key_seeds = child_seeds(cfg.seed, K + 2)
    public = gen_public_matrix(S, cfg.public_rank, pub_seed)
    if mask is None:
        mask = gen_mask(S, K, cfg.alpha, mask_seed)
    agents = []
    for k in range(K):
        uid = f"user_{k:03d}"
        keys = gen_private_keys(cfg.public_rank, cfg.psi_min, key_seeds[k], user_id=uid)
        agents.append(UserAgent(uid, truth[:, k], mask[:, k], public, keys))
    return agents, public, mask


def run_session(truth, cfg, mask=None):
    """Mask, upload, complete, download and unmask ``truth``; report per-user RSE."""
    truth = check_matrix(truth, "truth")
    if cfg.effective_rank > min(truth.shape):
        raise DomainError(
            f"completion rank {cfg.effective_rank} exceeds min(S, K) = {min(truth.shape)}"
        )
    agents, _, mask = make_agents(truth, cfg, mask)
    uploads = [a.upload() for a in agents]
    cloud = CloudNode(cfg.solver_config())
    downloads = cloud.complete(uploads)
    recovered = np.column_stack([a.decrypt(d) for a, d in zip(agents, downloads)])

    encrypted = np.column_stack([u.column for u in uploads])
    per_user = {a.user_id: rse(recovered[:, [k]], truth[:, [k]]) for k, a in enumerate(agents)}
    return SessionReport(
        per_user_rse=per_user,
        aggregate_rse=rse(recovered, truth),
        solver_report=cloud.result.report(),
        leakage_probe=leakage_probe(truth, encrypted, mask),
        recovered=recovered,
    )
