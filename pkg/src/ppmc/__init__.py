"""Privacy-preserving low-rank matrix completion."""
__version__ = "0.1.0"

from .crypto import (
    EncryptedColumn,
    MaskingEncryptor,
    PrivateKeys,
    PublicMatrix,
    decrypt_column,
    encrypt_column,
    gen_private_keys,
    gen_public_matrix,
)
from .exceptions import (
    DimensionError,
    DomainError,
    EmptyTrajectoryError,
    ParseError,
    SolverDivergenceError,
)
from .matrix import (
    frobenius_norm,
    gen_low_rank,
    gen_mask,
    hadamard,
    l21_norm,
    qr_thin,
    rse,
    synthetic_rank,
)
from .solver import (
    AltMinCompleter,
    CompletionResult,
    PPLNMQRCompleter,
    SolverConfig,
    alt_min,
    pplnm_qr,
    shrink_columns,
    svd_topk,
)

__all__ = [
    "AltMinCompleter",
    "CompletionResult",
    "DimensionError",
    "DomainError",
    "EmptyTrajectoryError",
    "EncryptedColumn",
    "MaskingEncryptor",
    "PPLNMQRCompleter",
    "ParseError",
    "PrivateKeys",
    "PublicMatrix",
    "SolverConfig",
    "SolverDivergenceError",
    "alt_min",
    "decrypt_column",
    "encrypt_column",
    "frobenius_norm",
    "gen_low_rank",
    "gen_mask",
    "gen_private_keys",
    "gen_public_matrix",
    "hadamard",
    "l21_norm",
    "pplnm_qr",
    "qr_thin",
    "rse",
    "shrink_columns",
    "svd_topk",
    "synthetic_rank",
]
