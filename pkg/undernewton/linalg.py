"""Dense vector/matrix helpers: norms, QR, singular values, covering constants."""
import logging
from enum import Enum
from typing import Annotated

import numpy as np
from pydantic import BeforeValidator
from scipy import linalg as sla

from .exceptions import RankDeficientError

logger = logging.getLogger(__name__)

# sigma_min < RANK_TOL * sigma_max counts as rank deficient
RANK_TOL = 1e-12

_JACOBI_TOL = 1e-15
_JACOBI_MAX_SWEEPS = 60


class NormKind(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @property
    def dual(self) -> "NormKind":
        if self is NormKind.L1:
            return NormKind.LINF
        if self is NormKind.LINF:
            return NormKind.L1
        return NormKind.L2


_ORD = {NormKind.L1: 1, NormKind.L2: 2, NormKind.LINF: np.inf}


def as_vector(value) -> np.ndarray:
    """Coerce to a finite 1-D float array of length >= 1."""
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr


def as_matrix(value) -> np.ndarray:
    """Coerce to a finite 2-D float array with at least one row and column."""
    arr = np.array(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected a non-empty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


Vector = Annotated[np.ndarray, BeforeValidator(as_vector)]
Matrix = Annotated[np.ndarray, BeforeValidator(as_matrix)]


def vector_norm(v, kind: NormKind) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=float), ord=_ORD[NormKind(kind)]))


def dual_norm(v, kind: NormKind) -> float:
    """Norm of v seen as a functional on the space normed by ``kind``."""
    return vector_norm(v, NormKind(kind).dual)


def qr_factor(A) -> tuple[np.ndarray, np.ndarray]:
    """Economic QR with a nonnegative diagonal in R.

    Raises RankDeficientError when A does not have full column rank.
    """
    A = as_matrix(A)
    rows, cols = A.shape
    if cols > rows:
        raise RankDeficientError(
            f"ERROR: a {rows}x{cols} matrix cannot have full column rank."
        )
    Q, R = sla.qr(A, mode='economic')
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    diag = np.abs(np.diag(R))
    if diag.max() == 0.0 or diag.min() < RANK_TOL * diag.max():
        raise RankDeficientError(
            f"ERROR: matrix is rank deficient (|R_ii| ratio {diag.min() / max(diag.max(), 1e-300):.3e})."
        )
    return Q, R


def singular_values(A) -> np.ndarray:
    """All min(m, n) singular values, descending, by one-sided Jacobi.

    The rotations orthogonalise the columns of A (or A^T when A is wide), so
    the small singular values keep their relative accuracy instead of being
    squared away as in an eigen-solve on A A^T.
    """
    A = as_matrix(A)
    U = A.T.copy() if A.shape[0] < A.shape[1] else A.copy()
    k = U.shape[1]
    for sweep in range(_JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= _JACOBI_TOL * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up = U[:, p].copy()
                U[:, p] = c * up - s * U[:, q]
                U[:, q] = s * up + c * U[:, q]
        if not rotated:
            logger.debug(f"Jacobi converged after {sweep + 1} sweeps")
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def smallest_singular_value(A) -> float:
    """sigma_m of an m x n matrix (m <= n); 0.0 when rank deficient."""
    sv = singular_values(A)
    if sv[0] == 0.0 or sv[-1] < RANK_TOL * sv[0]:
        return 0.0
    return float(sv[-1])


def mu_lower_bound(A, domain: NormKind, image: NormKind) -> float:
    """Certified lower bound on min ||A^T h||_* over ||h||_* = 1.

    Exact for Euclidean norms. Otherwise sigma_m is scaled by the
    norm-equivalence constants relating the dual norms to l2:
    ||v||_inf >= ||v||_2 / sqrt(n) and ||h||_2 >= ||h||_1 / sqrt(m).
    """
    A = as_matrix(A)
    m, n = A.shape
    sigma = smallest_singular_value(A)
    domain, image = NormKind(domain), NormKind(image)
    factor = 1.0
    if domain.dual is NormKind.LINF:
        factor /= np.sqrt(n)
    if image.dual is NormKind.L1:
        factor /= np.sqrt(m)
    return float(sigma * factor)
