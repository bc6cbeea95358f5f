"""Minimum-norm solutions of underdetermined linear systems A z = b.

The l2 case is closed form through a QR factorisation of A^T. The l1 and
l-infinity cases are linear programs solved by a small dense two-phase
simplex method with Bland's rule, so the vertex returned for a non-unique
minimiser is deterministic.
"""
import itertools
import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.linalg import solve_triangular

from .config import config
from .exceptions import (
    CycleLimitError,
    LPInfeasibleError,
    LPUnboundedError,
    SizeLimitError,
)
from .linalg import Matrix, NormKind, Vector, qr_factor, vector_norm

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
ORACLE_MAX_N = 6
ORACLE_MAX_M = 4


class LinearSystem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: Matrix
    b: Vector

    @model_validator(mode="after")
    def _check_dims(self) -> "LinearSystem":
        m, n = self.A.shape
        if self.b.size != m:
            raise ValueError(f"b has length {self.b.size}, A has {m} rows")
        if m > n:
            raise ValueError(f"system is overdetermined ({m} rows, {n} columns)")
        return self


class LinearProgram(BaseModel):
    """min c^T x subject to A_eq x = b_eq, x >= lower (lower defaults to 0)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    c: Vector
    A_eq: Matrix
    b_eq: Vector
    lower: Optional[Vector] = None

    @model_validator(mode="after")
    def _check_dims(self) -> "LinearProgram":
        rows, cols = self.A_eq.shape
        if self.c.size != cols:
            raise ValueError(f"cost has length {self.c.size}, expected {cols}")
        if self.b_eq.size != rows:
            raise ValueError(f"b_eq has length {self.b_eq.size}, expected {rows}")
        if self.lower is not None and self.lower.size != cols:
            raise ValueError(f"lower has length {self.lower.size}, expected {cols}")
        return self

    @property
    def lower_bounds(self) -> np.ndarray:
        if self.lower is None:
            return np.zeros(self.c.size)
        return self.lower


# --- Simplex ---


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


class _SimplexRun:
    """Tableau iterations shared by both phases; counts pivots against a cap."""

    def __init__(self, cap: int):
        self.cap = cap
        self.pivots = 0

    def optimise(self, T: np.ndarray, basis: list[int], cost: np.ndarray, entering: int):
        """Pivot until optimal; only columns < entering may enter."""
        cost_tol = PIVOT_TOL * max(1.0, float(np.max(np.abs(cost), initial=0.0)))
        while True:
            reduced = cost[:entering] - cost[basis] @ T[:, :entering]
            candidates = np.flatnonzero(reduced < -cost_tol)
            if candidates.size == 0:
                return
            col = int(candidates[0])  # Bland: smallest index enters
            column = T[:, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                raise LPUnboundedError("ERROR: linear program is unbounded.")
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            row = int(min(tied, key=lambda i: basis[i]))  # Bland: smallest basic index leaves
            self.pivots += 1
            if self.pivots > self.cap:
                raise CycleLimitError(f"ERROR: simplex exceeded {self.cap} pivots.")
            _pivot(T, basis, row, col)


def simplex_solve(lp: LinearProgram) -> tuple[float, np.ndarray]:
    """Two-phase primal simplex. Returns (optimal value, vertex solution)."""
    lower = lp.lower_bounds
    A = lp.A_eq.copy()
    b = lp.b_eq - A @ lower
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    # unit row scale: pivot tolerances are relative to each constraint
    scale = np.max(np.abs(A), axis=1, initial=0.0)
    scale[scale == 0.0] = 1.0
    A /= scale[:, None]
    b = b / scale
    rows, cols = A.shape

    factor = int(config.get("Simplex", "iteration_factor", 50))
    feas_tol = float(config.get("Simplex", "feasibility_tol", 1e-8))
    run = _SimplexRun(cap=factor * (rows + cols))

    # Phase 1: artificial identity basis
    T = np.zeros((rows, cols + rows + 1))
    T[:, :cols] = A
    T[:, cols:cols + rows] = np.eye(rows)
    T[:, -1] = b
    basis = list(range(cols, cols + rows))
    phase1_cost = np.concatenate([np.zeros(cols), np.ones(rows)])
    run.optimise(T, basis, phase1_cost, entering=cols)

    infeasibility = float(phase1_cost[basis] @ T[:, -1])
    if infeasibility > feas_tol * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        raise LPInfeasibleError(
            f"ERROR: linear program is infeasible (phase 1 value {infeasibility:.3e})."
        )

    # Drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(rows):
        if basis[i] < cols:
            keep.append(i)
            continue
        nonzero = np.flatnonzero(np.abs(T[i, :cols]) > PIVOT_TOL)
        if nonzero.size == 0:
            logger.debug(f"Dropping redundant constraint row {i}")
            continue
        _pivot(T, basis, i, int(nonzero[0]))
        keep.append(i)
    T = np.delete(T[keep], np.s_[cols:cols + rows], axis=1)
    basis = [basis[i] for i in keep]

    # Phase 2
    run.optimise(T, basis, lp.c, entering=cols)
    logger.debug(f"Simplex finished after {run.pivots} pivots")

    # Recompute basic values from the original data for accuracy
    x = np.zeros(cols)
    try:
        x[basis] = np.linalg.solve(A[keep][:, basis], b[keep])
    except np.linalg.LinAlgError:
        x[basis] = T[:, -1]
    x[(x < 0) & (x > -feas_tol * max(1.0, float(np.max(np.abs(x), initial=0.0))))] = 0.0
    x = x + lower
    return float(lp.c @ x), x


# --- LP reformulations ---


def _l1_program(system: LinearSystem) -> LinearProgram:
    """z = p - q with p, q >= 0, minimise sum(p + q)."""
    n = system.A.shape[1]
    return LinearProgram(
        c=np.ones(2 * n),
        A_eq=np.hstack([system.A, -system.A]),
        b_eq=system.b,
    )


def _linf_program(system: LinearSystem) -> LinearProgram:
    """z = w - t with 0 <= w <= 2t (slack s = 2t - w), minimise t.

    Variable order is (w, t, s).
    """
    A = system.A
    m, n = A.shape
    top = np.hstack([A, -A.sum(axis=1, keepdims=True), np.zeros((m, n))])
    bottom = np.hstack([np.eye(n), -2.0 * np.ones((n, 1)), np.eye(n)])
    c = np.zeros(2 * n + 1)
    c[n] = 1.0
    return LinearProgram(
        c=c,
        A_eq=np.vstack([top, bottom]),
        b_eq=np.concatenate([system.b, np.zeros(n)]),
    )


# --- Minimum-norm steps ---


def min_norm_l2(system: LinearSystem) -> np.ndarray:
    """A^T (A A^T)^{-1} b through A^T = Q R."""
    Q, R = qr_factor(system.A.T)
    w = solve_triangular(R, system.b, trans='T', lower=False)
    return Q @ w


def min_norm_l1(system: LinearSystem) -> np.ndarray:
    qr_factor(system.A.T)
    n = system.A.shape[1]
    _, v = simplex_solve(_l1_program(system))
    return v[:n] - v[n:]


def min_norm_linf(system: LinearSystem) -> np.ndarray:
    qr_factor(system.A.T)
    n = system.A.shape[1]
    _, v = simplex_solve(_linf_program(system))
    return v[:n] - v[n]


_DISPATCH = {
    NormKind.L1: min_norm_l1,
    NormKind.L2: min_norm_l2,
    NormKind.LINF: min_norm_linf,
}


def min_norm(system: LinearSystem, kind: NormKind) -> np.ndarray:
    return _DISPATCH[NormKind(kind)](system)


def oracle_min_norm(system: LinearSystem, kind: NormKind) -> float:
    """Optimal norm by enumerating every basis of the LP reformulation.

    Test oracle only: limited to n <= 6, m <= 4.
    """
    m, n = system.A.shape
    if n > ORACLE_MAX_N or m > ORACLE_MAX_M:
        raise SizeLimitError(
            f"ERROR: oracle limited to n <= {ORACLE_MAX_N}, m <= {ORACLE_MAX_M} (got n={n}, m={m})."
        )
    kind = NormKind(kind)
    if kind is NormKind.L2:
        return vector_norm(np.linalg.pinv(system.A) @ system.b, NormKind.L2)

    lp = _l1_program(system) if kind is NormKind.L1 else _linf_program(system)
    rows, cols = lp.A_eq.shape
    best = np.inf
    for subset in itertools.combinations(range(cols), rows):
        B = lp.A_eq[:, subset]
        if np.linalg.matrix_rank(B) < rows:
            continue
        xB = np.linalg.solve(B, lp.b_eq)
        if np.all(xB >= -1e-9):
            best = min(best, float(lp.c[list(subset)] @ xB))
    if not np.isfinite(best):
        raise LPInfeasibleError("ERROR: no feasible basis found.")
    return best
