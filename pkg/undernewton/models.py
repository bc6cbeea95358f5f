"""Pydantic models shared by the solvers, the theory module and the CLI."""
import math
from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import config
from .linalg import NormKind, Vector

# --- Solver configuration ---


class Stage(str, Enum):
    DAMPED = "damped"
    PURE = "pure"


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LEFT_TRUST_BALL = "left_trust_ball"
    RANK_DEFICIENT_JACOBIAN = "rank_deficient_jacobian"
    INNER_REDUCTION_LIMIT = "inner_reduction_limit"
    ZERO_GRADIENT = "zero_gradient"
    NON_FINITE = "non_finite"
    SUBSTEP_FAILED = "substep_failed"


class SolverConfig(BaseModel):
    """Run parameters common to every iteration scheme.

    ``stop_tol=None`` means 1e-10 * max(1, u0); ``fd_step=None`` means
    1e-6 * max(1, ||x||_inf) at each Jacobian evaluation; ``growth=None``
    disables beta growth in the adaptive scheme.
    """
    model_config = ConfigDict(frozen=True)

    domain_norm: NormKind = NormKind.L2
    image_norm: NormKind = NormKind.L2
    stop_tol: Optional[float] = None
    max_iter: int = 500
    trust_radius: float = math.inf
    q: float = 0.5
    growth: Optional[float] = None
    max_inner: int = 200
    armijo: bool = False
    armijo_factor: float = 0.5
    armijo_slope: float = 0.25
    fd_step: Optional[float] = None

    @field_validator("q", "armijo_factor")
    @classmethod
    def _open_unit_interval(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("must lie in (0, 1)")
        return v

    @field_validator("armijo_slope")
    @classmethod
    def _slope_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("armijo_slope must lie in (0, 1)")
        return v

    @field_validator("stop_tol", "fd_step")
    @classmethod
    def _positive_or_none(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not v > 0.0:
            raise ValueError("must be positive")
        return v

    @field_validator("max_iter")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("max_iter must be >= 1")
        return v

    @field_validator("max_inner")
    @classmethod
    def _nonnegative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("max_inner must be >= 0")
        return v

    @field_validator("trust_radius")
    @classmethod
    def _positive_radius(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("trust_radius must be positive (math.inf for no ball)")
        return v

    @field_validator("growth")
    @classmethod
    def _growth_above_one(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not v > 1.0:
            raise ValueError("growth must exceed 1")
        return v

    @classmethod
    def from_config(cls, **overrides) -> "SolverConfig":
        """Build from the [Solver]/[Adaptive] sections, then apply overrides."""
        values = {
            "domain_norm": config.get("Solver", "domain_norm", "l2"),
            "image_norm": config.get("Solver", "image_norm", "l2"),
            "max_iter": config.get("Solver", "max_iter", 500),
            "q": config.get("Adaptive", "q", 0.5),
            "max_inner": config.get("Adaptive", "max_inner", 200),
            "armijo_factor": config.get("Adaptive", "armijo_factor", 0.5),
            "armijo_slope": config.get("Adaptive", "armijo_slope", 0.25),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def resolved_stop_tol(self, u0: float) -> float:
        if self.stop_tol is not None:
            return self.stop_tol
        factor = float(config.get("Solver", "stop_tol_factor", 1e-10))
        return factor * max(1.0, u0)

    def resolved_fd_step(self, x: np.ndarray) -> float:
        if self.fd_step is not None:
            return self.fd_step
        factor = float(config.get("Solver", "fd_step_factor", 1e-6))
        return factor * max(1.0, float(np.max(np.abs(x))))


# --- Traces & outcomes ---


class IterationRecord(BaseModel):
    """One accepted iteration; u is the residual before the step."""
    model_config = ConfigDict(frozen=True)

    k: int
    u: float = Field(ge=0.0)
    step_norm: float = Field(ge=0.0)
    alpha: float = Field(gt=0.0, le=1.0)
    beta: Optional[float] = None
    stage: Stage
    inner_reductions: int = 0


class SolveOutcome(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    status: SolveStatus
    x: Vector
    trace: list[IterationRecord] = []
    stage1_count: int = 0
    final_residual: float
    stop_tol: float
    message: str = ""

    @model_validator(mode="after")
    def _converged_means_small(self) -> "SolveOutcome":
        if self.status is SolveStatus.CONVERGED and self.final_residual > self.stop_tol:
            raise ValueError("converged outcome must satisfy final_residual <= stop_tol")
        return self

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def residuals(self) -> list[float]:
        """u_0, ..., u_K including the residual at the returned x."""
        return [r.u for r in self.trace] + [self.final_residual]

    @property
    def total_inner_reductions(self) -> int:
        return sum(r.inner_reductions for r in self.trace)


# --- Certificates ---


class SolvabilityRegion(BaseModel):
    """A ball of right-hand sides that is guaranteed reachable."""
    model_config = ConfigDict(frozen=True)

    source: Literal["thm1", "thm2", "cor3", "thm5", "thm6"]
    radius_y: float = Field(ge=0.0)
    radius_x: float = Field(ge=0.0)
    radius_x_factor: Optional[float] = None

    def contains(self, y_norm: float) -> bool:
        # relative slack of 1e-12 on the boundary
        return y_norm < self.radius_y + 1e-12 * max(1.0, self.radius_y)

    def solution_bound(self, y_norm: float) -> float:
        """Bound on ||x*|| for a right-hand side of norm y_norm."""
        if self.radius_x_factor is None:
            return self.radius_x
        return min(self.radius_x, self.radius_x_factor * y_norm)


class EnvelopeVariant(str, Enum):
    ALG1 = "alg1"
    ALG3 = "alg3"
    PURE = "pure"


class RateEnvelope(BaseModel):
    """Residual and distance bounds as functions of the iteration index."""
    model_config = ConfigDict(frozen=True)

    variant: EnvelopeVariant
    k_max: int
    u0: float
    mu: float
    L: float
    c: float
    delta: Optional[float] = None

    @property
    def beta(self) -> float:
        return self.mu ** 2 / self.L

    def residual_bound(self, k: int) -> float:
        from .theory import double_exponential_term
        if self.variant is EnvelopeVariant.PURE:
            return 2.0 * self.beta * double_exponential_term(self.delta, k)
        if k < self.k_max:
            return self.u0 - self.beta * k / 2.0
        return 2.0 * self.beta * double_exponential_term(0.5, k - self.k_max)

    def distance_bound(self, k: int) -> float:
        from .theory import H
        ratio = self.mu / self.L
        if self.variant is EnvelopeVariant.PURE:
            return 2.0 * ratio * H(k, self.delta)
        if k < self.k_max:
            left = self.k_max - k
            if self.variant is EnvelopeVariant.ALG1:
                return ratio * (left + 2.0 * self.c)
            return ratio * (left * (left + 5) / 4.0 + 2.0 * self.c)
        return 2.0 * ratio * H(k - self.k_max, 0.5)

    def rough_distance_bound(self, k: int) -> float:
        """Simplified stage-two distance bound, valid for k >= k_max."""
        exponent = k - self.k_max - 1
        return 2.32 * 2.0 ** (-(2.0 ** exponent)) * self.mu / self.L
