"""Newton-type iterations for underdetermined systems P(x) = 0.

Every scheme shares one loop: compute the minimum-norm substep
z = argmin{||z|| : P'(x) z = P(x)}, pick a step size alpha in (0, 1] and
move to x - alpha z. The schemes differ only in how alpha is chosen.
"""
import logging
import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import (
    CycleLimitError,
    LPInfeasibleError,
    LPUnboundedError,
    RankDeficientError,
)
from .linalg import as_matrix, as_vector, vector_norm
from .min_norm import LinearSystem, min_norm
from .models import (
    IterationRecord,
    SolveOutcome,
    SolverConfig,
    SolveStatus,
    Stage,
)

logger = logging.getLogger(__name__)


class ProblemDefinition(BaseModel):
    """Evaluator pair (P, P') for a map R^n -> R^m with m <= n."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "problem"

    @model_validator(mode="after")
    def _underdetermined(self) -> "ProblemDefinition":
        if self.m > self.n:
            raise ValueError(f"expected m <= n, got m={self.m}, n={self.n}")
        return self

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.residual(x), dtype=float).reshape(self.m)

    def jacobian_at(self, x: np.ndarray, h: Optional[float] = None) -> np.ndarray:
        """Analytic Jacobian when supplied, forward differences otherwise."""
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float).reshape(self.m, self.n)
        if h is None:
            h = SolverConfig().resolved_fd_step(np.asarray(x, dtype=float))
        return finite_diff_jacobian(self, x, h)


def finite_diff_jacobian(problem: ProblemDefinition, x, h: float) -> np.ndarray:
    if not h > 0.0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    base = problem.evaluate(x)
    J = np.empty((problem.m, problem.n))
    for j in range(problem.n):
        shifted = x.copy()
        shifted[j] += h
        J[:, j] = (problem.evaluate(shifted) - base) / h
    return J


class _Step(NamedTuple):
    alpha: float = 1.0
    beta: Optional[float] = None
    inner: int = 0
    x: Optional[np.ndarray] = None
    fx: Optional[np.ndarray] = None
    u: float = math.nan
    status: Optional[SolveStatus] = None


def _trial(problem: ProblemDefinition, cfg: SolverConfig, x, z, alpha: float):
    """Evaluate x - alpha z; returns (x_new, P(x_new), u_new) or None if non-finite."""
    x_new = x - alpha * z
    fx_new = problem.evaluate(x_new)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(fx_new))):
        return None
    return x_new, fx_new, vector_norm(fx_new, cfg.image_norm)


def _fixed_step(problem, cfg, x, z, alpha: float, beta: Optional[float]) -> _Step:
    result = _trial(problem, cfg, x, z, alpha)
    if result is None:
        return _Step(alpha=alpha, beta=beta, status=SolveStatus.NON_FINITE)
    x_new, fx_new, u_new = result
    return _Step(alpha=alpha, beta=beta, x=x_new, fx=fx_new, u=u_new)


StepRule = Callable[..., _Step]


def _iterate(problem: ProblemDefinition, x0, cfg: SolverConfig, rule: StepRule, scheme: str) -> SolveOutcome:
    x0 = as_vector(x0)
    if x0.size != problem.n:
        raise ValueError(f"x0 has length {x0.size}, problem expects {problem.n}")
    x = x0.copy()
    fx = problem.evaluate(x)
    u = vector_norm(fx, cfg.image_norm) if np.all(np.isfinite(fx)) else math.nan
    tol = cfg.resolved_stop_tol(u if math.isfinite(u) else 0.0)
    trace: list[IterationRecord] = []
    stage1 = 0
    status = None
    message = ""

    if not math.isfinite(u):
        status = SolveStatus.NON_FINITE
        message = "residual is not finite at the starting point"

    for k in range(cfg.max_iter if status is None else 0):
        if u <= tol:
            status = SolveStatus.CONVERGED
            break
        J = problem.jacobian_at(x, cfg.resolved_fd_step(x))
        if not np.all(np.isfinite(J)):
            status = SolveStatus.NON_FINITE
            message = f"Jacobian is not finite at iteration {k}"
            break
        try:
            z = min_norm(LinearSystem(A=J, b=fx), cfg.domain_norm)
        except RankDeficientError as e:
            status = SolveStatus.RANK_DEFICIENT_JACOBIAN
            message = str(e)
            break
        except (LPInfeasibleError, LPUnboundedError, CycleLimitError) as e:
            status = SolveStatus.SUBSTEP_FAILED
            message = f"substep linear program failed at iteration {k}: {e}"
            break
        znorm = vector_norm(z, cfg.domain_norm)
        if znorm == 0.0:
            status = SolveStatus.RANK_DEFICIENT_JACOBIAN
            message = "zero substep with nonzero residual"
            break

        step = rule(x=x, fx=fx, u=u, z=z, znorm=znorm)
        if step.status is not None:
            status = step.status
            message = f"step rejected at iteration {k}"
            break

        stage = Stage.DAMPED if step.alpha < 1.0 else Stage.PURE
        trace.append(IterationRecord(
            k=k, u=u, step_norm=znorm, alpha=step.alpha, beta=step.beta,
            stage=stage, inner_reductions=step.inner,
        ))
        logger.debug(
            f"{scheme} k={k} u={u:.6e} |z|={znorm:.6e} alpha={step.alpha:.6e} "
            f"stage={stage.value} inner={step.inner}"
        )
        if stage is Stage.DAMPED:
            stage1 += 1
        x, fx, u = step.x, step.fx, step.u

        if vector_norm(x - x0, cfg.domain_norm) > cfg.trust_radius:
            status = SolveStatus.LEFT_TRUST_BALL
            message = f"||x - x0|| exceeded {cfg.trust_radius:g} at iteration {k + 1}"
            break
    else:
        if status is None:
            status = SolveStatus.CONVERGED if u <= tol else SolveStatus.MAX_ITER

    logger.info(
        f"{scheme} on {problem.name}: {status.value} after {len(trace)} iterations, "
        f"residual {u:.3e} (stage 1: {stage1})"
    )
    return SolveOutcome(
        status=status, x=x, trace=trace, stage1_count=stage1,
        final_residual=u, stop_tol=tol, message=message,
    )


def _require_positive(**values: float):
    for name, value in values.items():
        if not value > 0.0:
            raise ValueError(f"{name} must be positive, got {value}")


def solve_basic(problem: ProblemDefinition, x0, mu: float, L: float,
                cfg: Optional[SolverConfig] = None) -> SolveOutcome:
    """Step size min{1, beta/u} with beta = mu^2 / L known in advance."""
    _require_positive(mu=mu, L=L)
    cfg = cfg or SolverConfig()
    beta = mu ** 2 / L

    def rule(x, fx, u, z, znorm):
        alpha = min(1.0, beta / u)
        return _fixed_step(problem, cfg, x, z, alpha, beta)

    return _iterate(problem, x0, cfg, rule, "basic")


def solve_L(problem: ProblemDefinition, x0, L: float,
            cfg: Optional[SolverConfig] = None, step_map=None) -> SolveOutcome:
    """Step size min{1, u / (L ||z||^2)}; only the Lipschitz constant is needed.

    With ``step_map`` W the step length in the rule is ||W z||. For
    P(x) = phi(Cx - b) - y, W = C and L = M run the rule in the
    coordinates t = Cx - b, where the constants do not depend on C.
    """
    _require_positive(L=L)
    cfg = cfg or SolverConfig()
    W = None if step_map is None else as_matrix(step_map)
    if W is not None and W.shape[1] != problem.n:
        raise ValueError(f"step_map has {W.shape[1]} columns, problem has {problem.n} unknowns")

    def rule(x, fx, u, z, znorm):
        length = znorm if W is None else vector_norm(W @ z, cfg.domain_norm)
        if length == 0.0:  # z in the null space of W
            return _fixed_step(problem, cfg, x, z, 1.0, None)
        effective = u ** 2 / (L * length ** 2)
        alpha = min(1.0, u / (L * length ** 2))
        return _fixed_step(problem, cfg, x, z, alpha, effective)

    return _iterate(problem, x0, cfg, rule, "L")


def solve_pure(problem: ProblemDefinition, x0, cfg: Optional[SolverConfig] = None) -> SolveOutcome:
    cfg = cfg or SolverConfig()

    def rule(x, fx, u, z, znorm):
        return _fixed_step(problem, cfg, x, z, 1.0, None)

    return _iterate(problem, x0, cfg, rule, "pure")


def solve_damped_constant(problem: ProblemDefinition, x0, alpha: float,
                          cfg: Optional[SolverConfig] = None) -> SolveOutcome:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    cfg = cfg or SolverConfig()

    def rule(x, fx, u, z, znorm):
        return _fixed_step(problem, cfg, x, z, alpha, None)

    return _iterate(problem, x0, cfg, rule, "constant")


def solve_adaptive(problem: ProblemDefinition, x0, beta0: float,
                   cfg: Optional[SolverConfig] = None) -> SolveOutcome:
    """Adaptive choice of beta when mu and L are unknown.

    A trial step with alpha = min{1, beta/u} is accepted when
    u_new < (1 - alpha/2) u (damped) or u_new < u/2 (pure); otherwise
    beta <- q beta and the step is retried from the same point. With
    ``cfg.growth`` set, beta is multiplied by it after every accepted step.
    With ``cfg.armijo`` the step size is found by backtracking from 1
    instead, accepting u_new <= (1 - slope * alpha) u.
    """
    _require_positive(beta0=beta0)
    cfg = cfg or SolverConfig()
    state = {"beta": float(beta0)}

    def adaptive_rule(x, fx, u, z, znorm):
        inner = 0
        while True:
            beta = state["beta"]
            alpha = min(1.0, beta / u)
            result = _trial(problem, cfg, x, z, alpha)
            if result is not None:
                x_new, fx_new, u_new = result
                bound = (1.0 - alpha / 2.0) * u if alpha < 1.0 else u / 2.0
                if u_new < bound:
                    break
            if inner >= cfg.max_inner:
                return _Step(alpha=alpha, beta=beta, inner=inner,
                             status=SolveStatus.INNER_REDUCTION_LIMIT)
            state["beta"] = cfg.q * beta
            inner += 1
            logger.debug(f"adaptive: rejected trial, beta reduced to {state['beta']:.6e}")
        if cfg.growth is not None:
            state["beta"] = beta * cfg.growth
        return _Step(alpha=alpha, beta=beta, inner=inner, x=x_new, fx=fx_new, u=u_new)

    def armijo_rule(x, fx, u, z, znorm):
        alpha = 1.0
        inner = 0
        while True:
            result = _trial(problem, cfg, x, z, alpha)
            if result is not None and result[2] <= (1.0 - cfg.armijo_slope * alpha) * u:
                x_new, fx_new, u_new = result
                return _Step(alpha=alpha, beta=None, inner=inner, x=x_new, fx=fx_new, u=u_new)
            if inner >= cfg.max_inner:
                return _Step(alpha=alpha, inner=inner, status=SolveStatus.INNER_REDUCTION_LIMIT)
            alpha *= cfg.armijo_factor
            inner += 1

    rule = armijo_rule if cfg.armijo else adaptive_rule
    return _iterate(problem, x0, cfg, rule, "armijo" if cfg.armijo else "adaptive")
