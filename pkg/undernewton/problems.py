"""Problem families: quadratic maps, structured sigmoidal maps, scalar
equations and inequalities, and the slack / squared-variable transforms."""
import logging
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import ZeroGradientError
from .linalg import Matrix, NormKind, Vector, as_vector, dual_norm, singular_values, smallest_singular_value
from .models import IterationRecord, SolveOutcome, SolveStatus, Stage
from .solvers import ProblemDefinition
from .utils import make_rng

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12


# --- Quadratic maps g_i(x) = 0.5 (A_i x, x) + (b_i, x) ---


class QuadraticProblem(BaseModel):
    """A has shape (m, n, n), B has rows b_i (m, n), y has length m."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    B: Matrix
    y: Vector

    @field_validator("A", mode="before")
    @classmethod
    def _symmetric(cls, value) -> np.ndarray:
        A = np.array(value, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] == 0:
            raise ValueError(f"A must have shape (m, n, n), got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A entries must be finite")
        asymmetry = float(np.max(np.abs(A - A.transpose(0, 2, 1))))
        if asymmetry > SYMMETRY_TOL:
            logger.warning(f"Symmetrising A_i (max asymmetry {asymmetry:.3e})")
        return 0.5 * (A + A.transpose(0, 2, 1))

    @model_validator(mode="after")
    def _check_dims(self) -> "QuadraticProblem":
        m, n, _ = self.A.shape
        if self.B.shape != (m, n):
            raise ValueError(f"B must have shape ({m}, {n}), got {self.B.shape}")
        if self.y.size != m:
            raise ValueError(f"y must have length {m}, got {self.y.size}")
        if m > n:
            raise ValueError(f"expected m <= n, got m={m}, n={n}")
        return self

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def with_target(self, y) -> "QuadraticProblem":
        return QuadraticProblem(A=self.A, B=self.B, y=y)

    def to_problem(self) -> ProblemDefinition:
        return ProblemDefinition(
            n=self.n, m=self.m, name=f"quadratic[{self.m}x{self.n}]",
            residual=lambda x: quadratic_eval(self, x),
            jacobian=lambda x: quadratic_jacobian(self, x),
        )


def quadratic_eval(q: QuadraticProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 0.5 * np.einsum("ijk,j,k->i", q.A, x, x) + q.B @ x - q.y


def quadratic_jacobian(q: QuadraticProblem, x) -> np.ndarray:
    """Row i is x^T A_i + b_i^T."""
    x = np.asarray(x, dtype=float)
    return np.einsum("ijk,k->ij", q.A, x) + q.B


def quadratic_L1(q: QuadraticProblem) -> float:
    """sqrt(lambda_max(sum A_i^T A_i)), the top singular value of the stacked A_i."""
    stacked = q.A.reshape(q.m * q.n, q.n)
    return float(singular_values(stacked)[0])


def quadratic_mu0(q: QuadraticProblem) -> float:
    """sigma_m of the linear part; 0 when it is rank deficient."""
    mu0 = smallest_singular_value(q.B)
    if mu0 == 0.0:
        logger.warning("Linear part of the quadratic map is rank deficient; mu0 = 0")
    return mu0


# --- Structured maps P_i(x) = phi((c_i, x) - b_i) - y_i ---


def sigmoid_phi(t):
    """phi(t) = t / (1 + e^{-|t|}) and its derivative, elementwise."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    value = t / (1.0 + e)
    derivative = (1.0 + (1.0 + np.abs(t)) * e) / (1.0 + e) ** 2
    return value, derivative


class StructuredProblem(BaseModel):
    """``phi`` returns (value, derivative); mu_phi bounds |phi'| below, M bounds |phi''|."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    C: Matrix
    b: Vector
    y: Vector
    phi: Callable = sigmoid_phi
    mu_phi: float = Field(default=0.5, gt=0.0)
    M: float = Field(default=2.0, gt=0.0)

    @model_validator(mode="after")
    def _check_dims(self) -> "StructuredProblem":
        m, n = self.C.shape
        if self.b.size != m or self.y.size != m:
            raise ValueError(f"b and y must have length {m}")
        if m > n:
            raise ValueError(f"expected m <= n, got m={m}, n={n}")
        return self

    @property
    def gamma(self) -> float:
        return self.M / self.mu_phi ** 2

    def structured_constants(self) -> tuple[float, float]:
        """(mu, L) for which mu^2 / L = mu_phi^2 / M, independent of C."""
        return self.mu_phi, self.M

    def conservative_constants(self) -> tuple[float, float]:
        """(mu, L) valid for the generic analysis: mu_phi sigma_min(C), M sigma_max(C)^2."""
        sv = singular_values(self.C)
        return self.mu_phi * float(sv[-1]), self.M * float(sv[0]) ** 2

    def to_problem(self) -> ProblemDefinition:
        m, n = self.C.shape
        return ProblemDefinition(
            n=n, m=m, name=f"structured[{m}x{n}]",
            residual=lambda x: structured_eval(self, x),
            jacobian=lambda x: structured_jacobian(self, x),
        )


def structured_eval(s: StructuredProblem, x) -> np.ndarray:
    value, _ = s.phi(s.C @ np.asarray(x, dtype=float) - s.b)
    return np.asarray(value, dtype=float) - s.y


def structured_jacobian(s: StructuredProblem, x) -> np.ndarray:
    """D(x) C with D = diag(phi'(Cx - b))."""
    _, derivative = s.phi(s.C @ np.asarray(x, dtype=float) - s.b)
    return np.asarray(derivative, dtype=float)[:, None] * s.C


# --- Scalar equations f(x) = 0 ---


class ScalarProblem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    n: int = Field(ge=1)
    L: Optional[float] = Field(default=None, gt=0.0)
    name: str = "scalar"

    def gradient(self, x) -> np.ndarray:
        g = np.asarray(self.grad(x), dtype=float).reshape(self.n)
        return g

    def to_problem(self) -> ProblemDefinition:
        return ProblemDefinition(
            n=self.n, m=1, name=self.name,
            residual=lambda x: np.array([self.f(x)], dtype=float),
            jacobian=lambda x: self.gradient(x)[None, :],
        )


def scalar_step(sp: ScalarProblem, x, kind: NormKind) -> np.ndarray:
    """Minimum-norm solution of grad f(x)^T z = f(x) in closed form."""
    x = np.asarray(x, dtype=float)
    value = float(sp.f(x))
    g = sp.gradient(x)
    if not np.any(g):
        if value == 0.0:
            return np.zeros(sp.n)
        raise ZeroGradientError(f"ERROR: zero gradient at a point with f = {value:.6g}")
    kind = NormKind(kind)
    if kind is NormKind.L1:
        i = int(np.argmax(np.abs(g)))  # first maximal index on ties
        z = np.zeros(sp.n)
        z[i] = value / g[i]
        return z
    if kind is NormKind.L2:
        return value / float(g @ g) * g
    return value / float(np.sum(np.abs(g))) * np.sign(g)


def scalar_step_norm(sp: ScalarProblem, x, kind: NormKind) -> float:
    """|f(x)| / ||grad f(x)||_*."""
    x = np.asarray(x, dtype=float)
    return abs(float(sp.f(x))) / dual_norm(sp.gradient(x), kind)


def scalar_polynomial(coefficients, constant: float = 0.0) -> ScalarProblem:
    """f(x) = constant + sum_j sum_d coefficients[j, d-1] * x_j^d (separable).

    L is left unset; separable polynomials of degree > 2 have no global
    gradient Lipschitz constant.
    """
    coeffs = np.atleast_2d(np.asarray(coefficients, dtype=float))
    n, degree = coeffs.shape
    powers = np.arange(1, degree + 1)

    def f(x):
        x = np.asarray(x, dtype=float)
        return float(constant + np.sum(coeffs * x[:, None] ** powers))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.sum(coeffs * powers * x[:, None] ** (powers - 1), axis=1)

    L = None
    if degree <= 2:
        second = 2.0 * np.abs(coeffs[:, 1]) if degree == 2 else np.zeros(n)
        L = float(second.max()) or None
    return ScalarProblem(f=f, grad=grad, n=n, L=L, name="scalar-polynomial")


def solve_scalar_inequality(sp: ScalarProblem, x0, max_iter: int = 500,
                            margin: float = 1e-10) -> SolveOutcome:
    """Reach f(x) <= 0 with the gradient step of the inequality method.

    Steps aim at f(x) = -margin so convex inequalities, where Newton
    iterates approach the boundary from outside, stop after finitely many
    steps. A damped step (1/L) f grad f is used while ||grad f||^2 < L f.
    """
    if sp.L is None:
        raise ValueError("solve_scalar_inequality needs the gradient Lipschitz constant L")
    x = as_vector(x0).copy()
    trace: list[IterationRecord] = []
    stage1 = 0
    value = float(sp.f(x))
    status = SolveStatus.MAX_ITER
    message = ""
    for k in range(max_iter + 1):
        if value <= 0.0:
            status = SolveStatus.CONVERGED
            break
        if k == max_iter:
            break
        g = sp.gradient(x)
        g2 = float(g @ g)
        if g2 == 0.0:
            status = SolveStatus.ZERO_GRADIENT
            message = f"zero gradient at iteration {k} with f = {value:.6g}"
            break
        target = value + margin
        if g2 < sp.L * target:
            step = target / sp.L * g
            stage = Stage.DAMPED
            alpha = g2 / (sp.L * target)
            stage1 += 1
        else:
            step = target / g2 * g
            stage = Stage.PURE
            alpha = 1.0
        trace.append(IterationRecord(
            k=k, u=value, step_norm=float(np.linalg.norm(step)), alpha=alpha,
            beta=None, stage=stage,
        ))
        x = x - step
        value = float(sp.f(x))
        if not np.isfinite(value):
            status = SolveStatus.NON_FINITE
            break
    logger.info(f"inequality {sp.name}: {status.value} after {len(trace)} steps (f={value:.3e})")
    return SolveOutcome(
        status=status, x=x, trace=trace, stage1_count=stage1,
        final_residual=max(value, 0.0) if np.isfinite(value) else value,
        stop_tol=0.0, message=message,
    )


# --- Inequalities g_i(x) <= 0 and their equation forms ---


class InequalitySystem(BaseModel):
    """Scalar constraints g_i(x) <= 0 over R^ell with gradients."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ell: int = Field(ge=1)
    functions: list[Callable[[np.ndarray], float]]
    gradients: list[Callable[[np.ndarray], np.ndarray]]

    @model_validator(mode="after")
    def _check(self) -> "InequalitySystem":
        if not self.functions:
            raise ValueError("at least one inequality is required")
        if len(self.functions) != len(self.gradients):
            raise ValueError("each inequality needs a gradient")
        return self

    @property
    def m(self) -> int:
        return len(self.functions)

    def values(self, x) -> np.ndarray:
        return np.array([g(x) for g in self.functions], dtype=float)

    def is_feasible(self, x, tol: float = 1e-8) -> bool:
        return bool(np.all(self.values(x) <= tol))


def slack_transform(ineq: InequalitySystem) -> ProblemDefinition:
    """P_i(x, s) = g_i(x) + s_i^2 over R^(ell + m)."""
    ell, m = ineq.ell, ineq.m

    def residual(v):
        v = np.asarray(v, dtype=float)
        return ineq.values(v[:ell]) + v[ell:] ** 2

    def jacobian(v):
        v = np.asarray(v, dtype=float)
        J = np.zeros((m, ell + m))
        for i, grad in enumerate(ineq.gradients):
            J[i, :ell] = grad(v[:ell])
        J[np.arange(m), ell + np.arange(m)] = 2.0 * v[ell:]
        return J

    return ProblemDefinition(n=ell + m, m=m, residual=residual, jacobian=jacobian, name="slack")


def linear_feasibility_transform(A, b) -> ProblemDefinition:
    """P_i(z) = sum_j A_ij z_j^2 - b_i; a root gives x = z^2 >= 0 with Ax = b."""
    A = np.array(A, dtype=float, ndmin=2)
    b = as_vector(b)
    m, n = A.shape
    if b.size != m:
        raise ValueError(f"b must have length {m}, got {b.size}")
    return ProblemDefinition(
        n=n, m=m, name=f"linear-feasibility[{m}x{n}]",
        residual=lambda z: A @ (np.asarray(z, dtype=float) ** 2) - b,
        jacobian=lambda z: A * (2.0 * np.asarray(z, dtype=float))[None, :],
    )


# --- Seeded generators ---


def random_quadratic(seed: int, n: int, m: int, scale: float = 1.0) -> QuadraticProblem:
    """Standard-normal A_i (symmetrised), B and y; A scaled by ``scale``."""
    rng = make_rng(seed)
    A = rng.standard_normal((m, n, n)) * scale
    A = 0.5 * (A + A.transpose(0, 2, 1))
    B = rng.standard_normal((m, n))
    y = rng.standard_normal(m)
    return QuadraticProblem(A=A, B=B, y=y)


def random_structured(seed: int, n: int, m: int) -> StructuredProblem:
    """Standard-normal C, b, y with the sigmoid map."""
    rng = make_rng(seed)
    C = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    y = rng.standard_normal(m)
    return StructuredProblem(C=C, b=b, y=y)


def random_linear_feasibility(seed: int, n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A, b, x_feasible) with b = A x_feasible and x_feasible > 0."""
    rng = make_rng(seed)
    A = rng.standard_normal((m, n))
    x = rng.uniform(0.5, 1.5, n)
    return A, A @ x, x


def random_scalar_polynomial(seed: int, n: int, degree: int = 2) -> ScalarProblem:
    rng = make_rng(seed)
    coefficients = rng.standard_normal((n, degree))
    constant = float(rng.standard_normal())
    return scalar_polynomial(coefficients, constant)
