"""Closed-form convergence and solvability bounds.

Everything here is a pure function of the constants (mu, mu0, L, rho, u0).
The results serve as certificates in the CLI and as oracles in the tests.
"""
import logging
import math
from functools import lru_cache

from scipy import optimize

from .exceptions import DomainError
from .models import EnvelopeVariant, RateEnvelope, SolvabilityRegion

logger = logging.getLogger(__name__)

TERM_FLOOR = 1e-17
DELTA_UPPER = 1.0 - 1e-15
SLACK = 1e-12


def _check_delta(delta: float):
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"ERROR: delta must lie in [0, 1), got {delta}")


def double_exponential_term(delta: float, k: int) -> float:
    """delta ** (2 ** k) without forming 2 ** k."""
    _check_delta(delta)
    term = delta
    for _ in range(k):
        term *= term
        if term < 1e-300:
            return 0.0
    return term


def H(k: int, delta: float) -> float:
    """Tail sum of delta ** (2 ** l) over l >= k."""
    if k < 0:
        raise DomainError(f"ERROR: k must be nonnegative, got {k}")
    term = double_exponential_term(delta, k)
    total = 0.0
    while term >= TERM_FLOOR:
        total += term
        term *= term
    return total


def Delta(h_value: float) -> float:
    """Inverse of delta -> H(0, delta) on [0, 1)."""
    if h_value < 0.0:
        raise DomainError(f"ERROR: H value must be nonnegative, got {h_value}")
    if h_value == 0.0:
        return 0.0
    if h_value >= H(0, DELTA_UPPER):
        return DELTA_UPPER
    return optimize.bisect(
        lambda d: H(0, d) - h_value, 0.0, DELTA_UPPER, xtol=1e-15, maxiter=200
    )


@lru_cache(maxsize=None)
def c_constant() -> float:
    """c = H(0, 1/2), about 0.8164."""
    return H(0, 0.5)


def k_max(u0: float, mu: float, L: float) -> int:
    """Upper bound on the number of damped iterations."""
    ratio = 2.0 * L * u0 / mu ** 2
    return max(0, math.ceil(ratio - SLACK * max(1.0, ratio)) - 2)


# --- Initial-condition thresholds ---


def _scaled_radius(mu: float, L: float, rho: float) -> float:
    return L * rho / (2.0 * mu)


def _alg1_pure_branch(mu: float, L: float, rho: float) -> float:
    return 2.0 * mu ** 2 / L * Delta(_scaled_radius(mu, L, rho))


def _alg1_damped_branch(mu: float, L: float, rho: float) -> float:
    excess = L * rho / mu - 2.0 * c_constant()
    return mu ** 2 / L * (1.0 + 0.5 * math.floor(excess + SLACK * max(1.0, abs(excess))))


def alg1_initial_threshold(mu: float, L: float, rho: float) -> float:
    """Largest u0 for which Algorithm 1 provably stays in the ball of radius rho."""
    if math.isinf(rho):
        return math.inf
    if _scaled_radius(mu, L, rho) <= c_constant() + SLACK:
        return _alg1_pure_branch(mu, L, rho)
    return _alg1_damped_branch(mu, L, rho)


def alg1_initial_threshold_approx(mu: float, L: float, rho: float) -> float:
    """Simplified threshold using Delta(H) >= H / (1 + H)."""
    if math.isinf(rho):
        return math.inf
    if _scaled_radius(mu, L, rho) <= c_constant() + SLACK:
        return 2.0 * mu ** 2 / L / (1.0 + 2.0 * mu / (L * rho))
    return _alg1_damped_branch(mu, L, rho)


def alg3_initial_threshold(mu: float, L: float, rho: float) -> float:
    if math.isinf(rho):
        return math.inf
    if _scaled_radius(mu, L, rho) <= c_constant() + SLACK:
        return _alg1_pure_branch(mu, L, rho)
    excess = L * rho / mu - 2.0 * c_constant()
    root = (-1.0 + math.sqrt(25.0 + 16.0 * excess)) / 2.0
    return mu ** 2 / (2.0 * L) * math.floor(root + SLACK * max(1.0, root))


# --- Rate envelopes ---


def rate_envelope(u0: float, mu: float, L: float, variant: EnvelopeVariant) -> RateEnvelope:
    variant = EnvelopeVariant(variant)
    if variant is EnvelopeVariant.PURE:
        return pure_newton_envelope(L * u0 / (2.0 * mu ** 2), mu, L)
    return RateEnvelope(
        variant=variant, k_max=k_max(u0, mu, L), u0=u0, mu=mu, L=L, c=c_constant(),
    )


def pure_newton_envelope(delta: float, mu: float, L: float) -> RateEnvelope:
    _check_delta(delta)
    return RateEnvelope(
        variant=EnvelopeVariant.PURE, k_max=0, u0=2.0 * mu ** 2 / L * delta,
        mu=mu, L=L, c=c_constant(), delta=delta,
    )


# --- Solvability regions ---


def region_thm1(mu: float, rho: float) -> SolvabilityRegion:
    """Right-hand sides with ||y|| < mu * rho; ||x*|| <= ||y|| / mu."""
    return SolvabilityRegion(
        source="thm1", radius_y=mu * rho, radius_x=rho, radius_x_factor=1.0 / mu,
    )


def region_thm2(mu0: float, L: float, rho: float) -> SolvabilityRegion:
    """Region from the covering constant at one point; balls with rho < mu0 / (2L) get the shrunken form."""
    r_star = min(rho, mu0 / (2.0 * L))
    if rho >= mu0 / (2.0 * L):
        return SolvabilityRegion(
            source="thm2", radius_y=mu0 ** 2 / (4.0 * L), radius_x=r_star,
            radius_x_factor=2.0 / mu0,
        )
    return SolvabilityRegion(
        source="cor3", radius_y=(mu0 - L * r_star) * r_star, radius_x=r_star,
        radius_x_factor=2.0 / mu0,
    )


def region_thm5(mu0: float, L: float) -> SolvabilityRegion:
    """Quadratic maps: every ||y|| < mu0^2 / (4L) is attained."""
    return SolvabilityRegion(
        source="thm5", radius_y=mu0 ** 2 / (4.0 * L), radius_x=mu0 / (2.0 * L),
        radius_x_factor=2.0 / mu0,
    )


def _theorem6_objective(t: float) -> float:
    return 2.0 * (1.0 - t) ** 2 * Delta(t / (2.0 * (1.0 - t)))


@lru_cache(maxsize=None)
def theorem6_constants() -> tuple[float, float]:
    """(s1, t1): maximum and maximiser of 2(1-t)^2 Delta(t / (2(1-t))) on [0, 1/2]."""
    result = optimize.minimize_scalar(
        lambda t: -_theorem6_objective(t), bounds=(0.0, 0.5), method="bounded",
        options={"xatol": 1e-10},
    )
    t1 = float(result.x)
    s1 = _theorem6_objective(t1)
    logger.debug(f"region constants: s1={s1:.10f} t1={t1:.10f}")
    return s1, t1


@lru_cache(maxsize=None)
def s2_constant() -> float:
    """Same maximisation with Delta replaced by its lower bound H / (1 + H)."""
    result = optimize.minimize_scalar(
        lambda t: -2.0 * t * (1.0 - t) ** 2 / (2.0 - t), bounds=(0.0, 0.5),
        method="bounded", options={"xatol": 1e-10},
    )
    return float(-result.fun)


def region_thm6(mu0: float, L: float) -> SolvabilityRegion:
    s1, t1 = theorem6_constants()
    return SolvabilityRegion(
        source="thm6", radius_y=s1 * mu0 ** 2 / L, radius_x=t1 * mu0 / L,
    )


def approx_bounds_check(delta: float, k: int) -> tuple[float, float]:
    """(upper bound for H(k, delta), lower bound for Delta(H(k, delta)))."""
    term = double_exponential_term(delta, k)
    h_value = H(k, delta)
    return term / (1.0 - term), h_value / (1.0 + h_value)


# --- Step-size and constant helpers ---


def damped_constant_alpha(u0: float, mu: float, rho: float, L: float, eps: float) -> tuple[float, float]:
    """Constant step size and contraction factor for the fixed-alpha damped scheme."""
    margin = 1.0 - u0 / (mu * rho)
    if margin <= 0.0:
        raise DomainError(f"ERROR: need ||P(x0)|| < mu * rho, got u0={u0}, mu*rho={mu * rho}")
    alpha = eps * 2.0 * mu ** 2 / (L * u0) * margin
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"ERROR: step size {alpha:.6g} outside (0, 1]; reduce eps")
    q = 1.0 - alpha + alpha * eps * margin
    return alpha, q


def mu_on_ball(mu0: float, L: float, r: float) -> float:
    """Covering constant on the ball of radius r around the point where mu0 holds."""
    if r < 0.0 or r >= mu0 / L:
        raise DomainError(f"ERROR: radius must lie in [0, mu0/L), got {r}")
    return mu0 - L * r


def adaptive_reduction_bound(beta0: float, beta: float, q: float) -> int:
    """Number of beta reductions before beta0 * q^k falls to beta."""
    ratio = math.log(beta0 / beta) / math.log(1.0 / q)
    return max(0, math.ceil(ratio - SLACK * max(1.0, abs(ratio))))


def adaptive_stage1_bound(u0: float, beta0: float, beta: float, q: float) -> int:
    """Damped-step bound for the adaptive scheme (no beta growth).

    beta_k never drops below min(beta0, q * beta), and every damped step
    decreases u by at least half of it.
    """
    beta_min = min(beta0, q * beta)
    return max(0, math.ceil(2.0 * u0 / beta_min))
