"""Tests for the Newton iterations."""
import math

import numpy as np
import pytest

from undernewton.exceptions import CycleLimitError
from undernewton.linalg import NormKind
from undernewton.models import SolverConfig, SolveStatus, Stage
from undernewton.problems import (
    QuadraticProblem,
    StructuredProblem,
    quadratic_eval,
    quadratic_jacobian,
    quadratic_L1,
    quadratic_mu0,
    random_quadratic,
    random_structured,
)
from undernewton.solvers import (
    ProblemDefinition,
    finite_diff_jacobian,
    solve_adaptive,
    solve_basic,
    solve_damped_constant,
    solve_L,
    solve_pure,
)
from undernewton.theory import damped_constant_alpha, k_max


def linear_problem(A, b) -> ProblemDefinition:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return ProblemDefinition(
        n=A.shape[1], m=A.shape[0], name="linear",
        residual=lambda x: A @ x - b,
        jacobian=lambda x: A,
    )


def scalar_quadratic(target: float = 0.105) -> ProblemDefinition:
    """P(x) = x + x^2/2 - target, root -1 + sqrt(1 + 2 target)."""
    return ProblemDefinition(
        n=1, m=1, name="scalar-quadratic",
        residual=lambda x: np.array([x[0] + 0.5 * x[0] ** 2 - target]),
        jacobian=lambda x: np.array([[1.0 + x[0]]]),
    )


@pytest.fixture
def tight():
    return SolverConfig(stop_tol=1e-12)


class TestProblemDefinition:
    """Problem model and finite differences."""

    def test_rejects_overdetermined(self):
        with pytest.raises(ValueError):
            ProblemDefinition(n=1, m=2, residual=lambda x: x)

    def test_finite_diff_linear(self):
        A = np.array([[1.0, -2.0, 3.0], [4.0, 0.0, -1.0]])
        p = linear_problem(A, [1.0, 2.0])
        J = finite_diff_jacobian(p, np.array([1.0, 2.0, -3.0]), 0.5)
        np.testing.assert_allclose(J, A, atol=1e-12)

    def test_finite_diff_square(self):
        p = ProblemDefinition(n=1, m=1, residual=lambda x: x ** 2)
        J = finite_diff_jacobian(p, np.array([1.0]), 1e-6)
        assert J[0, 0] == pytest.approx(2.0, abs=1e-5)

    def test_finite_diff_rejects_bad_step(self):
        p = linear_problem([[1.0]], [0.0])
        with pytest.raises(ValueError):
            finite_diff_jacobian(p, np.array([0.0]), 0.0)

    def test_finite_diff_matches_quadratic_jacobian(self, rng):
        for seed in range(20):
            q = random_quadratic(seed, n=6, m=3)
            p = ProblemDefinition(n=6, m=3, residual=lambda x, q=q: quadratic_eval(q, x))
            x = rng.standard_normal(6)
            np.testing.assert_allclose(p.jacobian_at(x, 1e-7), quadratic_jacobian(q, x), atol=1e-5)

    def test_jacobian_at_prefers_analytic(self):
        p = linear_problem([[2.0, 0.0]], [1.0])
        np.testing.assert_array_equal(p.jacobian_at(np.zeros(2)), [[2.0, 0.0]])

    def test_jacobian_at_default_step(self):
        p = ProblemDefinition(n=2, m=1, residual=lambda x: np.array([x[0] ** 2 + 3.0 * x[1]]))
        J = p.jacobian_at(np.array([1.0, 5.0]))
        np.testing.assert_allclose(J, [[2.0, 3.0]], atol=1e-4)


class TestSolveBasic:
    """Algorithm with known mu and L."""

    def test_linear_one_pure_step(self, tight):
        outcome = solve_basic(linear_problem([[1.0]], [0.0]), [5.0], mu=1.0, L=0.1, cfg=tight)
        assert outcome.status is SolveStatus.CONVERGED
        assert outcome.iterations == 1
        assert outcome.trace[0].stage is Stage.PURE
        assert outcome.x[0] == pytest.approx(0.0, abs=1e-15)

    def test_scalar_quadratic_root(self):
        outcome = solve_basic(scalar_quadratic(), [0.0], mu=1.0, L=1.0)
        assert outcome.status is SolveStatus.CONVERGED
        assert outcome.x[0] == pytest.approx(-1.0 + math.sqrt(1.21), abs=1e-10)
        assert outcome.final_residual <= outcome.stop_tol

    def test_stage_one_decrement(self):
        # iterates stay in x >= 0 where |P'| = 1 + x >= 1 > mu; P'' = 1
        mu, L = 0.7, 1.0
        outcome = solve_basic(scalar_quadratic(0.6), [0.0], mu=mu, L=L)
        assert outcome.status is SolveStatus.CONVERGED
        beta = mu ** 2 / L
        residuals = outcome.residuals
        assert outcome.stage1_count >= 1
        for k, record in enumerate(outcome.trace):
            if record.stage is Stage.DAMPED:
                assert residuals[k + 1] <= residuals[k] - beta / 2 + 1e-12
            assert residuals[k + 1] <= residuals[k] + 1e-12
        assert outcome.stage1_count <= k_max(residuals[0], mu, L)

    def test_damped_iff_alpha_below_one(self):
        outcome = solve_basic(scalar_quadratic(0.6), [0.0], mu=0.7, L=1.0)
        for record in outcome.trace:
            assert (record.stage is Stage.DAMPED) == (record.alpha < 1.0)
            assert record.beta == pytest.approx(0.49)

    def test_rejects_nonpositive_constants(self):
        with pytest.raises(ValueError):
            solve_basic(scalar_quadratic(), [0.0], mu=0.0, L=1.0)

    def test_rejects_wrong_x0_length(self):
        with pytest.raises(ValueError):
            solve_basic(scalar_quadratic(), [0.0, 1.0], mu=1.0, L=1.0)

    def test_left_trust_ball(self):
        cfg = SolverConfig(trust_radius=0.01)
        outcome = solve_basic(scalar_quadratic(), [0.0], mu=1.0, L=1.0, cfg=cfg)
        assert outcome.status is SolveStatus.LEFT_TRUST_BALL

    def test_rank_deficient_jacobian(self):
        p = ProblemDefinition(
            n=2, m=1, residual=lambda x: np.array([1.0 + x[0] ** 2]),
            jacobian=lambda x: np.array([[2.0 * x[0], 0.0]]),
        )
        outcome = solve_basic(p, [0.0, 0.0], mu=1.0, L=1.0)
        assert outcome.status is SolveStatus.RANK_DEFICIENT_JACOBIAN
        assert outcome.iterations == 0

    @pytest.mark.parametrize("kind", [NormKind.L1, NormKind.LINF])
    def test_small_scale_jacobian(self, kind):
        cfg = SolverConfig(domain_norm=kind, image_norm=kind, stop_tol=1e-14)
        p = linear_problem(1e-10 * np.array([[1.0, 2.0]]), [2e-10])
        outcome = solve_basic(p, [0.0, 0.0], mu=1e-10, L=1e-20, cfg=cfg)
        assert outcome.status is SolveStatus.CONVERGED, outcome.message
        assert outcome.iterations == 1

    def test_substep_failure_is_a_status(self, monkeypatch):
        from undernewton import solvers

        def failing(system, kind):
            raise CycleLimitError("ERROR: simplex exceeded 0 pivots.")

        monkeypatch.setattr(solvers, "min_norm", failing)
        cfg = SolverConfig(domain_norm=NormKind.L1)
        outcome = solve_basic(linear_problem([[1.0, 2.0]], [2.0]), [0.0, 0.0], mu=1.0, L=1.0, cfg=cfg)
        assert outcome.status is SolveStatus.SUBSTEP_FAILED
        assert "pivots" in outcome.message

    def test_max_iter(self):
        cfg = SolverConfig(max_iter=1)
        outcome = solve_basic(scalar_quadratic(0.6), [0.0], mu=0.1, L=1.0, cfg=cfg)
        assert outcome.status is SolveStatus.MAX_ITER
        assert outcome.iterations == 1

    def test_non_finite_residual(self):
        p = ProblemDefinition(n=1, m=1, residual=lambda x: np.array([np.nan]), jacobian=lambda x: np.ones((1, 1)))
        outcome = solve_basic(p, [0.0], mu=1.0, L=1.0)
        assert outcome.status is SolveStatus.NON_FINITE

    def test_already_solved(self):
        outcome = solve_basic(linear_problem([[1.0, 1.0]], [0.0]), [0.0, 0.0], mu=1.0, L=1.0)
        assert outcome.status is SolveStatus.CONVERGED
        assert outcome.iterations == 0

    @pytest.mark.parametrize("domain", [NormKind.L1, NormKind.L2, NormKind.LINF])
    @pytest.mark.parametrize("image", [NormKind.L1, NormKind.L2, NormKind.LINF])
    def test_norm_combinations(self, domain, image):
        q = QuadraticProblem(
            A=np.zeros((2, 3, 3)) + 0.1 * np.eye(3),
            B=[[1.0, 0.0, 1.0], [0.0, 1.0, -1.0]],
            y=[0.2, -0.1],
        )
        cfg = SolverConfig(domain_norm=domain, image_norm=image)
        outcome = solve_basic(q.to_problem(), np.zeros(3), mu=0.5, L=0.5, cfg=cfg)
        assert outcome.status is SolveStatus.CONVERGED
        np.testing.assert_allclose(quadratic_eval(q, outcome.x), 0.0, atol=1e-9)

    def test_stage_two_quadratic_rate(self):
        mu, L = 0.7, 1.0
        outcome = solve_basic(scalar_quadratic(0.6), [0.0], mu=mu, L=L)
        residuals = outcome.residuals
        for k, record in enumerate(outcome.trace):
            if record.stage is Stage.PURE:
                assert residuals[k + 1] <= L / (2 * mu ** 2) * residuals[k] ** 2 * (1 + 1e-6) + 1e-15


class TestSolveL:
    """Algorithm with known L only."""

    def test_linear_one_step(self, tight):
        p = linear_problem([[1.0, 2.0], [0.0, 1.0]], [1.0, 1.0])
        outcome = solve_L(p, np.zeros(2), L=0.01, cfg=tight)
        assert outcome.status is SolveStatus.CONVERGED
        assert outcome.iterations == 1

    def test_per_step_decrease(self):
        L = 1.0
        outcome = solve_L(scalar_quadratic(0.6), [0.0], L=L)
        assert outcome.status is SolveStatus.CONVERGED
        residuals = outcome.residuals
        for k, record in enumerate(outcome.trace):
            if record.alpha < 1.0:
                assert residuals[k + 1] <= residuals[k] * (1 - record.alpha / 2) + 1e-12
            # effective beta makes alpha = min(1, beta / u)
            assert record.alpha == pytest.approx(min(1.0, record.beta / record.u))

    def test_zero_substep_is_rank_deficient(self):
        p = ProblemDefinition(
            n=1, m=1, residual=lambda x: np.array([1.0]), jacobian=lambda x: np.zeros((1, 1)),
        )
        outcome = solve_L(p, [0.0], L=1.0)
        assert outcome.status is SolveStatus.RANK_DEFICIENT_JACOBIAN

    def test_structured_step_map_ignores_conditioning(self, rng):
        well = random_structured(4, n=10, m=4)
        U, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        V, _ = np.linalg.qr(rng.standard_normal((10, 4)))
        skewed = U @ np.diag([1.0, 1e-1, 1e-2, 1e-3]) @ V.T
        bad = StructuredProblem(C=skewed, b=well.b, y=well.y)
        _, M = well.structured_constants()
        counts = []
        for s in (well, bad):
            outcome = solve_L(s.to_problem(), np.zeros(10), L=M, step_map=s.C)
            assert outcome.status is SolveStatus.CONVERGED
            residuals = outcome.residuals
            for k, record in enumerate(outcome.trace):
                assert residuals[k + 1] <= residuals[k] * (1 - record.alpha / 2) + 1e-12
            counts.append(outcome.iterations)
        assert abs(counts[0] - counts[1]) <= 1

    def test_step_map_shape(self):
        with pytest.raises(ValueError):
            solve_L(linear_problem([[1.0, 2.0]], [1.0]), np.zeros(2), L=1.0, step_map=np.eye(3))


class TestSolvePure:
    """Unit step size."""

    def test_linear_one_step(self, tight):
        outcome = solve_pure(linear_problem([[3.0, 1.0]], [6.0]), np.zeros(2), tight)
        assert outcome.status is SolveStatus.CONVERGED
        assert outcome.iterations == 1

    def test_quadratic_decay(self):
        outcome = solve_pure(scalar_quadratic(), [0.0])
        assert outcome.status is SolveStatus.CONVERGED
        mu, L = 1.0, 1.0
        delta = L * 0.105 / (2 * mu ** 2)
        for k, u in enumerate(outcome.residuals):
            assert u <= 2 * mu ** 2 / L * delta ** (2 ** k) * (1 + 1e-9) + 1e-16

    def test_arctan_diverges(self):
        p = ProblemDefinition(
            n=1, m=1, name="arctan",
            residual=lambda x: np.arctan(x),
            jacobian=lambda x: np.array([[1.0 / (1.0 + x[0] ** 2)]]),
        )
        outcome = solve_pure(p, [3.0], SolverConfig(max_iter=5))
        assert outcome.status is SolveStatus.MAX_ITER
        assert abs(outcome.x[0]) > 1e6

    def test_all_steps_pure(self):
        outcome = solve_pure(scalar_quadratic(), [0.0])
        assert outcome.stage1_count == 0
        assert all(r.beta is None for r in outcome.trace)


class TestSolveDampedConstant:
    """Fixed step size."""

    def test_alpha_one_matches_pure(self):
        a = solve_damped_constant(scalar_quadratic(), [0.0], 1.0)
        b = solve_pure(scalar_quadratic(), [0.0])
        assert a.residuals == b.residuals
        assert np.array_equal(a.x, b.x)

    def test_linear_halving(self):
        outcome = solve_damped_constant(linear_problem([[2.0, 0.0]], [4.0]), np.zeros(2), 0.5,
                                        SolverConfig(max_iter=10))
        u0 = outcome.residuals[0]
        for k, u in enumerate(outcome.residuals):
            assert u == pytest.approx(0.5 ** k * u0, rel=1e-12)

    def test_constant_alpha_from_bound_is_monotone(self):
        alpha, q = damped_constant_alpha(u0=0.105, mu=0.5, rho=0.5, L=1.0, eps=0.3)
        assert 0.0 < alpha <= 1.0
        outcome = solve_damped_constant(scalar_quadratic(), [0.0], alpha)
        assert outcome.status is SolveStatus.CONVERGED
        residuals = outcome.residuals
        assert all(b <= a for a, b in zip(residuals, residuals[1:]))

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5])
    def test_rejects_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            solve_damped_constant(scalar_quadratic(), [0.0], alpha)


class TestSolveAdaptive:
    """Adaptive beta."""

    def test_small_beta0_matches_basic(self):
        mu, L = 0.7, 1.0
        beta0 = mu ** 2 / L
        basic = solve_basic(scalar_quadratic(0.6), [0.0], mu=mu, L=L)
        adaptive = solve_adaptive(scalar_quadratic(0.6), [0.0], beta0)
        assert adaptive.total_inner_reductions == 0
        assert adaptive.residuals == basic.residuals
        assert np.array_equal(adaptive.x, basic.x)

    def test_beta_nonincreasing_without_growth(self):
        for seed in range(10):
            q = random_quadratic(seed, n=5, m=2, scale=0.3)
            radius = quadratic_mu0(q) ** 2 / (4 * quadratic_L1(q))
            q = q.with_target(0.5 * radius * q.y / np.linalg.norm(q.y))
            outcome = solve_adaptive(q.to_problem(), np.zeros(5), beta0=100.0)
            assert outcome.status is SolveStatus.CONVERGED
            betas = [r.beta for r in outcome.trace]
            assert all(b2 <= b1 for b1, b2 in zip(betas, betas[1:]))

    def test_accepted_steps_beat_optimal_step(self):
        outcome = solve_adaptive(scalar_quadratic(0.6), [0.0], beta0=5.0)
        assert outcome.status is SolveStatus.CONVERGED
        true_beta = 0.7 ** 2
        residuals = outcome.residuals
        compared = 0
        for k, record in enumerate(outcome.trace):
            if record.beta <= true_beta:
                continue
            compared += 1
            alpha_opt = min(1.0, true_beta / record.u)
            assert residuals[k + 1] <= (1 - alpha_opt / 2) * residuals[k] + 1e-15
        assert compared >= 1

    def test_inner_reduction_limit(self):
        # residual that never decreases
        p = ProblemDefinition(
            n=1, m=1, residual=lambda x: np.array([1.0 + x[0] ** 2]),
            jacobian=lambda x: np.array([[1.0]]),
        )
        outcome = solve_adaptive(p, [0.0], 1.0, SolverConfig(max_inner=5))
        assert outcome.status is SolveStatus.INNER_REDUCTION_LIMIT

    def test_growth_variant(self):
        cfg = SolverConfig(growth=2.0)
        outcome = solve_adaptive(scalar_quadratic(0.6), [0.0], 0.01, cfg)
        assert outcome.status is SolveStatus.CONVERGED
        betas = [r.beta for r in outcome.trace]
        assert max(betas) > 0.01

    def test_armijo_variant(self):
        cfg = SolverConfig(armijo=True)
        outcome = solve_adaptive(scalar_quadratic(0.6), [0.0], 1.0, cfg)
        assert outcome.status is SolveStatus.CONVERGED
        residuals = outcome.residuals
        for k, record in enumerate(outcome.trace):
            assert record.beta is None
            assert residuals[k + 1] <= (1 - 0.25 * record.alpha) * residuals[k]

    def test_rejects_nonpositive_beta0(self):
        with pytest.raises(ValueError):
            solve_adaptive(scalar_quadratic(), [0.0], 0.0)
