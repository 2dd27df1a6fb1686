import numpy as np
import pytest

from dngalerkin.solver import EpsilonSchedule, solve_cauchy_dirichlet
from dngalerkin.timestep import StepperConfig
from dngalerkin.verification import (
    ComparisonAuditError,
    check_comparison,
    discrete_energy_identity,
    energy_report,
    manufactured_error,
    manufactured_rhs,
    trapezoid_cutoff,
    weak_residual,
)

from conftest import heat_square_exact, make_problem


def solve(problem, m=4, dt=2e-3, scheme="implicit_euler", eps=(1e-2,)):
    return solve_cauchy_dirichlet(
        problem, m, EpsilonSchedule(eps),
        StepperConfig(dt=dt, newton_tol=1e-12, scheme=scheme),
    )


class TestTrapezoidCutoff:
    def test_shape(self):
        psi, dpsi = trapezoid_cutoff(0.2, 0.8, 0.1)
        assert psi(0.1) == 0.0
        assert psi(0.25) == pytest.approx(0.5)
        assert psi(0.5) == 1.0
        assert psi(0.75) == pytest.approx(0.5)
        assert psi(0.9) == 0.0
        assert dpsi(0.25) == pytest.approx(10.0)
        assert dpsi(0.5) == 0.0
        assert dpsi(0.75) == pytest.approx(-10.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            trapezoid_cutoff(0.5, 0.2, 0.05)
        with pytest.raises(ValueError):
            trapezoid_cutoff(0.0, 1.0, 0.6)


class TestEnergyReport:
    def test_zero_solution(self):
        problem = make_problem(dim=1, horizon=0.05)
        result = solve(problem)
        report = energy_report(result.final, problem, result.quadrature)
        assert report.lhs_total == 0.0
        assert report.ratio == 0.0

    def test_heat_sup_term_decays_from_initial_norm(self, heat_square_problem):
        result = solve(heat_square_problem, m=4, dt=1e-3)
        traj = result.final
        report = energy_report(traj, heat_square_problem, result.quadrature)
        norms = traj.power_norms_per_time(result.quadrature)
        # ||u0||_{L^2}^2 = 1/4 and decay makes it the supremum
        assert norms[0] == pytest.approx(0.25, rel=1e-10)
        assert report.sup_norm_term == pytest.approx(0.25, rel=1e-10)
        assert np.all(np.diff(norms) <= 1e-12)
        assert np.isfinite(report.ratio) and report.ratio > 0

    def test_budget_components_present(self, heat_square_problem):
        result = solve(heat_square_problem, m=2, dt=5e-3)
        report = energy_report(result.final, heat_square_problem,
                               result.quadrature)
        assert set(report.budget_components) == {
            "initial_data", "domain_volume", "source", "lift_sup",
            "lift_time_derivative", "lift_gradient", "coercivity_data",
        }
        assert report.rhs_budget >= report.budget_components["domain_volume"]


class TestManufacturedError:
    def test_self_distance_zero(self, heat_square_problem):
        result = solve(heat_square_problem, m=2, dt=5e-3)
        traj = result.final
        err = manufactured_error(traj, lambda X, t: traj.values_on(X, t),
                                 result.quadrature)
        assert err.sup_norm == 0.0
        assert err.spacetime_norm == 0.0

    def test_heat_oracle_error_small(self, heat_square_problem):
        result = solve(heat_square_problem, m=4, dt=1e-3, scheme="midpoint")
        err = manufactured_error(result.final, heat_square_exact,
                                 result.quadrature)
        assert err.sup_norm < 1e-4
        assert err.spacetime_norm < 1e-4

    def test_mode_refinement_reduces_error(self):
        # smooth target not in the span: x(1-x) profile decaying in time
        problem = make_problem(
            dim=1, horizon=0.02,
            u0=lambda X: np.atleast_2d(X)[:, 0] * (1 - np.atleast_2d(X)[:, 0]),
        )
        errors = []
        for m in (2, 4, 8):
            result = solve(problem, m=m, dt=1e-3)
            # compare against a fine solve as reference
            reference = solve(problem, m=16, dt=1e-3)
            err = manufactured_error(
                result.final,
                lambda X, t: reference.final.values_on(X, t),
                result.quadrature,
            )
            errors.append(err.sup_norm)
        assert errors[0] / errors[1] >= 1.5
        assert errors[1] / errors[2] >= 1.5


class TestManufacturedRhs:
    def test_heat_mode_rhs_is_zero(self, heat_square_problem):
        rhs = manufactured_rhs(
            heat_square_exact,
            heat_square_problem.field,
            heat_square_problem.exponents,
            heat_square_problem.domain,
            heat_square_problem.horizon,
        )
        X = np.array([[0.3, 0.4], [0.6, 0.2], [0.5, 0.5]])
        vals = rhs(X, 0.05)
        assert np.max(np.abs(vals)) < 1e-6

    def test_reaction_rhs_detected(self):
        # u = exp(t) x (steady gradient): d_t spow(u,1) = u, div A = 0 for p=2
        problem = make_problem(dim=1)
        exact = lambda X, t: np.exp(t) * np.atleast_2d(X)[:, 0]
        rhs = manufactured_rhs(exact, problem.field, problem.exponents,
                               problem.domain, problem.horizon)
        X = np.array([[0.25], [0.75]])
        vals = rhs(X, 0.1)
        expected = np.exp(0.1) * X[:, 0]
        assert vals == pytest.approx(expected, rel=1e-7)


class TestWeakResidual:
    def test_zero_solution_zero_residual(self):
        problem = make_problem(dim=1, horizon=0.05)
        result = solve(problem)
        rows = weak_residual(result.final, problem, 3, quad=result.quadrature)
        assert max(abs(r[-1]) for r in rows) < 1e-14

    def test_heat_residual_shrinks_with_dt(self, heat_square_problem):
        worst = []
        for dt in (4e-3, 2e-3, 1e-3):
            result = solve(heat_square_problem, m=3, dt=dt)
            rows = weak_residual(result.final, heat_square_problem, 4,
                                 time_cutoffs=((0.0, 0.1, 0.01),),
                                 quad=result.quadrature)
            worst.append(max(abs(r[-1]) for r in rows))
        assert worst[0] > worst[1] > worst[2]

    def test_rejects_too_many_modes(self, heat_square_problem):
        result = solve(heat_square_problem, m=2, dt=5e-3)
        with pytest.raises(ValueError):
            weak_residual(result.final, heat_square_problem, 100,
                          quad=result.quadrature)


class TestDiscreteEnergyIdentity:
    def test_zero_solution(self):
        problem = make_problem(dim=1, horizon=0.05)
        result = solve(problem)
        gaps = discrete_energy_identity(result.final, problem, result.quadrature)
        assert np.max(np.abs(gaps)) == 0.0

    def test_heat_gap_first_order_in_dt(self):
        problem = make_problem(
            dim=1, horizon=0.05,
            u0=lambda X: np.sin(np.pi * np.atleast_2d(X)[:, 0]),
        )
        totals = []
        for dt in (4e-3, 2e-3, 1e-3):
            result = solve(problem, m=3, dt=dt)
            gaps = discrete_energy_identity(result.final, problem,
                                            result.quadrature)
            totals.append(abs(np.sum(gaps)))
        orders = [np.log2(totals[i] / totals[i + 1]) for i in range(2)]
        assert min(orders) >= 0.9

    def test_nonlinear_case_bounded_gaps(self):
        problem = make_problem(
            dim=1, alpha=0.5, p=np.array([1.8]), horizon=0.02,
            u0=lambda X: np.sin(np.pi * np.atleast_2d(X)[:, 0]),
        )
        result = solve(problem, m=3, dt=1e-3, eps=(1e-2,))
        gaps = discrete_energy_identity(result.final, problem, result.quadrature)
        assert np.all(np.isfinite(gaps))
        assert np.max(np.abs(gaps)) < 1e-2


def comparison_problems(bump_scale=0.25, f2=0.1, lift=0.2):
    sin_profile = lambda X: np.sin(np.pi * np.atleast_2d(X)[:, 0])
    problem_v = make_problem(
        dim=1, horizon=0.1,
        u0=lambda X: bump_scale * sin_profile(X),
    )
    problem_w = make_problem(
        dim=1, horizon=0.1,
        u0=lambda X: lift + 0.5 * sin_profile(X),
        g=lambda X, t=0.0: np.full(np.asarray(X).shape[0], lift),
        f=lambda X, t=0.0: np.full(np.asarray(X).shape[0], f2),
        grad_g=lambda X, t=0.0: np.zeros_like(np.atleast_2d(X)),
    )
    return problem_v, problem_w


class TestComparison:
    def test_ordered_data_yields_ordered_solutions(self):
        problem_v, problem_w = comparison_problems()
        res_v = solve(problem_v, m=6, dt=1e-3)
        res_w = solve(problem_w, m=6, dt=1e-3)
        report = check_comparison(res_v.final, res_w.final,
                                  lattice_resolution=64, time_stride=10)
        assert report.passed
        assert report.min_gap >= -report.tol
        assert not report.exploratory

    def test_nonnegativity_corollary(self):
        problem_v, problem_w = comparison_problems(bump_scale=0.0)
        res_v = solve(problem_v, m=6, dt=1e-3)
        res_w = solve(problem_w, m=6, dt=1e-3)
        report = check_comparison(res_v.final, res_w.final)
        assert report.passed
        # v == 0, so the gap is just w: nonnegativity of w
        assert report.min_gap >= -report.tol

    def test_swapped_initial_data_fails_audit(self):
        problem_v, problem_w = comparison_problems()
        # v0 exceeds w0 somewhere: swap roles to break ordering
        res_v = solve(problem_w, m=3, dt=2e-3)
        res_w = solve(problem_v, m=3, dt=2e-3)
        with pytest.raises(ComparisonAuditError) as err:
            check_comparison(res_v.final, res_w.final)
        assert any("zero boundary" in msg for msg in err.value.failures)

    def test_unordered_sources_fail_audit(self):
        problem_v, problem_w = comparison_problems(f2=-0.5)
        res_v = solve(problem_v, m=3, dt=2e-3)
        res_w = solve(problem_w, m=3, dt=2e-3)
        with pytest.raises(ComparisonAuditError) as err:
            check_comparison(res_v.final, res_w.final)
        assert any("f1 <= f2" in msg for msg in err.value.failures)

    def test_missing_flags_fail_audit(self):
        from dngalerkin.assembly import VectorFieldSpec

        undeclared = VectorFieldSpec(
            evaluate=lambda X, t, U, XI: np.asarray(XI, dtype=float),
            time_independent=False,
            lipschitz_in_u=False,
            name="undeclared",
        )
        problem_v, problem_w = comparison_problems()
        problem_v = make_problem(dim=1, horizon=0.1, field=undeclared)
        res_v = solve(problem_v, m=3, dt=2e-3)
        res_w = solve(problem_w, m=3, dt=2e-3)
        with pytest.raises(ComparisonAuditError) as err:
            check_comparison(res_v.final, res_w.final)
        assert any("time-independent" in m for m in err.value.failures)

    def test_time_dependent_source_marked_exploratory(self):
        problem_v, problem_w = comparison_problems()
        decaying = lambda X, t=0.0: 0.1 * np.exp(-t) * np.ones(
            np.asarray(X).shape[0])
        problem_w2 = make_problem(
            dim=1, horizon=0.1,
            u0=problem_w.u0, g=problem_w.g, f=decaying,
            grad_g=lambda X, t=0.0: np.zeros_like(np.atleast_2d(X)),
        )
        res_v = solve(problem_v, m=4, dt=1e-3)
        res_w = solve(problem_w2, m=4, dt=1e-3)
        report = check_comparison(res_v.final, res_w.final)
        assert report.exploratory
