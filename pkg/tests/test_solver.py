import numpy as np
import pytest

from app.core.errors import InfeasibleError, InfeasibleStartError
from app.models.program import ConvexProgram, FunctionBlock
from app.services import solver_service


def _parabola_program(center=3.0, lower=0.0, upper=10.0):
    """max -(x - center)² на [lower, upper]"""

    def fn(X):
        d = X[:, 0] - center
        return -d * d, -2.0 * d[:, None], np.full((X.shape[0], 1, 1), -2.0)

    return ConvexProgram(
        n=1,
        blocks={"x": slice(0, 1)},
        objective=(FunctionBlock("parabola", [[0]], fn),),
        constraints=(),
        lower=[lower],
        upper=[upper],
    )


def _simplex_lp():
    """max x + y при x + y <= 1, x, y >= 0"""
    return ConvexProgram(
        n=2,
        blocks={"x": slice(0, 2)},
        objective=(FunctionBlock.linear("sum", [[0, 1]], [[1.0, 1.0]], [0.0]),),
        constraints=(FunctionBlock.linear("budget", [[0, 1]], [[1.0, 1.0]], [-1.0]),),
        lower=[0.0, 0.0],
        upper=[np.inf, np.inf],
    )


class TestBarrierSolver:
    def test_concave_parabola(self):
        solution = solver_service.solve(_parabola_program(), np.array([1.0]))
        assert solution.ok
        assert solution.x[0] == pytest.approx(3.0, abs=1e-4)
        assert solution.objective == pytest.approx(0.0, abs=1e-6)

    def test_simplex_lp(self):
        solution = solver_service.solve(_simplex_lp(), np.array([0.2, 0.3]))
        assert solution.objective == pytest.approx(1.0, rel=1e-5)
        assert np.all(solution.x > 0)

    def test_equality_constraint(self):
        def fn(X):
            return -np.sum(X * X, axis=1), -2.0 * X, np.broadcast_to(-2.0 * np.eye(2), (X.shape[0], 2, 2))

        program = ConvexProgram(
            n=2,
            blocks={"x": slice(0, 2)},
            objective=(FunctionBlock("norm", [[0, 1]], fn),),
            constraints=(),
            lower=[-np.inf, -np.inf],
            upper=[np.inf, np.inf],
            eq_matrix=[[1.0, 1.0]],
            eq_rhs=[2.0],
        )
        solution = solver_service.solve(program, np.array([2.0, 0.0]))
        np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-6)

    def test_infeasible_start_rejected(self):
        with pytest.raises(InfeasibleStartError):
            solver_service.solve(_simplex_lp(), np.array([0.8, 0.8]))


class TestPhaseOne:
    def test_finds_interior_point(self):
        program = _simplex_lp()
        x = solver_service.phase_one(program, np.array([2.0, 3.0]))
        assert np.all(solver_service.inequality_values(program, x) < 0)

    def test_strictly_feasible_start_returned(self):
        x0 = np.array([0.25, 0.25])
        np.testing.assert_array_equal(solver_service.phase_one(_simplex_lp(), x0), x0)

    def test_empty_feasible_set(self):
        program = ConvexProgram(
            n=1,
            blocks={"x": slice(0, 1)},
            objective=(FunctionBlock.linear("x", [[0]], [[1.0]], [0.0]),),
            constraints=(FunctionBlock.linear("cap", [[0]], [[1.0]], [1.0]),),
            lower=[0.0],
            upper=[np.inf],
        )
        with pytest.raises(InfeasibleError):
            solver_service.phase_one(program, np.array([0.5]))


class TestKktResiduals:
    def test_optimum_of_parabola(self):
        residuals = solver_service.kkt_residuals(_parabola_program(), np.array([3.0]))
        assert residuals.stationarity <= 1e-8
        assert residuals.primal_feasibility <= 1e-8
        assert residuals.complementarity <= 1e-8

    def test_interior_non_optimal_point(self):
        residuals = solver_service.kkt_residuals(_parabola_program(), np.array([5.0]))
        assert residuals.stationarity > 0

    def test_lp_vertex(self):
        residuals = solver_service.kkt_residuals(_simplex_lp(), np.array([0.5, 0.5]))
        assert residuals.worst() <= 1e-8

    def test_infeasible_point(self):
        residuals = solver_service.kkt_residuals(_simplex_lp(), np.array([1.0, 1.0]))
        assert residuals.primal_feasibility == pytest.approx(1.0)

    def test_solution_residuals_small(self):
        solution = solver_service.solve(_parabola_program(), np.array([9.0]))
        assert solution.residuals.worst() <= 1e-6
