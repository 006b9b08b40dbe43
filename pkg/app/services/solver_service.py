"""
Барьерный метод внутренней точки для гладких выпуклых задач ConvexProgram.

Неравенства программы, нижние и верхние границы переменных учитываются логарифмическим
барьером, линейные равенства - в KKT-системе шага Ньютона. Множители неравенств в
Solution.multipliers идут в порядке: ограничения g, конечные нижние границы, конечные верхние.
"""

from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import nnls

from app.core.config import settings
from app.core.errors import InfeasibleError, InfeasibleStartError
from app.core.logging import setup_logger
from app.models.program import ConvexProgram, FunctionBlock, KktResiduals, Solution, SolveStatus

_ARMIJO = 0.01
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 80
_CENTERING_EPS = 1e-10
_MAX_STAGES = 200
_EQ_TOL = 1e-9


def _bound_masks(program: ConvexProgram) -> Tuple[np.ndarray, np.ndarray]:
    return np.isfinite(program.lower), np.isfinite(program.upper)


def inequality_values(program: ConvexProgram, x: np.ndarray) -> np.ndarray:
    """Все неравенства вида h(x) <= 0: ограничения g, затем границы переменных"""
    lo, hi = _bound_masks(program)
    return np.concatenate(
        [program.constraint_values(x), program.lower[lo] - x[lo], x[hi] - program.upper[hi]]
    )


def inequality_jacobian(program: ConvexProgram, x: np.ndarray) -> np.ndarray:
    lo, hi = _bound_masks(program)
    eye = np.eye(program.n)
    return np.vstack([program.constraint_jacobian(x), -eye[lo], eye[hi]])


def _scatter_hessian(H: np.ndarray, index: np.ndarray, local: np.ndarray) -> None:
    np.add.at(H, (index[:, :, None], index[:, None, :]), local)


def _equality_residual(program: ConvexProgram, x: np.ndarray) -> np.ndarray:
    if program.eq_matrix is None:
        return np.zeros(0)
    return program.eq_rhs - program.eq_matrix @ x


def kkt_residuals(
    program: ConvexProgram,
    point: np.ndarray,
    multipliers: Optional[np.ndarray] = None,
    active_tol: float = 1e-6,
) -> KktResiduals:
    """
    Невязки условий ККТ для задачи максимизации

    Args:
        program: Задача
        point: Проверяемая точка
        multipliers: Множители неравенств; если не заданы, подбираются NNLS по почти активным
        active_tol: Порог активности h_i >= -active_tol при подборе множителей

    Returns:
        KktResiduals: стационарность (относительно ‖∇f‖), допустимость, дополняющая нежесткость
    """
    x = np.asarray(point, dtype=float)
    grad = program.objective_gradient(x)
    h = inequality_values(program, x)
    J = inequality_jacobian(program, x)
    A = program.eq_matrix
    f = program.objective_value(x)

    if multipliers is not None:
        mu = np.asarray(multipliers, dtype=float)
        r = grad - J.T @ mu
        if A is not None:
            nu, *_ = np.linalg.lstsq(A.T, r, rcond=None)
            r = r - A.T @ nu
    else:
        active = np.flatnonzero(h >= -active_tol)
        columns = [J[active].T]
        if A is not None:
            columns += [A.T, -A.T]
        M = np.hstack(columns)
        mu = np.zeros(h.size)
        if M.shape[1]:
            coef, _ = nnls(M, grad)
            mu[active] = coef[: active.size]
            r = grad - M @ coef
        else:
            r = grad

    eq = np.abs(_equality_residual(program, x))
    feasibility = max(0.0, float(np.max(h, initial=0.0)), float(np.max(eq, initial=0.0)))
    return KktResiduals(
        stationarity=float(np.max(np.abs(r), initial=0.0)) / max(1.0, float(np.max(np.abs(grad), initial=0.0))),
        primal_feasibility=feasibility,
        complementarity=float(np.sum(mu * np.abs(h))) / max(1.0, abs(f)),
    )


class BarrierSolver:
    """Логарифмический барьер с шагом Ньютона и запасным градиентным шагом"""

    def __init__(
        self,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        mu: Optional[float] = None,
    ):
        self.tol = settings.SOLVER_TOL if tol is None else tol
        self.max_iter = settings.SOLVER_MAX_ITER if max_iter is None else max_iter
        self.mu = settings.BARRIER_MU if mu is None else mu
        self.logger = setup_logger("app.services.solver")

    def solve(
        self,
        program: ConvexProgram,
        start: np.ndarray,
        stage_done: Optional[Callable[[np.ndarray], bool]] = None,
    ) -> Solution:
        """
        Решает задачу из строго допустимой стартовой точки

        Args:
            program: Выпуклая задача
            start: Стартовая точка (g < 0, границы строго, равенства с точностью до проекции)
            stage_done: Досрочная остановка после очередной стадии барьера

        Returns:
            Solution: Точка, невязки ККТ, число итераций Ньютона и статус

        Raises:
            InfeasibleStartError: Стартовая точка не является строго допустимой
        """
        x = self._prepare_start(program, start)
        f_start = program.objective_value(x)
        m = program.n_constraints + int(np.sum(np.isfinite(program.lower)) + np.sum(np.isfinite(program.upper)))

        t = self._initial_t(program, x)
        history = []
        iterations = 0
        status = SolveStatus.OPTIMAL

        for stage in range(_MAX_STAGES):
            x, used, capped = self._center(program, x, t)
            iterations += used
            f = program.objective_value(x)
            history.append(f)
            self.logger.debug(f"Barrier stage {stage}: t={t:.3e}, f={f:.10e}, newton={used}")
            if stage_done is not None and stage_done(x):
                break
            if capped:
                status = SolveStatus.MAX_ITER
                self.logger.warning(f"Newton iteration cap {self.max_iter} reached at stage {stage}")
                break
            if m == 0 or m / t <= self.tol * max(1.0, abs(f)):
                break
            t *= self.mu
        else:
            status = SolveStatus.MAX_ITER

        h = inequality_values(program, x)
        multipliers = 1.0 / (t * np.maximum(-h, np.finfo(float).tiny))
        residuals = kkt_residuals(program, x, multipliers)
        if residuals.worst() > self.tol:
            fitted = kkt_residuals(program, x)
            if fitted.worst() < residuals.worst():
                residuals = fitted
        if status == SolveStatus.OPTIMAL and residuals.worst() > self.tol and stage_done is None:
            self.logger.debug(
                f"KKT residuals above tol: stat={residuals.stationarity:.2e}, "
                f"feas={residuals.primal_feasibility:.2e}, comp={residuals.complementarity:.2e}"
            )
            status = SolveStatus.MAX_ITER

        objective = program.objective_value(x)
        if objective < f_start - self.tol * max(1.0, abs(f_start)):
            self.logger.warning(f"Objective decreased from start: {f_start:.6e} -> {objective:.6e}")

        return Solution(
            x=x,
            objective=objective,
            residuals=residuals,
            iterations=iterations,
            status=status,
            history=tuple(history),
            multipliers=multipliers,
        )

    def phase_one(self, program: ConvexProgram, x0: np.ndarray) -> np.ndarray:
        """
        Ищет строго допустимую точку: min s при h_i(x) <= s, A x = b

        Raises:
            InfeasibleError: Строго допустимых точек нет
        """
        x0 = self._project_equalities(program, np.asarray(x0, dtype=float))
        h0 = inequality_values(program, x0)
        if h0.size == 0 or np.max(h0) < 0:
            return x0

        aux = self._phase_one_program(program)
        s0 = float(np.max(h0)) + 1.0
        z0 = np.append(x0, s0)
        solution = self.solve(aux, z0, stage_done=lambda z: z[-1] < 0.0)
        x, s = solution.x[:-1], solution.x[-1]
        if s >= 0.0:
            self.logger.error(f"Phase I failed: min max violation {s:.3e} >= 0")
            raise InfeasibleError(f"no strictly feasible point (max violation {s:.3e})")
        self.logger.debug(f"Phase I: strictly feasible point found, margin {-s:.3e}")
        return x

    def _phase_one_program(self, program: ConvexProgram) -> ConvexProgram:
        n = program.n
        s_index = n

        def shifted(block: FunctionBlock) -> FunctionBlock:
            index = np.hstack([block.index, np.full((block.size, 1), s_index)])
            width = block.index.shape[1]

            def fn(Z):
                vals, grads, hess = block.fn(Z[:, :width])
                grads = np.asarray(grads, dtype=float)
                grads = np.hstack([grads, -np.ones((grads.shape[0], 1))])
                if hess is not None:
                    hess = np.pad(np.asarray(hess, dtype=float), ((0, 0), (0, 1), (0, 1)))
                return np.asarray(vals, dtype=float) - Z[:, -1], grads, hess

            return FunctionBlock(name=f"{block.name}~s", index=index, fn=fn)

        constraints = [shifted(block) for block in program.constraints]
        lo, hi = _bound_masks(program)
        lo_idx = np.flatnonzero(lo)
        hi_idx = np.flatnonzero(hi)
        if lo_idx.size:
            constraints.append(
                FunctionBlock.linear(
                    "lower~s",
                    np.column_stack([lo_idx, np.full(lo_idx.size, s_index)]),
                    np.tile([-1.0, -1.0], (lo_idx.size, 1)),
                    program.lower[lo_idx],
                )
            )
        if hi_idx.size:
            constraints.append(
                FunctionBlock.linear(
                    "upper~s",
                    np.column_stack([hi_idx, np.full(hi_idx.size, s_index)]),
                    np.tile([1.0, -1.0], (hi_idx.size, 1)),
                    -program.upper[hi_idx],
                )
            )

        eq_matrix = None
        if program.eq_matrix is not None:
            eq_matrix = np.hstack([program.eq_matrix, np.zeros((program.n_equalities, 1))])

        lower = np.full(n + 1, -np.inf)
        lower[s_index] = -1.0
        return ConvexProgram(
            n=n + 1,
            blocks={**program.blocks, "s": slice(n, n + 1)},
            objective=(FunctionBlock.linear("min_s", [[s_index]], [[-1.0]], [0.0]),),
            constraints=tuple(constraints),
            lower=lower,
            upper=np.full(n + 1, np.inf),
            eq_matrix=eq_matrix,
            eq_rhs=program.eq_rhs,
        )

    def _project_equalities(self, program: ConvexProgram, x: np.ndarray) -> np.ndarray:
        r = _equality_residual(program, x)
        if r.size and np.max(np.abs(r)) > _EQ_TOL * max(1.0, float(np.max(np.abs(program.eq_rhs)))):
            correction, *_ = np.linalg.lstsq(program.eq_matrix, r, rcond=None)
            x = x + correction
        return x

    def _prepare_start(self, program: ConvexProgram, start: np.ndarray) -> np.ndarray:
        x = self._project_equalities(program, np.array(start, dtype=float))
        if x.shape != (program.n,):
            raise InfeasibleStartError(f"start has shape {x.shape}, expected ({program.n},)")

        offenders = []
        for block in program.constraints:
            vals = block.evaluate(x)[0]
            if vals.size and not np.all(vals < 0.0):
                offenders.append(f"{block.name} (max {float(np.max(vals)):.3e})")
        lo, hi = _bound_masks(program)
        if np.any(x[lo] <= program.lower[lo]) or np.any(x[hi] >= program.upper[hi]):
            offenders.append("bounds")
        if offenders:
            self.logger.error(f"Start is not strictly feasible: {', '.join(offenders)}")
            raise InfeasibleStartError(f"start not strictly feasible: {', '.join(offenders)}")
        return x

    def _initial_t(self, program: ConvexProgram, x: np.ndarray) -> float:
        grad_f = program.objective_gradient(x)
        _, grad_psi, _ = self._barrier_derivatives(program, x, 0.0, need_hessian=False)
        denom = float(grad_f @ grad_f)
        if denom <= 0.0:
            return 1.0
        t = float(grad_f @ grad_psi) / denom
        if not np.isfinite(t) or t <= 0.0:
            return 1.0
        return float(np.clip(t, 1e-4, 1e8))

    def _barrier_value(self, program: ConvexProgram, x: np.ndarray, t: float) -> float:
        h = inequality_values(program, x)
        if h.size and not np.all(h < 0.0):
            return np.inf
        return -t * program.objective_value(x) - float(np.sum(np.log(-h)))

    def _barrier_derivatives(self, program: ConvexProgram, x: np.ndarray, t: float, need_hessian: bool = True):
        n = program.n
        grad = -t * program.objective_gradient(x)
        H = np.zeros((n, n)) if need_hessian else None

        if need_hessian and t != 0.0:
            for block in program.objective:
                _, _, hess = block.evaluate(x)
                if hess is not None:
                    _scatter_hessian(H, block.index, -t * np.asarray(hess, dtype=float))

        for block in program.constraints:
            vals, grads, hess = block.evaluate(x)
            inv = 1.0 / (-vals)
            np.add.at(grad, block.index, grads * inv[:, None])
            if need_hessian:
                local = (inv ** 2)[:, None, None] * grads[:, :, None] * grads[:, None, :]
                if hess is not None:
                    local = local + inv[:, None, None] * np.asarray(hess, dtype=float)
                _scatter_hessian(H, block.index, local)

        lo, hi = _bound_masks(program)
        dl = x[lo] - program.lower[lo]
        du = program.upper[hi] - x[hi]
        grad[lo] -= 1.0 / dl
        grad[hi] += 1.0 / du
        if need_hessian:
            diag = np.zeros(n)
            diag[lo] += 1.0 / dl ** 2
            diag[hi] += 1.0 / du ** 2
            H[np.diag_indices(n)] += diag

        phi = self._barrier_value(program, x, t) if need_hessian else None
        return phi, grad, H

    def _newton_direction(self, program: ConvexProgram, x: np.ndarray, grad: np.ndarray, H: np.ndarray):
        A = program.eq_matrix
        r = _equality_residual(program, x)
        n = program.n
        scale = 1.0 + float(np.max(np.abs(np.diag(H)), initial=0.0))

        for reg in (0.0, 1e-10 * scale, 1e-6 * scale):
            Hr = H + reg * np.eye(n) if reg else H
            try:
                if A is None:
                    dx = np.linalg.solve(Hr, -grad)
                else:
                    p = A.shape[0]
                    kkt = np.block([[Hr, A.T], [A, np.zeros((p, p))]])
                    dx = np.linalg.solve(kkt, np.concatenate([-grad, r]))[:n]
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(dx)) and grad @ dx < 0.0:
                return dx, False

        # Запасной шаг: антиградиент в ядре A
        dx = -grad
        if A is not None:
            nu, *_ = np.linalg.lstsq(A.T, grad, rcond=None)
            dx = -(grad - A.T @ nu)
        return dx, True

    def _center(self, program: ConvexProgram, x: np.ndarray, t: float):
        """Центрирование при фиксированном t; возвращает (x, число шагов, достигнут ли лимит)"""
        for it in range(self.max_iter):
            phi, grad, H = self._barrier_derivatives(program, x, t)
            dx, fallback = self._newton_direction(program, x, grad, H)
            decrement = float(-(grad @ dx))
            if decrement / 2.0 <= _CENTERING_EPS:
                return x, it, False
            if fallback:
                self.logger.debug(f"Newton system ill-conditioned at t={t:.3e}, gradient step")

            step = 1.0
            for _ in range(_MAX_BACKTRACKS):
                candidate = x + step * dx
                value = self._barrier_value(program, candidate, t)
                if np.isfinite(value) and value <= phi - _ARMIJO * step * decrement:
                    break
                step *= _BACKTRACK
            else:
                # Дальнейшее уменьшение барьера упирается в точность вычислений
                return x, it, False
            x = candidate
        return x, self.max_iter, True


def solve(program: ConvexProgram, start: np.ndarray, tol: Optional[float] = None) -> Solution:
    return BarrierSolver(tol=tol).solve(program, start)


def phase_one(program: ConvexProgram, x0: np.ndarray) -> np.ndarray:
    return BarrierSolver().phase_one(program, x0)
