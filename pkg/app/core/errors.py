from typing import List, Optional, Sequence


class UrisMecError(Exception):
    """Базовая ошибка приложения; detail - однострочное описание для CLI"""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ScenarioError(UrisMecError):
    """Ошибка разбора или валидации сценария; всегда называет поле"""

    def __init__(self, field: str, detail: str, errors: Optional[list] = None):
        super().__init__(f"{field}: {detail}")
        self.field = field
        self.errors = errors or []


class InfeasibleError(UrisMecError):
    pass


class SolverError(UrisMecError):
    pass


class InfeasibleStartError(SolverError):
    pass


class RoundingError(UrisMecError):
    """Ремонт округленного расписания не смог обеспечить пользователям минимальную скорость"""

    def __init__(self, detail: str, starved_users: Sequence[int] = ()):
        super().__init__(detail)
        self.starved_users: List[int] = list(starved_users)


class ConvergenceError(UrisMecError):
    def __init__(self, detail: str, trace: Sequence[float] = ()):
        super().__init__(detail)
        self.trace: List[float] = list(trace)


class UsageError(UrisMecError):
    """Неверные аргументы командной строки"""
