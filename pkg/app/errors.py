from enum import Enum
from typing import Optional


class ErrorCode(str, Enum):
    CYCLIC_ROUTING = "CYCLIC_ROUTING"
    DANGLING_NEXT_CLASS = "DANGLING_NEXT_CLASS"
    DUPLICATE_CLASS = "DUPLICATE_CLASS"
    BAD_PRIORITY = "BAD_PRIORITY"
    BAD_CAPACITY = "BAD_CAPACITY"
    NEGATIVE_TIME = "NEGATIVE_TIME"
    PARSE_ERROR = "PARSE_ERROR"
    INIT_CONFLICT = "INIT_CONFLICT"
    OVERSHOOT = "OVERSHOOT"
    NONTERMINATION_GUARD = "NONTERMINATION_GUARD"
    JOB_LIMIT = "JOB_LIMIT"
    NEGATIVE_COUNTER = "NEGATIVE_COUNTER"
    BAD_MACHINE = "BAD_MACHINE"


class QnetError(Exception):
    """Base error; every subclass carries an error code and a CLI exit code"""

    exit_code = 2

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(f"{code.value}: {message}")
        self.code = code
        self.message = message


class NetworkValidationError(QnetError):
    pass


class ParseError(QnetError):
    def __init__(self, message: str, path: Optional[str] = None, field: Optional[str] = None):
        where = ":".join(p for p in (path, field) if p)
        super().__init__(ErrorCode.PARSE_ERROR, f"{where}: {message}" if where else message)
        self.path = path
        self.field = field


class InitConflictError(QnetError):
    def __init__(self, message: str):
        super().__init__(ErrorCode.INIT_CONFLICT, message)


class OvershootError(QnetError):
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(ErrorCode.OVERSHOOT, message)


class NonterminationError(QnetError):
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(ErrorCode.NONTERMINATION_GUARD, message)


class JobLimitExceeded(QnetError):
    exit_code = 5

    def __init__(self, live_jobs: int, limit: int, clock):
        super().__init__(ErrorCode.JOB_LIMIT, f"{live_jobs} live jobs exceed limit {limit} at t={clock}")
        self.live_jobs = live_jobs
        self.limit = limit
        self.clock = clock


class MachineError(QnetError):
    exit_code = 6

    def __init__(self, message: str):
        super().__init__(ErrorCode.BAD_MACHINE, message)


class NegativeCounterError(QnetError):
    exit_code = 6

    def __init__(self, message: str, step: int = 0):
        super().__init__(ErrorCode.NEGATIVE_COUNTER, message)
        self.step = step
