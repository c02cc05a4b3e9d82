"""Exception hierarchy. Every error carries the CLI exit code it maps to."""


class LabError(Exception):
    exit_code = 1


class ConfigError(LabError, ValueError):
    exit_code = 2


class ArgumentError(LabError, ValueError):
    exit_code = 2


class PreconditionError(LabError, ValueError):
    exit_code = 2


class DataError(LabError, ValueError):
    exit_code = 2


class CutoffTooSmallError(PreconditionError):
    """A coherent amplitude does not fit below the occupation cutoff of its mode."""

    def __init__(self, mode: int, cutoff: int, required: int, tail: float):
        self.mode = mode
        self.cutoff = cutoff
        self.required = required
        self.tail = tail
        super().__init__(
            f"cutoff too small for mode {mode}: M={cutoff}, Poisson tail {tail:.3e}; "
            f"required M >= {required}"
        )


class ResourceError(LabError):
    exit_code = 2

    def __init__(self, message: str, dimension: int):
        self.dimension = dimension
        super().__init__(f"{message} (dimension {dimension})")


class ConvergenceError(LabError):
    """A solver ran out of iterations. Keeps the best estimate it had."""

    exit_code = 4

    def __init__(
        self,
        message: str,
        estimate: float | None = None,
        residual: float | None = None,
        trace: list[float] | None = None,
    ):
        self.estimate = estimate
        self.residual = residual
        self.trace = list(trace or [])
        detail = []
        if estimate is not None:
            detail.append(f"best estimate {estimate:.12g}")
        if residual is not None:
            detail.append(f"residual {residual:.3e}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)
