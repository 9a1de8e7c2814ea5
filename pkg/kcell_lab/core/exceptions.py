# kcell_lab/core/exceptions.py

from typing import Optional, Dict, List, Tuple


class KCellError(Exception):
    """Base error of the simulation library"""
    def __init__(self, message: str, details: Optional[Dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class ValidationError(KCellError):
    def __init__(self, message: str, field: str = None):
        self.field = field
        super().__init__(message, {"field": field} if field else None)


class ConfigValidationError(KCellError):
    """Campaign config failed validation; lists every violated field"""
    def __init__(self, errors: List[Tuple[str, str]]):
        self.errors = list(errors)
        lines = [f"{loc}: {msg}" for loc, msg in self.errors]
        super().__init__("Invalid campaign config:\n  " + "\n  ".join(lines),
                         {"errors": self.errors})


class DimensionError(KCellError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"Expected dimension {expected}, got {got}")


class UnboundedError(KCellError):
    """A finite support value was needed but the region is unbounded"""
    def __init__(self, direction=None):
        self.direction = direction
        super().__init__("Halfspace intersection is unbounded",
                         {"direction": None if direction is None else list(direction)})


class InfeasibleError(KCellError):
    """Raised when the constraints have no solution (construction bug)"""
    pass


class WindowTooSmall(KCellError):
    def __init__(self, excess: float):
        self.excess = excess
        super().__init__(f"Window does not contain the body (support excess {excess:.3e})")


class HitsUnitBall(KCellError):
    def __init__(self, offset: float):
        self.offset = offset
        super().__init__(f"Hyperplane with offset {offset:.6g} meets the unit ball")


class HitsBody(KCellError):
    def __init__(self, gap: float):
        self.gap = gap
        super().__init__(f"Hyperplane meets the body (gap {gap:.3e})")


class NotNested(KCellError):
    def __init__(self, violation: float):
        self.violation = violation
        super().__init__(f"Bodies are not nested (support violation {violation:.3e})")


class DegenerateGrid(KCellError):
    pass


class TruncationLimitExceeded(KCellError):
    def __init__(self, n: float, frequency: float, limit: float):
        self.n = n
        self.frequency = frequency
        super().__init__(
            f"Truncation frequency {frequency:.4f} at n={n:g} exceeds {limit:.4f}; "
            "window misconfigured",
            {"n": n, "frequency": frequency, "limit": limit}
        )


class ReplayMismatch(KCellError):
    def __init__(self, first_row: int, expected: str, got: str):
        self.first_row = first_row
        self.expected = expected
        self.got = got
        super().__init__(
            f"Replay differs at row {first_row}:\n  expected: {expected}\n  got:      {got}"
        )
