"""
Exception types shared across the lab
"""

from typing import Any, Optional


class LabError(Exception):
    """Base class for all lab errors"""


class UsageError(LabError, ValueError):
    """Raised for wrong space tags, dimension mismatches and malformed inputs"""


class BudgetExceededError(LabError, ValueError):
    """Raised when a computation would exceed a configured budget"""

    def __init__(self, message: str, estimated_cost: float, limit: float):
        super().__init__(f"{message} (estimated cost {estimated_cost:.3g}, limit {limit:.3g})")
        self.estimated_cost = estimated_cost
        self.limit = limit


class BlowUpError(LabError):
    """Raised when a trajectory leaves the finite range"""

    def __init__(self, message: str, time: float, partial: Optional[Any] = None):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time
        self.partial = partial


class ConsistencyError(LabError):
    """Raised when two independent computations of one quantity disagree"""
