"""
Domain errors shared by every scheme and command
"""
from typing import Any, Dict, Optional


class CodedFogError(Exception):
    """Root of all domain errors; carries a stable code and structured details"""

    code = "coded-fog-error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "success": False,
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


class InvalidArgument(CodedFogError):
    code = "invalid-argument"


class PlacementInfeasible(CodedFogError):
    code = "placement-infeasible"


class ShuffleInfeasible(CodedFogError):
    code = "shuffle-infeasible"


class DecodeIncomplete(CodedFogError):
    code = "decode-incomplete"


class UnsupportedSize(CodedFogError):
    code = "unsupported-size"


class ConstructionFailure(CodedFogError):
    code = "construction-failure"


class NotEnoughSymbols(CodedFogError):
    code = "not-enough-symbols"


class PlanInfeasible(CodedFogError):
    code = "plan-infeasible"


class InfeasibleSweep(CodedFogError):
    code = "infeasible-sweep"


class JobFailed(CodedFogError):
    code = "job-failed"


class WorkerFailure(CodedFogError):
    """Raised inside a matmul worker that never returns a result"""

    code = "worker-failure"
