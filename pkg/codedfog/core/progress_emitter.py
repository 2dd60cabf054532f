"""
Progress Emitter for long-running commands
Records stage-by-stage progress of sweeps and pipelines and mirrors it to the log
"""
import json
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

logger = structlog.get_logger(__name__)


class NumpyJsonEncoder(json.JSONEncoder):
    """
    JSON encoder that handles NumPy types and exact rationals cleanly.
    Fractions are written as "p/q" strings so they survive the round trip unchanged.
    """

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj) if not (np.isnan(obj) or np.isinf(obj)) else None
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, Fraction):
            if obj.denominator == 1:
                return obj.numerator
            return f"{obj.numerator}/{obj.denominator}"
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        return super().default(obj)


class ProgressEmitter:
    """Emits stage progress for one command run"""

    def __init__(self, run_id: str):
        self.run_id = run_id
        self.events: List[Dict[str, Any]] = []

    def emit(
        self,
        stage: str,
        message: str,
        progress: int,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        """
        Record a progress update

        Args:
            stage: Current stage (placement_built, shuffle_encoded, sweep_point, ...)
            message: Human readable description of what's happening
            progress: Progress percentage (0-100)
            details: Optional dict with stage specific values
        """
        event = {
            "stage": str(stage),
            "message": str(message),
            "progress": max(0, min(100, int(progress))),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        if details:
            # Skip empty values so the echoed record stays compact
            event["details"] = {
                key: value
                for key, value in details.items()
                if value is not None and value != {} and value != []
            }
        self.events.append(event)
        logger.info(
            "progress",
            run_id=self.run_id,
            stage=event["stage"],
            message=event["message"],
            progress=event["progress"],
        )

    def snapshot(self) -> List[Dict[str, Any]]:
        """Events without timestamps, for deterministic output files"""
        return [
            {key: value for key, value in event.items() if key != "timestamp"}
            for event in self.events
        ]
