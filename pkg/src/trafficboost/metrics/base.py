"""
Exception classes for evaluation metrics.
"""

from ..data.base import TrafficBoostError


class MetricError(TrafficBoostError):
    """Raised for empty or misaligned inputs and all-IGNORE evaluation sets"""
