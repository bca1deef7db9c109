"""
Exception classes shared by every trafficboost subpackage.
"""


class TrafficBoostError(Exception):
    """Base class for all errors raised by trafficboost"""


class GraphError(TrafficBoostError):
    """Raised when a road graph cannot be used as requested"""


class SnapshotError(TrafficBoostError):
    """Raised when a counter snapshot does not match its road graph"""
