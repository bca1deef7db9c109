"""
Exception classes for target encoding.
"""

from ..data.base import TrafficBoostError


class EncodingError(TrafficBoostError):
    """Raised for empty label sets, bad slot vectors, missing contexts or bad table payloads"""
