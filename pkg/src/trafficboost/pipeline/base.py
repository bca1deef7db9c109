"""
Exception classes for ingestion, configuration, bundles and the training protocol.
"""

from pathlib import Path
from typing import Optional

from ..data.base import TrafficBoostError


class IngestError(TrafficBoostError):
    """Raised when an input file is malformed or references unknown entities"""

    def __init__(self, path: Path, line: Optional[int], message: str):
        self.path = Path(path)
        self.line = line
        self.message = message
        where = f"{self.path}" if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class ConfigError(TrafficBoostError):
    """Raised for unreadable or inconsistent pipeline configuration"""


class BundleError(TrafficBoostError):
    """Raised when a model bundle is missing, malformed or built from another config"""


class ProtocolError(TrafficBoostError):
    """Raised when the data cannot support the requested split or evaluation"""
