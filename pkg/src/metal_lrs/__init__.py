"""Open learning record store with multi-source pattern mining, dashboard
indicators, a teacher-gated recommendation flow and gaze/memory statistics."""

__version__ = "0.1.0"

from .store import Store

__all__ = ["Store", "__version__"]
