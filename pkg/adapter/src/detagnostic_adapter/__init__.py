"""Trainer-side reference client for the detagnostic sidecar protocol.

The package deliberately has no dependency on the detagnostic library: it
talks to a server process purely over the newline-delimited JSON protocol,
exactly as a real training framework would.
"""

from .client import (
    AdapterError,
    Exchange,
    ProtocolError,
    ServerCrashError,
    SessionOutcome,
    SessionResult,
    run_session,
)
from .curves import PATTERNS, CurveError, CurveSpec, parse_curve

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "CurveError",
    "CurveSpec",
    "Exchange",
    "PATTERNS",
    "ProtocolError",
    "ServerCrashError",
    "SessionOutcome",
    "SessionResult",
    "parse_curve",
    "run_session",
    "__version__",
]
