"""Pump-and-dump detection and prediction from channel messages, microblog
posts and market data."""

from pumpscope.errors import DataError, PumpscopeError, ValidationError

__version__ = "0.1.0"

__all__ = ["DataError", "PumpscopeError", "ValidationError", "__version__"]
