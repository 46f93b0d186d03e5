"""Deterministic simulator of batching policies for ML inference serving."""

__version__ = "0.1.0"

from .errors import InternalError, ValidationError  # noqa: F401
