"""Numerics laboratory for moderate deviations of bounded stationary sequences."""

__version__ = "0.1.0"

from .core import Path, ProcessModel, RngStream, SpeedSequence

__all__ = ["Path", "ProcessModel", "RngStream", "SpeedSequence", "__version__"]
