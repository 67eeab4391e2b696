"""Feedforward phase-insensitive amplifier and Gaussian cloner simulator."""

from .kernels import BACKEND
from .quadnet import V0

__version__ = "0.1.0"

__all__ = ["BACKEND", "V0", "__version__"]
