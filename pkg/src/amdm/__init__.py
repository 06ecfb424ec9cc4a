"""Amplitude modulation / demodulation toolkit for 1/f fluctuation studies."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
