"""Directory-protocol adapter exposing segmentation models to the
eo-distort robustness harness."""

from .main import main

__version__ = "0.1.0"
__all__ = ["main"]
