"""Training neural networks with low-resolution fixed-point weights."""

__version__ = "0.1.0"
