"""Out-of-time-order correlators for quantized torus maps and random-field spin chains."""

__version__ = "0.1.0"
