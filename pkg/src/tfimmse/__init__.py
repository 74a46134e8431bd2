"""Time-frequency I-MMSE toolkit."""

__version__ = "0.1.0"
