"""Network-processor DVS simulation with trace-based LOC analysis."""

__version__ = "0.1.0"
