"""Long-time homogenization of the periodic wave equation in one space dimension."""

__version__ = "0.1.0"
