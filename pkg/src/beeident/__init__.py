"""Error exponents and simulation for the bee identification problem."""

__version__ = "0.1.0"
