"""Multi-objective tuning of PID and fractional-order PID controllers for a
linearized automatic voltage regulator, driven by a chaotic-map NSGA-II."""

from fopid_avr._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
