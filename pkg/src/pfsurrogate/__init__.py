"""Neural-network surrogate for AC power flow, with NR/GS/DC solvers and MATPOWER case I/O."""

__version__ = "0.1.0"
