"""Parallel tempering MCMC with exchange moves at real-time deadlines."""

__version__ = "0.1.0"
