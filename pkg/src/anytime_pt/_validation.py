"""Small argument checks shared by the public functions."""

import math

import numpy as np

from .exceptions import ConfigError, DomainError


def check_positive(name, value, *, strict=True, error=DomainError):
    """Return ``value`` as float after checking it is (strictly) positive."""
    value = float(value)
    ok = value > 0 if strict else value >= 0
    if not ok or math.isnan(value):
        bound = "> 0" if strict else ">= 0"
        raise error(f"{name} must be {bound}, got {value!r}")
    return value


def check_int(name, value, *, minimum=None, error=ConfigError):
    """Return ``value`` as int, rejecting non-integral input."""
    if isinstance(value, bool) or int(value) != value:
        raise error(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise error(f"{name} must be >= {minimum}, got {value}")
    return value


def as_float_array(name, values, *, ndim=1):
    """Convert to a float array with the given number of dimensions."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr
