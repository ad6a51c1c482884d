"""Input checking helpers shared by the public entry points."""

import math
import numbers

import numpy as np

from .exceptions import ConfigurationError


def check_scalar(x, name, *, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if integer:
        if isinstance(x, bool) or not isinstance(x, numbers.Integral):
            raise ConfigurationError(f"{name} must be an integer, got {x!r}")
        x = int(x)
    else:
        if isinstance(x, bool) or not isinstance(x, numbers.Real):
            raise ConfigurationError(f"{name} must be a real number, got {x!r}")
        x = float(x)
        if not math.isfinite(x):
            raise ConfigurationError(f"{name} must be finite, got {x!r}")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigurationError(f"{name}={x} violates lower bound {lo}")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise ConfigurationError(f"{name}={x} violates upper bound {hi}")
    return x


def check_vector(v, name, size=None):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ConfigurationError(f"{name} must be one-dimensional, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise ConfigurationError(f"{name} has length {v.shape[0]}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return v


def check_increasing(values, name):
    values = list(values)
    if not values:
        raise ConfigurationError(f"{name} must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"{name} must be strictly increasing, got {values}")
    return values


def check_points(x, dim):
    """Coerce evaluation points to shape (npts, dim)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and dim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ConfigurationError(f"points must have shape (npts, {dim}), got {x.shape}")
    return x
