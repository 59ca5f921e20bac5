"""Lobachevsky function and its first two derivatives.

    L(x) = -int_0^x ln|2 sin t| dt

L is odd and pi-periodic. On [0, pi/2] it is evaluated from the series

    L(x) = x - x ln(2x) + sum_{n>=1} zeta(2n) x^(2n+1) / (n (2n+1) pi^(2n))

which carries the log singularity at 0 in closed form. Other arguments are
folded into [0, pi/2] using oddness and periodicity.

All functions accept scalars or numpy arrays and return the same shape.
"""

import numpy as np
from scipy.special import zeta

from .errors import DomainError, SingularityError

__all__ = ["lob", "lob_deriv", "lob_second"]

_SERIES_CUTOFF = 1e-16
# closest approach to a multiple of pi accepted by the derivatives
_POLE_EPS = 1e-300


def _series_coefficients():
    # c_n multiplies x^(2n+1); largest x is pi/2, where the n-th term is
    # bounded by zeta(2n) / (n (2n+1) 4^n) * pi/2
    coeffs = []
    n = 1
    while True:
        c = zeta(2 * n) / (n * (2 * n + 1) * np.pi ** (2 * n))
        coeffs.append(c)
        if c * (np.pi / 2) ** (2 * n + 1) < _SERIES_CUTOFF:
            break
        n += 1
    return np.array(coeffs)


_COEFFS = _series_coefficients()


def _lob_fundamental(x):
    """Series evaluation for x in [0, pi/2]."""
    x2 = x * x
    # Horner in x^2 over sum_n c_n x^(2n), then times x
    acc = np.zeros_like(x)
    for c in _COEFFS[::-1]:
        acc = (acc + c) * x2
    with np.errstate(divide="ignore", invalid="ignore"):
        logterm = np.where(x > 0, x * np.log(2.0 * np.where(x > 0, x, 1.0)), 0.0)
    return x - logterm + x * acc


def lob(x):
    """Lobachevsky function, absolute error <= 1e-12 on [0, pi]."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Lobachevsky function needs finite arguments")
    # reduce to [0, pi), then fold (pi/2, pi) onto (0, pi/2) with a sign flip
    r = np.mod(arr, np.pi)
    upper = r > np.pi / 2
    folded = np.where(upper, np.pi - r, r)
    val = _lob_fundamental(folded)
    val = np.where(upper, -val, val)
    return float(val) if np.ndim(val) == 0 else val


def _check_poles(arr, name):
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} needs finite arguments")
    s = np.sin(arr)
    if np.any(np.abs(s) <= _POLE_EPS) or np.any(np.mod(arr, np.pi) == 0.0):
        raise SingularityError(f"{name} is singular at integer multiples of pi")
    return s


def lob_deriv(x):
    """First derivative, -ln|2 sin x|."""
    arr = np.asarray(x, dtype=float)
    s = _check_poles(arr, "lob_deriv")
    val = -np.log(2.0 * np.abs(s))
    return float(val) if np.ndim(val) == 0 else val


def lob_second(x):
    """Second derivative, -cot x."""
    arr = np.asarray(x, dtype=float)
    s = _check_poles(arr, "lob_second")
    val = -np.cos(arr) / s
    return float(val) if np.ndim(val) == 0 else val
