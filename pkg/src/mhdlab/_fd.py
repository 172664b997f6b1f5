"""High-order finite differences of user closures (internal).

Used to evaluate wall traces and t=0 derivatives of scenario data to
well below the compatibility tolerances.  Closures must be evaluable in
a small neighbourhood of their nominal domain (all shipped data are
entire trigonometric expressions).
"""

from __future__ import annotations

import math

import numpy as np

H_Z = 1e-2
H_T = 1e-3
OFF_CENTERED = np.arange(-4, 5)  # order >= 6 for derivatives <= 3
OFF_FORWARD = np.arange(0, 7)  # order 6 one-sided first derivative


def fd_weights(offsets: np.ndarray, m: int) -> np.ndarray:
    """Weights for the m-th derivative on integer offsets (scale by h**-m)."""
    n = offsets.size
    V = np.vander(np.asarray(offsets, float), n, increasing=True).T
    rhs = np.zeros(n)
    rhs[m] = math.factorial(m)
    return np.linalg.solve(V, rhs)


def dnz(f, z0: float, m: int = 1, h: float = H_Z):
    """m-th derivative at z0 of a closure of z (scalar or array valued)."""
    w = fd_weights(OFF_CENTERED, m) / h**m
    return sum(wi * np.asarray(f(z0 + o * h)) for wi, o in zip(w, OFF_CENTERED))


def dnt0(f, h: float = H_T):
    """First derivative at t=0 of a closure of t, one-sided."""
    w = fd_weights(OFF_FORWARD, 1) / h
    return sum(wi * np.asarray(f(o * h)) for wi, o in zip(w, OFF_FORWARD))
