"""Small numerical helpers shared across modules."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Gauss-Legendre nodes and weights mapped to the unit interval [0, 1].

    Returned arrays are read-only so that cached values cannot be mutated.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def kahan_cumsum(values, axis=0):
    """Cumulative compensated sum along ``axis`` with a leading zero.

    For ``values`` of length ``n`` along ``axis`` the result has length
    ``n + 1`` and entry ``k`` holds the sum of the first ``k`` terms. The loop
    runs over ``axis`` and is elementwise in every other dimension, so each
    slice gets bitwise the same result whatever the batch shape.
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.zeros((v.shape[0] + 1,) + v.shape[1:])
    total = np.zeros(v.shape[1:])
    comp = np.zeros(v.shape[1:])
    for k in range(v.shape[0]):
        y = v[k] - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[k + 1] = total
    return np.moveaxis(out, 0, axis)
