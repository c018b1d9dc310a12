"""Uniform z-grids with composite Simpson weights."""

import numpy as np


def simpson_weights(n: int, length: float) -> np.ndarray:
    """Composite Simpson weights on ``n`` uniform nodes spanning ``[0, length]``.

    For an even node count the last three intervals use the 3/8 rule, so the
    weights integrate cubics exactly for any ``n >= 4`` (``n = 3`` is plain
    Simpson).
    """
    if n < 3:
        raise ValueError("need at least 3 nodes")
    dz = length / (n - 1)
    w = np.zeros(n)
    m = n - 1 if n % 2 == 1 else n - 4  # intervals covered by Simpson 1/3
    if m > 0:
        w[0:m + 1:2] += 2.0
        w[1:m:2] += 4.0
        w[0] -= 1.0
        w[m] -= 1.0
        w[: m + 1] *= dz / 3.0
    if n % 2 == 0:
        if n < 4:
            raise ValueError("need at least 4 nodes for an even count")
        w[m:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * dz / 8.0)
    return w


def uniform_grid(n: int, length: float):
    """Return nodes and Simpson weights on ``[0, length]``."""
    return np.linspace(0.0, length, n), simpson_weights(n, length)
