"""Shared finite-difference oracles for the derivative tests.

Step sizes follow the package-wide checking contract: 1e-4 for spatial
coordinates (tol 1e-6), 1e-5 for parameters (tol 1e-4).
"""

import numpy as np

H_SPATIAL = 1e-4
H_PARAM = 1e-5


def fd_grad(f, x, h=H_SPATIAL):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hess(f, x, h=H_SPATIAL):
    """Central-difference Hessian of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    out = np.zeros((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros_like(x)
        ei.flat[i] = h
        out[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h ** 2
        for j in range(i + 1, n):
            ej = np.zeros_like(x)
            ej.flat[j] = h
            v = (f(x + ei + ej) - f(x + ei - ej)
                 - f(x - ei + ej) + f(x - ei - ej)) / (4 * h ** 2)
            out[i, j] = out[j, i] = v
    return out
