"""Pure NumPy fallback for the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def propagate(phi, gamma, c, d, u, x0, limit):
    n = phi.shape[0]
    m = u.shape[0]
    y = np.zeros((c.shape[0], m))
    x = np.array(x0, dtype=float, copy=True)
    diverged = -1
    if n == 0:
        y[:] = np.outer(d, u)
        return y, x, diverged
    for k in range(m):
        y[:, k] = c @ x + d * u[k]
        if k == m - 1:
            break
        x = phi @ x + gamma * u[k]
        if not np.all(np.abs(x) <= limit):
            diverged = k + 1
            break
    return y, x, diverged


def gl_convolve(f, w):
    return np.convolve(f, w)[: f.shape[0]]
