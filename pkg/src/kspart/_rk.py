"""Dormand-Prince 5(4) embedded pair, shared by the physical and rescaled
integrators."""
import numpy as np

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# difference between the 5th order solution and the embedded 4th order one
E = B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640,
                  -92097 / 339200, 187 / 2100, 1 / 40])


def dopri_step(f, y, k1, dt):
    """One DP5(4) step. Returns (y_new, k_last, err) with FSAL ``k_last``."""
    ks = np.empty((7, y.size))
    ks[0] = k1
    for s in range(1, 7):
        ks[s] = f(y + dt * (np.asarray(A[s]) @ ks[:s]))
    y_new = y + dt * (B @ ks)
    err = dt * (E @ ks)
    return y_new, ks[6], err


def gap_scaled_error(err, x):
    """Max-norm of the step error measured against the local gaps.

    Each particle's error is compared to its smallest adjacent gap so that
    relative gap accuracy is controlled even when positions are far from
    the origin compared with the gaps.
    """
    g = np.diff(x)
    scale = np.empty_like(x)
    scale[0] = g[0]
    scale[-1] = g[-1]
    scale[1:-1] = np.minimum(g[:-1], g[1:])
    return float(np.max(np.abs(err) / scale))
