"""Optional compiled kernel for the kriging prediction hot path.

The benchmark integrates surrogates with 1e6-point QMC sample sets; the
spline-correlation dot product dominates that cost. This kernel fuses the
per-dimension correlation factors, the zero-aware products, and the weight
contraction into one pass. The chunked numpy implementation in
``kriging.py`` remains the reference path (and the fallback when numba is
not installed); the test suite checks the two agree.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True)
def kriging_weighted_sum(points, samples, theta, weights, with_gradients):
    """r(x) . w for every point, without materializing r.

    ``weights`` is laid out like the augmented system: N value entries then
    d blocks of N gradient entries (only the first N are read when
    ``with_gradients`` is false).
    """
    npts, d = points.shape
    n = samples.shape[0]
    out = np.zeros(npts)
    cv = np.empty(d)
    c1v = np.empty(d)
    for i in range(npts):
        acc = 0.0
        for l in range(n):
            nzero = 0
            prod = 1.0
            for j in range(d):
                hj = points[i, j] - samples[l, j]
                eta = theta[j] * abs(hj)
                if eta >= 1.0:
                    cj = 0.0
                    c1j = 0.0
                elif eta <= 0.2:
                    cj = 1.0 - 15.0 * eta * eta + 30.0 * eta * eta * eta
                    sgn = 1.0 if hj > 0.0 else (-1.0 if hj < 0.0 else 0.0)
                    c1j = theta[j] * sgn * (-30.0 * eta + 90.0 * eta * eta)
                else:
                    om = 1.0 - eta
                    cj = 1.25 * om * om * om
                    sgn = 1.0 if hj > 0.0 else -1.0
                    c1j = theta[j] * sgn * (-3.75 * om * om)
                cv[j] = cj
                c1v[j] = c1j
                if cj == 0.0:
                    nzero += 1
                else:
                    prod *= cj
            if nzero == 0:
                acc += weights[l] * prod
                if with_gradients:
                    for k in range(d):
                        acc += weights[n * (1 + k) + l] * (-c1v[k] * prod / cv[k])
            elif with_gradients and nzero == 1:
                for k in range(d):
                    if cv[k] == 0.0:
                        acc += weights[n * (1 + k) + l] * (-c1v[k] * prod)
                        break
        out[i] = acc
    return out
