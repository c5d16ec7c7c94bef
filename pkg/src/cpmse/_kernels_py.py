"""Pure NumPy Bessel recurrence kernels.

Every routine works on a 1-D array of arguments and returns arrays of shape
``(len(x), nmax + 1)`` holding, for each order, the natural logarithm of the
function value and the logarithmic derivative ``rho = x f'(x) / f(x)``.
Working with logarithms and ratios keeps the results finite for orders and
arguments far outside the range of IEEE doubles.

The compiled extension ``cpmse._kernels`` implements the same signatures.
"""

import numpy as np
from scipy.special import i0e, k0e, k1e

LOG_HALF_PI = np.log(0.5 * np.pi)


def _top_order(nmax, x):
    # the backward recurrence damps its starting error only once the order
    # exceeds the argument, so start well above both
    return int(max(nmax + 1, np.ceil(np.max(x)))) + 40


def _log_sinh(x):
    out = np.empty_like(x)
    small = x < 1.0
    out[small] = np.log(np.sinh(x[small]))
    xb = x[~small]
    out[~small] = xb + np.log1p(-np.exp(-2.0 * xb)) - np.log(2.0)
    return out


def sph_log_riccati(lmax, x):
    """Riccati-Bessel functions ``x i_l(x)`` and ``x k_l(x)`` for l = 0..lmax.

    ``k_l`` uses the Abramowitz-Stegun normalisation
    ``k_l(x) = sqrt(pi / (2x)) K_{l+1/2}(x)`` so that ``k_0 = (pi/2) e^{-x}/x``.

    Returns
    -------
    log_i, log_k, rho_i, rho_k : ndarray, shape (len(x), lmax + 1)
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = x.size
    L = lmax + 1
    # third kind: upward recurrence on r_l = k_{l+1}/k_l
    r = np.empty((n, L))
    r[:, 0] = 1.0 + 1.0 / x
    for l in range(1, L):
        r[:, l] = 1.0 / r[:, l - 1] + (2 * l + 1) / x
    log_k = np.empty((n, L))
    log_k[:, 0] = LOG_HALF_PI - x
    if L > 1:
        log_k[:, 1:] = log_k[:, :1] + np.cumsum(np.log(r[:, :-1]), axis=1)
    ls = np.arange(L)
    rho_k = (ls + 1) - x[:, None] * r

    # first kind: backward recurrence on q_l = i_l / i_{l-1}
    top = _top_order(lmax, x)
    nu = top + 0.5
    q = x / (nu + np.sqrt(nu * nu + x * x))
    qs = np.empty((n, L + 1))
    for l in range(top - 1, 0, -1):
        q = 1.0 / ((2 * l + 1) / x + q)
        if l <= L:
            qs[:, l] = q
    qs[:, 0] = 0.0
    log_i = _log_sinh(x)[:, None] + np.cumsum(np.log(qs[:, 1 : L + 1]), axis=1)
    log_i = np.concatenate([_log_sinh(x)[:, None], log_i[:, :-1]], axis=1)
    rho_i = (ls + 1) + x[:, None] * qs[:, 1 : L + 1]
    return log_i, log_k, rho_i, rho_k


def cyl_log_bessel(mmax, x):
    """Modified cylinder Bessel functions ``I_m(x)`` and ``K_m(x)`` for m = 0..mmax.

    Returns
    -------
    log_I, log_K, rho_I, rho_K : ndarray, shape (len(x), mmax + 1)
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = x.size
    M = mmax + 1
    r = np.empty((n, M))
    r[:, 0] = k1e(x) / k0e(x)
    for m in range(1, M):
        r[:, m] = 1.0 / r[:, m - 1] + 2 * m / x
    log_K = np.empty((n, M))
    log_K[:, 0] = np.log(k0e(x)) - x
    if M > 1:
        log_K[:, 1:] = log_K[:, :1] + np.cumsum(np.log(r[:, :-1]), axis=1)
    ms = np.arange(M)
    rho_K = ms - x[:, None] * r

    top = _top_order(mmax, x)
    q = x / (top + np.sqrt(top * top + x * x))
    qs = np.empty((n, M + 1))
    for m in range(top - 1, 0, -1):
        q = 1.0 / (2 * m / x + q)
        if m <= M:
            qs[:, m] = q
    log_I0 = np.log(i0e(x)) + x
    log_I = np.empty((n, M))
    log_I[:, 0] = log_I0
    if M > 1:
        log_I[:, 1:] = log_I0[:, None] + np.cumsum(np.log(qs[:, 1:M]), axis=1)
    rho_I = ms + x[:, None] * qs[:, 1 : M + 1]
    return log_I, log_K, rho_I, rho_K
