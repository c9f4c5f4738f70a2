"""Hot loops, each as a numba kernel plus a numpy twin with the same signature.

The public names at the bottom point at the numba versions when numba is
available and ``ROUGHSHEAR_NO_NUMBA`` is unset, and at the numpy versions
otherwise. Both variants are importable directly for cross-checks.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import HAVE_NUMBA, njit

# ---------------------------------------------------------------- path phases


def path_phase_integrals_numpy(z, scale, ds, freqs):
    """Midpoint-rule ``int_0^t exp(i w B_s) ds`` for every path and frequency.

    ``z`` holds standard normals of shape ``(n_paths, 2 * n_steps)``; each
    pair drives half a time step, so odd partial sums land exactly on the
    step midpoints. ``scale`` multiplies the Brownian path (``sqrt(ds/2)``
    times the noise amplitude). Returns ``(integrals, endpoints)`` where
    ``endpoints`` is the scaled path value at the final time.
    """
    b = np.cumsum(z * scale, axis=1)
    mids = b[:, 0::2]
    out = np.empty((z.shape[0], freqs.size), dtype=np.complex128)
    for i, w in enumerate(freqs):
        out[:, i] = ds * np.exp(1j * w * mids).sum(axis=1)
    return out, b[:, -1].copy()


@njit(nogil=True)
def path_phase_integrals_numba(z, scale, ds, freqs):
    n_paths, n_half = z.shape
    n_f = freqs.size
    out = np.zeros((n_paths, n_f), dtype=np.complex128)
    ends = np.empty(n_paths)
    for p in range(n_paths):
        b = 0.0
        acc_re = np.zeros(n_f)
        acc_im = np.zeros(n_f)
        for j in range(0, n_half, 2):
            b += scale * z[p, j]
            for i in range(n_f):
                a = freqs[i] * b
                acc_re[i] += np.cos(a)
                acc_im[i] += np.sin(a)
            b += scale * z[p, j + 1]
        for i in range(n_f):
            out[p, i] = ds * (acc_re[i] + 1j * acc_im[i])
        ends[p] = b
    return out, ends


# ---------------------------------------------------------------- affine windows


def affine_window_rss_numpy(values, half_width):
    """Residual sum of squares of the best affine fit on every centred window.

    Windows have ``2*half_width + 1`` samples and wrap periodically.
    """
    d = half_width
    ext = np.concatenate([values[-d:], values, values[:d]])
    win = sliding_window_view(ext, 2 * d + 1)
    x = np.arange(-d, d + 1, dtype=float)
    mean = win.mean(axis=1, keepdims=True)
    slope = (win @ x / (x @ x))[:, None]
    res = win - mean - slope * x
    return np.einsum("ij,ij->i", res, res)


@njit(nogil=True)
def affine_window_rss_numba(values, half_width):
    n = values.size
    d = half_width
    sxx = 0.0
    for i in range(-d, d + 1):
        sxx += i * i
    inv_len = 1.0 / (2 * d + 1)
    out = np.empty(n)
    for c in range(n):
        s = 0.0
        sx = 0.0
        for i in range(-d, d + 1):
            v = values[(c + i) % n]
            s += v
            sx += i * v
        mean = s * inv_len
        slope = sx / sxx
        r2 = 0.0
        for i in range(-d, d + 1):
            r = values[(c + i) % n] - mean - slope * i
            r2 += r * r
        out[c] = r2
    return out


# ---------------------------------------------------------------- all-interval scan


def interval_deviations_numpy(values, basis, p):
    """Normalized L^p deviation from the discrete L2 projection, every start.

    ``basis`` has shape ``(L, k+1)`` and is orthonormal for the averaged
    inner product ``(1/L) sum``. Windows do not wrap, so there are
    ``N - L + 1`` of them.
    """
    L = basis.shape[0]
    win = sliding_window_view(values, L)
    coef = win @ basis / L
    res = win - coef @ basis.T
    if p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", res, res) / L)
    return np.mean(np.abs(res) ** p, axis=1) ** (1.0 / p)


@njit(nogil=True)
def interval_deviations_numba(values, basis, p):
    L, nb = basis.shape
    n_win = values.size - L + 1
    out = np.empty(n_win)
    coef = np.empty(nb)
    for s in range(n_win):
        for q in range(nb):
            acc = 0.0
            for i in range(L):
                acc += values[s + i] * basis[i, q]
            coef[q] = acc / L
        tot = 0.0
        for i in range(L):
            r = values[s + i]
            for q in range(nb):
                r -= coef[q] * basis[i, q]
            if p == 2.0:
                tot += r * r
            elif p == 1.0:
                tot += abs(r)
            else:
                tot += abs(r) ** p
        out[s] = (tot / L) ** (1.0 / p)
    return out


if HAVE_NUMBA:
    path_phase_integrals = path_phase_integrals_numba
    affine_window_rss = affine_window_rss_numba
    interval_deviations = interval_deviations_numba
else:
    path_phase_integrals = path_phase_integrals_numpy
    affine_window_rss = affine_window_rss_numpy
    interval_deviations = interval_deviations_numpy
