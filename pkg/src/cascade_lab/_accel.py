"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``CASCADE_LAB_NUMBA`` is not set to a false value (``0``, ``false``,
``no``, ``off``).  Both implementations are always importable under the
``*_numpy`` / ``*_numba`` names so tests and benchmarks can compare them.
"""

from __future__ import annotations

import os

import numpy as np

_FALSE = {"0", "false", "no", "off"}

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CASCADE_LAB_NUMBA", "1").strip().lower() not in _FALSE

# Grid points per chunk in the numpy nested-integral path (bounds peak memory).
_CHUNK = 64


def joint_amplitude_grid_numpy(ws, wi, tau, half_rate):
    s = ws[:, None]
    i = wi[None, :]
    return np.exp(-((s + i) ** 2) * (tau * tau / 8.0)) / (half_rate - 1j * i)


def nested_time_integral_numpy(t, b, dws, dwi, half_rate):
    """Trapezoid evaluation of the nested double time integral.

    For each detuning pair ``(dws[p], dwi[p])`` computes::

        int_t0^T dt' exp((-g + i dwi) t') int_t0^t' dt'' exp((g + i dws) t'') b(t'')

    on the uniform time grid ``t`` with samples ``b``; ``g = half_rate``.
    """
    h = t[1] - t[0]
    out = np.empty(dws.shape[0], dtype=np.complex128)
    for start in range(0, dws.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        g = b[None, :] * np.exp((half_rate + 1j * dws[sl, None]) * t[None, :])
        inner = np.zeros_like(g)
        inner[:, 1:] = np.cumsum(0.5 * h * (g[:, 1:] + g[:, :-1]), axis=1)
        outer = np.exp((-half_rate + 1j * dwi[sl, None]) * t[None, :]) * inner
        out[sl] = h * (outer.sum(axis=1) - 0.5 * (outer[:, 0] + outer[:, -1]))
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def joint_amplitude_grid_numba(ws, wi, tau, half_rate):
        ns = ws.shape[0]
        ni = wi.shape[0]
        out = np.empty((ns, ni), dtype=np.complex128)
        c = tau * tau / 8.0
        for k in range(ni):
            den = 1.0 / complex(half_rate, -wi[k])
            for j in range(ns):
                x = ws[j] + wi[k]
                out[j, k] = np.exp(-x * x * c) * den
        return out

    @njit(cache=True)
    def nested_time_integral_numba(t, b, dws, dwi, half_rate):
        n = t.shape[0]
        h = t[1] - t[0]
        out = np.empty(dws.shape[0], dtype=np.complex128)
        for p in range(dws.shape[0]):
            a_in = complex(half_rate, dws[p])
            a_out = complex(-half_rate, dwi[p])
            inner = 0.0 + 0.0j
            g_prev = b[0] * np.exp(a_in * t[0])
            o_prev = 0.0 + 0.0j
            acc = 0.0 + 0.0j
            for m in range(1, n):
                g = b[m] * np.exp(a_in * t[m])
                inner += 0.5 * h * (g + g_prev)
                g_prev = g
                o = np.exp(a_out * t[m]) * inner
                acc += 0.5 * h * (o + o_prev)
                o_prev = o
            out[p] = acc
        return out

else:  # pragma: no cover
    joint_amplitude_grid_numba = None
    nested_time_integral_numba = None


if USE_NUMBA:
    joint_amplitude_grid = joint_amplitude_grid_numba
    nested_time_integral = nested_time_integral_numba
else:
    joint_amplitude_grid = joint_amplitude_grid_numpy
    nested_time_integral = nested_time_integral_numpy


def backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
