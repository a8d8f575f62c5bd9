"""Lattice Green functions of the two-particle free operator.

For the free fiber symbol ``E_k(t) = sum_j 2 - 2 c_j cos t_j`` with
``c_j = cos(k_j/2)`` the Fourier coefficients

    g(m; k, z) = (2 pi)^{-3} int exp(-i t.m) / (E_k(t) - z) dt

reduce, via ``1/a = int_0^inf exp(-s a) ds`` and the generating function of
the modified Bessel functions, to a one-dimensional integral

    g(m; k, z) = int_0^inf exp(-s (E_min(k) - z)) prod_j e^{-2 s c_j} I_{m_j}(2 s c_j) ds.

The integral is taken in the variable ``x = log s`` where the integrand decays
exponentially at both ends, so the trapezoidal rule converges geometrically.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ive

from .torus import twobody_band, wrap

X_LO = -40.0
X_HI = 90.0
DEFAULT_STEP = 0.05

# scipy's ive returns nan beyond ~1e9
_ASYMPTOTIC_FROM = 1e7


class ThresholdError(ValueError):
    """Energy at or above the bottom of the relevant continuous spectrum."""


def scaled_bessel(m: int, x) -> np.ndarray:
    """``exp(-x) I_m(x)`` for ``x >= 0``, with a large-argument expansion."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > _ASYMPTOTIC_FROM
    out[~big] = ive(m, x[~big])
    if np.any(big):
        xb = x[big]
        mu = 4.0 * m * m
        series = 1.0 - (mu - 1.0) / (8.0 * xb) + (mu - 1.0) * (mu - 9.0) / (2.0 * (8.0 * xb) ** 2)
        out[big] = series / np.sqrt(2.0 * np.pi * xb)
    return out


def _x_nodes(gap: float, flat_axes: int, step: float) -> np.ndarray:
    hi = X_HI
    if flat_axes and gap > 0:
        # without 3D decay the integrand is cut off only by exp(-s * gap)
        hi = max(hi, np.log(60.0 / gap))
    return np.arange(X_LO, hi + 0.5 * step, step)


def lattice_green(diffs, k, z: float, step: float = DEFAULT_STEP) -> np.ndarray:
    """Green function coefficients ``g(m; k, z)`` for integer vectors ``diffs``.

    Parameters
    ----------
    diffs : array_like, shape (N, 3)
        Integer lattice vectors ``m``.
    k : array_like, shape (3,)
        Pair quasimomentum.
    z : float
        Energy, at most ``E_min(k)``.

    Raises
    ------
    ThresholdError
        If ``z > E_min(k)``, or ``z == E_min(k)`` where the band bottom is
        degenerate along an axis and the integral diverges.
    """
    diffs = np.abs(np.asarray(diffs, dtype=int)).reshape(-1, 3)
    c = np.cos(0.5 * wrap(k))
    c = np.where(np.abs(c) < 1e-15, 0.0, c)
    e_min = twobody_band(k)[0]
    gap = e_min - z
    flat_axes = int(np.count_nonzero(c == 0.0))
    if gap < 0:
        raise ThresholdError(f"z={z!r} lies above the band bottom E_min(k)={e_min!r}")
    if gap == 0 and flat_axes:
        raise ThresholdError("Green function diverges at the bottom of a flat band")

    x = _x_nodes(gap, flat_axes, step)
    s = np.exp(x)
    base = s * np.exp(-s * gap)
    out = np.empty(len(diffs))
    cache = {}
    for i, m in enumerate(diffs):
        f = base.copy()
        for j in range(3):
            key = (j, int(m[j]))
            if key not in cache:
                cache[key] = scaled_bessel(int(m[j]), 2.0 * s * c[j])
            f *= cache[key]
        out[i] = step * np.sum(f)
    return out


def watson_integral(rtol: float = 1e-6, step: float = 0.8, max_halvings: int = 8):
    """``W = (2 pi)^{-3} int dt / dispersion(t)``, refined by halving the step.

    Returns ``(W, history)`` where ``history`` lists ``(nodes, value)`` for
    each refinement; stops once two successive values agree to ``rtol``.
    """
    history = []
    for _ in range(max_halvings + 1):
        # dispersion = E_0 / 2, so W = 2 g(0; 0, 0)
        value = 2.0 * float(lattice_green([(0, 0, 0)], np.zeros(3), 0.0, step=step)[0])
        history.append((len(_x_nodes(0.0, 0, step)), value))
        if len(history) > 1 and abs(history[-1][1] - history[-2][1]) <= rtol * abs(value):
            return value, history
        step /= 2.0
    raise RuntimeError(f"Watson integral not converged to rtol={rtol:g}: {history}")
