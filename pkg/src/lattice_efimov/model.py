"""The Efimov model operator on (0, r) x S^2, its symbol, and the constant lambda_0.

Kernels depend on the sphere variables only through ``t = <xi, eta>``, so every
operator splits into Legendre channels ``l`` of multiplicity ``2l + 1`` with
channel kernel ``2 pi int_{-1}^{1} P_l(t) K(t) dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz
from scipy.optimize import brentq

from .kernel import CountingCurve, KernelOperator

SQRT3 = np.sqrt(3.0)

# Prefactor of the y-kernel; equal to half the coefficient of the
# |p|^{-1/2}|q|^{-1/2}/(p^2 + p.q + q^2) kernel, the half coming from
# e^{y} + e^{-y} = 2 cosh y under p = e^x.
KERNEL_PREFACTOR = 1.0 / (SQRT3 * np.pi**2)
# Fourier transform of KERNEL_PREFACTOR / (cosh y + t/2) in y.
SYMBOL_PREFACTOR = 2.0 / (SQRT3 * np.pi)

DEFAULT_ANGULAR_N = 32


def legendre(l: int, t) -> np.ndarray:
    """Legendre polynomial ``P_l(t)`` by the three-term recurrence."""
    if l < 0:
        raise ValueError("Legendre degree must be nonnegative")
    t = np.asarray(t, dtype=float)
    prev, cur = np.ones_like(t), t.copy()
    if l == 0:
        return prev
    for n in range(1, l):
        prev, cur = cur, ((2 * n + 1) * t * cur - n * prev) / (n + 1)
    return cur


def legendre_table(l_max: int, t) -> np.ndarray:
    """Rows ``P_0(t) .. P_{l_max}(t)``."""
    t = np.asarray(t, dtype=float)
    out = np.empty((l_max + 1,) + t.shape)
    out[0] = 1.0
    if l_max >= 1:
        out[1] = t
    for n in range(1, l_max):
        out[n + 1] = ((2 * n + 1) * t * out[n] - n * out[n - 1]) / (n + 1)
    return out


def _sinh_ratio(lam, theta):
    """``sinh(lam * theta) / sinh(pi * lam)`` for ``0 <= theta < pi``, even in ``lam``."""
    lam = np.abs(np.asarray(lam, dtype=float))
    theta = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.exp(lam * (theta - np.pi)) * np.expm1(-2 * lam * theta) / np.expm1(-2 * np.pi * lam)
    return np.where(lam == 0, theta / np.pi, ratio)


def s_hat(t, lam):
    """Fourier transform in ``y`` of the model kernel at fixed ``t = <xi, eta>``.

    ``(2 / (sqrt(3) pi)) sinh(lam arccos(t/2)) / (sqrt(1 - t^2/4) sinh(pi lam))``,
    continued to ``lam = 0`` by its limit.

    Raises
    ------
    ValueError
        If ``|t| > 1``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise ValueError("s_hat needs |t| <= 1")
    theta = np.arccos(0.5 * t)
    return SYMBOL_PREFACTOR * _sinh_ratio(lam, theta) / np.sqrt(1.0 - 0.25 * t * t)


def s0_closed_form(y):
    """``(8/sqrt 3) sinh(pi y / 6) / (y cosh(pi y / 2))``, equal to ``4 pi / (3 sqrt 3)`` at 0."""
    y = np.abs(np.asarray(y, dtype=float))
    a, b = np.pi / 6, np.pi / 2
    small = y < 1e-4
    ys = np.where(small, 1.0, y)
    with np.errstate(over="ignore"):
        # sinh(a y)/cosh(b y) = exp((a-b) y) (1 - e^{-2ay}) / (1 + e^{-2by})
        big = np.exp((a - b) * ys) * (-np.expm1(-2 * a * ys)) / (1 + np.exp(-2 * b * ys)) / ys
    series = a * (1 + (a * a / 6 - b * b / 2) * y * y)
    return 8.0 / SQRT3 * np.where(small, series, big)


def _s0_derivative(y: float) -> float:
    a, b = np.pi / 6, np.pi / 2
    f = np.sinh(a * y) / (y * np.cosh(b * y))
    df = f * (a / np.tanh(a * y) - 1.0 / y - b * np.tanh(b * y))
    return 8.0 / SQRT3 * df


def lambda0(xtol: float = 1e-13) -> float:
    """Unique positive root of ``s0_closed_form(lam) = 1``.

    Bisection on [1e-6, 10] down to ``xtol``, then one Newton step.
    """

    def g(y):
        return float(s0_closed_form(y)) - 1.0

    lo, hi = 1e-6, 10.0
    assert g(lo) > 0 > g(hi)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return float(root - g(root) / _s0_derivative(root))


def lambda0_residual(lam: float) -> float:
    """``|lam - (8/sqrt 3) sinh(pi lam/6) / cosh(pi lam/2)|``."""
    return abs(lam - 8.0 / SQRT3 * np.sinh(np.pi * lam / 6) / np.cosh(np.pi * lam / 2))


def channel_symbol(l: int, lam, angular_n: int = DEFAULT_ANGULAR_N):
    """``2 pi int_{-1}^{1} P_l(t) s_hat(t, lam) dt`` by Gauss-Legendre quadrature."""
    t, w = leggauss(angular_n)
    lam = np.asarray(lam, dtype=float)
    vals = s_hat(t, lam[..., None])
    return 2.0 * np.pi * np.sum(w * legendre(l, t) * vals, axis=-1)


@dataclass
class SymbolTable:
    """Channel symbols tabulated on a grid of ``lam``; row ``l`` holds channel ``l``."""

    lambda_grid: np.ndarray
    values: np.ndarray
    l_max: int

    @classmethod
    def build(cls, lambda_grid, l_max: int = 6, angular_n: int = DEFAULT_ANGULAR_N) -> "SymbolTable":
        lam = np.asarray(lambda_grid, dtype=float)
        values = np.stack([channel_symbol(l, lam, angular_n) for l in range(l_max + 1)])
        return cls(lam, values, l_max)

    def closed_form_error(self) -> float:
        return float(np.max(np.abs(self.values[0] - s0_closed_form(self.lambda_grid))))


def _superlevel_measure(f, level: float, window: float, n_scan: int = 4001) -> float:
    """Lebesgue measure of ``{lam in [0, window] : f(lam) > level}``."""
    lam = np.linspace(0.0, window, n_scan)
    vals = f(lam) - level
    total = 0.0
    start = 0.0 if vals[0] > 0 else None
    for i in range(1, n_scan):
        if (vals[i - 1] > 0) != (vals[i] > 0):
            x = brentq(lambda y: float(f(y)) - level, lam[i - 1], lam[i], xtol=1e-15, rtol=1e-15)
            if start is None:
                start = x
            else:
                total += x - start
                start = None
    if start is not None:
        total += window - start
    return total


def counting_functional(
    mu: float,
    l_max: int = 6,
    lambda_window: tuple = (-20.0, 20.0),
    angular_n: int = DEFAULT_ANGULAR_N,
) -> float:
    """``U(mu) = (1/4pi) sum_l (2l+1) |{lam : S_l(lam) > mu}|``.

    Channel symbols are even in ``lam``, so the window is folded onto
    ``[0, max(|lo|, |hi|)]``; superlevel sets are located by a sign scan
    refined with Brent's method.
    """
    if mu <= 0:
        raise ValueError("counting_functional needs mu > 0")
    lo, hi = lambda_window
    if not lo < hi:
        raise ValueError("empty lambda window")
    if lo != -hi:
        raise ValueError("lambda window must be symmetric about zero")
    total = 0.0
    for l in range(l_max + 1):
        measure = _superlevel_measure(lambda y, _l=l: channel_symbol(_l, y, angular_n), mu, hi)
        total += (2 * l + 1) * 2.0 * measure
    return total / (4.0 * np.pi)


def channel_kernel(l: int, y, angular_n: int = DEFAULT_ANGULAR_N):
    """``2 pi int P_l(t) KERNEL_PREFACTOR / (cosh y + t/2) dt``."""
    t, w = leggauss(angular_n)
    y = np.asarray(y, dtype=float)
    k = KERNEL_PREFACTOR / (np.cosh(y)[..., None] + 0.5 * t)
    return 2.0 * np.pi * np.sum(w * legendre(l, t) * k, axis=-1)


def build_S_r(
    r: float,
    x_n: int | None = None,
    angular_n: int = DEFAULT_ANGULAR_N,
    l_max: int = 6,
    spacing: float = 0.05,
) -> list[KernelOperator]:
    """Channel matrices of the model operator on ``(0, r)`` (midpoint rule).

    ``x_n`` defaults to the smallest node count with spacing at most ``spacing``.
    The matrices are symmetric Toeplitz.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if x_n is None:
        x_n = int(np.ceil(r / spacing))
    h = r / x_n
    x = (np.arange(x_n) + 0.5) * h
    offsets = np.arange(x_n) * h
    return [
        KernelOperator(x, toeplitz(h * channel_kernel(l, offsets, angular_n)), f"S_{l}(r={r:g})")
        for l in range(l_max + 1)
    ]


def count_S_r(r: float, **kwargs) -> tuple[int, list[int]]:
    """Total ``n(1, S(r))`` and the per-channel counts."""
    per_l = [op.count(1.0) for op in build_S_r(r, **kwargs)]
    return sum((2 * l + 1) * c for l, c in enumerate(per_l)), per_l


def slope_S_r(r_sequence, threads: int = 1, **kwargs) -> CountingCurve:
    """Counts ``n(1, S(r))`` over ``r_sequence`` fitted linearly in ``r``."""
    r = np.asarray(r_sequence, dtype=float)
    if r.size < 2 or np.any(np.diff(r) <= 0):
        raise ValueError("r_sequence must be strictly increasing with at least two entries")
    results = _map(lambda x: count_S_r(x, **kwargs), r, threads)
    curve = CountingCurve.fit(r, [total for total, _ in results], label="n(1,S(r)) vs r")
    curve.channel_counts = np.array([per_l for _, per_l in results])
    return curve


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
