"""Quadrature grids on the torus (-pi, pi]^3 and the lattice dispersion symbols.

Energies are dimensionless (hopping = 1).  Grid nodes are stored in FFT index
order: node ``m`` along an axis sits at ``2*pi*m/n`` wrapped into (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap(k):
    """Reduce momenta componentwise into (-pi, pi]."""
    k = np.asarray(k, dtype=float)
    r = np.mod(k + np.pi, TWO_PI) - np.pi
    # mod maps +pi to -pi; the torus convention keeps +pi
    return np.where(r == -np.pi, np.pi, r)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform tensor grid with equal (trapezoidal) weights.

    Attributes
    ----------
    n_per_axis : int
        Nodes per axis.
    nodes : ndarray, shape (n**3, 3)
        Node coordinates in (-pi, pi], flattened in C order over the integer
        indices ``(m1, m2, m3)``.
    weight : float
        ``(2*pi/n)**3``, the same for every node.
    """

    n_per_axis: int
    nodes: np.ndarray = field(init=False, repr=False)
    weight: float = field(init=False)

    def __post_init__(self):
        n = int(self.n_per_axis)
        if n < 1:
            raise ValueError(f"n_per_axis must be positive, got {self.n_per_axis}")
        axis = wrap(TWO_PI * np.arange(n) / n)
        mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        nodes = mesh.reshape(-1, 3)
        nodes.setflags(write=False)
        object.__setattr__(self, "n_per_axis", n)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weight", (TWO_PI / n) ** 3)

    @property
    def size(self) -> int:
        return self.n_per_axis**3

    @property
    def indices(self) -> np.ndarray:
        """Integer index triples (m1, m2, m3) of the nodes, same order as ``nodes``."""
        n = self.n_per_axis
        m = np.arange(n)
        return np.stack(np.meshgrid(m, m, m, indexing="ij"), axis=-1).reshape(-1, 3)

    def flat_index(self, m) -> np.ndarray:
        """Flat node index of integer triples ``m`` (taken modulo n)."""
        m = np.mod(np.asarray(m), self.n_per_axis)
        n = self.n_per_axis
        return (m[..., 0] * n + m[..., 1]) * n + m[..., 2]

    def locate(self, k) -> np.ndarray:
        """Integer triple of the node at momentum ``k``; raises if ``k`` is off-grid."""
        k = np.asarray(k, dtype=float)
        x = k * self.n_per_axis / TWO_PI
        m = np.rint(x)
        if np.max(np.abs(x - m)) > 1e-9:
            raise ValueError(f"momentum {k.tolist()} is not a node of the n={self.n_per_axis} grid")
        return np.mod(m.astype(int), self.n_per_axis)

    def negation(self) -> np.ndarray:
        """Permutation sending node i to the node at -nodes[i]."""
        return self.flat_index(-self.indices)

    def integrate(self, values) -> float:
        return float(self.weight * np.sum(values))


@dataclass(frozen=True)
class SpectralPoint:
    """An energy together with a quasimomentum on the torus."""

    z: float
    quasimomentum: tuple

    def __post_init__(self):
        object.__setattr__(self, "quasimomentum", tuple(float(c) for c in wrap(self.quasimomentum)))


def dispersion(k):
    """Lattice dispersion ``sum_j (1 - cos k_j)`` over the last axis."""
    k = np.asarray(k, dtype=float)
    return np.sum(1.0 - np.cos(k), axis=-1)


def twobody_symbol(k, q):
    """Free two-particle energy at pair momentum ``k`` and relative momentum ``q``.

    Equals ``dispersion(k/2 - q) + dispersion(k/2 + q)`` with ``k`` taken in
    (-pi, pi], which reduces to ``sum_j 2 - 2 cos(k_j/2) cos(q_j)``.
    """
    half = 0.5 * wrap(k)
    q = np.asarray(q, dtype=float)
    return np.sum(2.0 - 2.0 * np.cos(half) * np.cos(q), axis=-1)


def twobody_band(k):
    """Closed-form band edges ``(E_min, E_max)`` of :func:`twobody_symbol` at fixed ``k``.

    The minimum is attained at ``q = 0`` and the maximum at ``q = (pi, pi, pi)``.
    """
    c = np.cos(0.5 * wrap(k))
    return float(np.sum(2.0 * (1.0 - c))), float(np.sum(2.0 * (1.0 + c)))


def threebody_symbol(K, p, q):
    """``dispersion(K - p) + dispersion(p/2 - q) + dispersion(p/2 + q)``.

    ``p`` is the pair momentum (reduced into (-pi, pi] before halving) and
    ``q`` the relative momentum of the pair.
    """
    K = np.asarray(K, dtype=float)
    p = wrap(p)
    q = np.asarray(q, dtype=float)
    return dispersion(K - p) + dispersion(0.5 * p - q) + dispersion(0.5 * p + q)


def _axis_extremes(K_j: float, n_scan: int = 4001) -> tuple[float, float]:
    from scipy.optimize import minimize_scalar

    p = np.linspace(-np.pi, np.pi, n_scan)

    def lower(x):
        return 1.0 - np.cos(K_j - x) + 2.0 - 2.0 * np.cos(0.5 * x)

    def upper(x):
        return -(1.0 - np.cos(K_j - x) + 2.0 + 2.0 * np.cos(0.5 * x))

    out = []
    for f in (lower, upper):
        vals = f(p)
        i = int(np.argmin(vals))
        lo, hi = p[max(i - 1, 0)], p[min(i + 1, n_scan - 1)]
        best = vals[i]
        if hi > lo:
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            best = min(best, float(res.fun))
        out.append(float(best))
    return out[0], -out[1]


def threebody_band(K) -> tuple[float, float]:
    """Band edges ``(E_min(K), E_max(K))`` of :func:`threebody_symbol` over (p, q).

    The symbol separates over axes; at fixed ``p`` the ``q``-extremes are the
    two-body band edges, leaving a one-dimensional search in ``p`` per axis.
    """
    K = wrap(K)
    lo = hi = 0.0
    for K_j in np.atleast_1d(K):
        a, b = _axis_extremes(float(K_j))
        lo += a
        hi += b
    return lo, hi


def converge_by_doubling(
    evaluate: Callable[[int], float],
    n_start: int = 8,
    rtol: float = 1e-8,
    n_max: int = 64,
) -> tuple[float, list[tuple[int, float]]]:
    """Double the resolution until two successive values agree to ``rtol``.

    Returns the last value and the ``(n, value)`` history.  Raises
    ``RuntimeError`` if the cap ``n_max`` is reached first.
    """
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    history = [(n_start, float(evaluate(n_start)))]
    n = n_start
    while True:
        n *= 2
        if n > n_max:
            raise RuntimeError(
                f"no convergence to rtol={rtol:g} before n_max={n_max}; history={history}"
            )
        history.append((n, float(evaluate(n))))
        prev, cur = history[-2][1], history[-1][1]
        if abs(cur - prev) <= rtol * max(abs(cur), np.finfo(float).tiny):
            return cur, history
