"""Finitely supported lattice pair potentials and their momentum kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .torus import TorusGrid

NORM = (2.0 * np.pi) ** -1.5

_UNIT = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


@dataclass(frozen=True)
class LatticePotential:
    """Pair potential ``mu * c(s)`` on finitely many lattice sites ``s``.

    Shape coefficients must be even (``c(-s) == c(s)``) and nonnegative so that
    the half-power kernel is real.
    """

    sites: tuple
    shape: tuple
    mu: float = 1.0

    def __post_init__(self):
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        shape = tuple(float(c) for c in self.shape)
        if len(sites) != len(shape):
            raise ValueError("sites and coefficients differ in length")
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate lattice site in potential")
        if any(len(s) != 3 for s in sites):
            raise ValueError("lattice sites must be integer 3-vectors")
        if self.mu < 0 or not np.isfinite(self.mu):
            raise ValueError(f"coupling mu must be finite and nonnegative, got {self.mu}")
        if any(c < 0 or not np.isfinite(c) for c in shape):
            raise ValueError("potential coefficients must be finite and nonnegative")
        table = dict(zip(sites, shape))
        for s, c in table.items():
            mirror = tuple(-x for x in s)
            if not np.isclose(table.get(mirror, 0.0), c, rtol=0, atol=1e-14 * max(1.0, c)):
                raise ValueError(f"potential is not even: v({s}) != v({mirror})")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_table(cls, table: Mapping, mu: float = 1.0) -> "LatticePotential":
        items = sorted((tuple(s), c) for s, c in table.items() if c != 0)
        return cls(tuple(s for s, _ in items), tuple(c for _, c in items), mu)

    @property
    def site_array(self) -> np.ndarray:
        return np.array(self.sites, dtype=int).reshape(-1, 3)

    @property
    def coefficients(self) -> np.ndarray:
        """Coupled coefficients ``mu * c(s)``."""
        return self.mu * np.array(self.shape)

    @property
    def sqrt_coefficients(self) -> np.ndarray:
        return np.sqrt(self.coefficients)

    def with_mu(self, mu: float) -> "LatticePotential":
        return LatticePotential(self.sites, self.shape, mu)

    def scaled(self, factor: float) -> "LatticePotential":
        """Same coupling, shape multiplied by ``factor``."""
        return LatticePotential(self.sites, tuple(factor * c for c in self.shape), self.mu)

    @property
    def is_zero(self) -> bool:
        return self.mu == 0 or not any(self.shape)

    def span(self) -> int:
        """Largest per-axis distance between two support sites."""
        s = self.site_array
        if len(s) == 0:
            return 0
        return int(np.max(s.max(axis=0) - s.min(axis=0)))

    def check_grid(self, grid: TorusGrid) -> None:
        """Reject grids on which distinct support sites alias onto one Fourier mode.

        Without aliasing the discrete operator built from the square-root
        coefficients squares exactly to the one built from the coefficients.
        """
        if self.span() >= grid.n_per_axis:
            raise ValueError(
                f"grid n={grid.n_per_axis} aliases the potential support (span {self.span()})"
            )


def zero_range(mu: float) -> LatticePotential:
    return LatticePotential(((0, 0, 0),), (1.0,), mu)


def nearest_neighbor(a: float, b: float, mu: float = 1.0) -> LatticePotential:
    """On-site strength ``a`` and strength ``b`` on the six unit sites."""
    table = {(0, 0, 0): a}
    for e in _UNIT:
        table[e] = b
        table[tuple(-x for x in e)] = b
    return LatticePotential.from_table(table, mu)


def from_config(config: Mapping) -> LatticePotential:
    """Build a potential from ``{"type", "mu", "coefficients"}``.

    ``coefficients`` is a list of ``[sx, sy, sz, value]`` rows (``table``
    type), or ``[a, b]`` for ``nearest_neighbor``; unused for ``zero_range``.
    """
    kind = config.get("type")
    mu = float(config.get("mu", 1.0))
    if kind == "zero_range":
        return zero_range(mu)
    if kind == "nearest_neighbor":
        a, b = config["coefficients"]
        return nearest_neighbor(float(a), float(b), mu)
    if kind == "table":
        table = {}
        for row in config["coefficients"]:
            if len(row) != 4:
                raise ValueError(f"table rows are [sx, sy, sz, value], got {row!r}")
            table[tuple(int(x) for x in row[:3])] = float(row[3])
        return LatticePotential.from_table(table, mu)
    raise ValueError(f"unknown potential type {kind!r}")


def _trig_sum(weights, sites, p):
    p = np.asarray(p, dtype=float)
    phase = p @ sites.T if len(sites) else np.zeros(p.shape[:-1] + (0,))
    # evenness lets the sine parts cancel pairwise
    return NORM * (np.cos(phase) @ weights)


def momentum_kernel(pot: LatticePotential, p):
    """``v(p) = (2 pi)^{-3/2} sum_s mu c(s) exp(i p.s)`` (real by evenness)."""
    return _trig_sum(pot.coefficients, pot.site_array, p)


def halfpower_kernel(pot: LatticePotential, p):
    """Same sum with square-rooted lattice coefficients."""
    return _trig_sum(pot.sqrt_coefficients, pot.site_array, p)


def convolution_matrix(pot: LatticePotential, grid: TorusGrid, half: bool = False) -> np.ndarray:
    """Matrix of the convolution operator on ``grid`` with quadrature weight folded in.

    Entry ``(i, j)`` is ``w (2 pi)^{-3/2} v(p_i - p_j)``; with ``half=True`` the
    half-power kernel is used instead.
    """
    kernel = halfpower_kernel if half else momentum_kernel
    diff = grid.nodes[:, None, :] - grid.nodes[None, :, :]
    return grid.weight * NORM * kernel(pot, diff)


def aliased_symbol(pot: LatticePotential, n: int, half: bool = False) -> np.ndarray:
    """Eigenvalues of the grid convolution operator indexed by position mode (n, n, n).

    The convolution matrix is diagonalised by the discrete Fourier transform; its
    eigenvalue on mode ``m`` is the sum of coefficients over sites ``s = m mod n``.
    """
    coef = pot.sqrt_coefficients if half else pot.coefficients
    out = np.zeros((n, n, n))
    for s, c in zip(pot.site_array, coef):
        out[tuple(np.mod(s, n))] += c
    return out
