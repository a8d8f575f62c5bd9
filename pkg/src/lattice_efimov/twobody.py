"""Two-particle fiber operators h(k), their Birman-Schwinger operators, and the
zero-energy resonance.

Two discretisations of ``G(k, z) = v^{1/2} (h0(k) - z)^{-1} v^{1/2}`` are used:

* ``inner="grid"`` evaluates the resolvent on the same torus grid as the outer
  variables.  It is the exact Birman-Schwinger partner of the grid matrix of
  ``h(k)``, so eigenvalue counts agree as integers.
* ``inner="exact"`` samples the continuum kernel.  For a finitely supported
  potential the kernel is a finite sum over pairs of support sites weighted by
  lattice Green functions, so no quadrature of the (near-)singular resolvent
  on the torus is needed and ``z = E_min(k)`` is admissible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .greens import ThresholdError, lattice_green
from .kernel import KernelOperator, count_above, count_below
from .potential import LatticePotential, convolution_matrix, halfpower_kernel
from .torus import TorusGrid, twobody_band, twobody_symbol, wrap

__all__ = [
    "BirmanSchwingerMismatch",
    "ConditioningError",
    "ExpansionReport",
    "ResonanceCalibration",
    "ThresholdError",
    "bound_state_energy",
    "build_G",
    "build_h",
    "calibrate_resonance",
    "count_two_body",
    "expansion_check_G",
    "reduced_G",
    "resonance_witness_w",
    "two_body_counts",
]


class BirmanSchwingerMismatch(RuntimeError):
    """Direct and Birman-Schwinger eigenvalue counts disagree."""


class ConditioningError(RuntimeError):
    """``I - G`` is numerically singular."""


def _support_differences(pot: LatticePotential):
    s = pot.site_array
    diffs = (s[:, None, :] - s[None, :, :]).reshape(-1, 3)
    key = np.abs(diffs)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    return uniq, inverse.reshape(len(s), len(s))


def reduced_G(pot: LatticePotential, k, z: float) -> np.ndarray:
    """``G(k, z)`` in the orthonormal basis ``(2 pi)^{-3/2} exp(i p.s)`` of support sites.

    Entry ``(s, s')`` is ``sqrt(v(s)) g(s - s'; k, z) sqrt(v(s'))``.  The nonzero
    spectrum coincides with that of the integral operator.
    """
    if len(pot.sites) == 0:
        return np.zeros((0, 0))
    uniq, inverse = _support_differences(pot)
    g = lattice_green(uniq, k, z)[inverse]
    r = pot.sqrt_coefficients
    return r[:, None] * g * r[None, :]


def _top_eig(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(linalg.eigvalsh(matrix)[-1])


def _fourier_basis(pot: LatticePotential, grid: TorusGrid) -> np.ndarray:
    """Grid samples of the support basis with sqrt(weight) folded in; orthonormal columns."""
    pot.check_grid(grid)
    phase = grid.nodes @ pot.site_array.T
    return np.exp(1j * phase) / grid.n_per_axis**1.5


def build_h(pot: LatticePotential, k, grid: TorusGrid) -> KernelOperator:
    """Grid matrix of ``h(k) = h0(k) - v``."""
    pot.check_grid(grid)
    mat = np.diag(twobody_symbol(k, grid.nodes)) - convolution_matrix(pot, grid)
    return KernelOperator(grid, mat, f"h(k={wrap(k).tolist()})")


def build_G(pot: LatticePotential, k, z: float, grid: TorusGrid, inner: str = "exact") -> KernelOperator:
    """Nystrom matrix of the Birman-Schwinger operator ``G(k, z)``.

    Raises
    ------
    ThresholdError
        ``z`` above ``E_min(k)`` (``inner="exact"``) or not strictly below it
        (``inner="grid"``).
    """
    e_min = twobody_band(k)[0]
    label = f"G(k={wrap(k).tolist()}, z={z!r}, inner={inner})"
    if inner == "grid":
        if not z < e_min:
            raise ThresholdError(f"grid resolvent needs z < E_min(k)={e_min!r}, got {z!r}")
        pot.check_grid(grid)
        half = convolution_matrix(pot, grid, half=True)
        resolvent = 1.0 / (twobody_symbol(k, grid.nodes) - z)
        mat = half @ (resolvent[:, None] * half)
        return KernelOperator(grid, 0.5 * (mat + mat.T), label)
    if inner != "exact":
        raise ValueError(f"inner must be 'exact' or 'grid', got {inner!r}")
    u = _fourier_basis(pot, grid)
    mat = (u @ reduced_G(pot, k, z) @ u.conj().T).real
    return KernelOperator(grid, 0.5 * (mat + mat.T), label)


def two_body_counts(pot: LatticePotential, k, z: float, grid: TorusGrid) -> tuple[int, int]:
    """``(n(-z, -h(k)), n(1, G(k, z)))`` on the grid."""
    g = build_G(pot, k, z, grid, inner="grid")
    h = build_h(pot, k, grid)
    return count_below(h.matrix, z), count_above(g.matrix, 1.0)


def count_two_body(pot: LatticePotential, k, z: float, grid: TorusGrid) -> int:
    """Eigenvalues of ``h(k)`` below ``z``, cross-checked against ``n(1, G(k, z))``."""
    direct, bs = two_body_counts(pot, k, z, grid)
    if direct != bs:
        raise BirmanSchwingerMismatch(f"n(-z,-h)={direct} but n(1,G)={bs} at k={k}, z={z}")
    return bs


@dataclass
class ResonanceCalibration:
    """Coupling at which ``G(0, 0)`` has top eigenvalue one.

    ``psi`` holds grid samples of the resonance eigenfunction normalised in
    ``L2(T^3)`` (so ``weight * sum(psi**2) == 1``); ``coefficients`` are its
    coordinates in the support basis.
    """

    mu_star: float
    psi: np.ndarray
    phi0: float
    residual: float
    potential: LatticePotential
    grid: TorusGrid
    coefficients: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        """Unit Euclidean vector matching the Nystrom matrices."""
        return np.sqrt(self.grid.weight) * self.psi

    @property
    def witness_limit(self) -> float:
        """``8 pi / phi0**2``, the limit of ``|k| (w(k, 0) psi, psi)``."""
        return 8.0 * np.pi / self.phi0**2


def calibrate_resonance(pot_shape: LatticePotential, grid: TorusGrid) -> ResonanceCalibration:
    """Tune the coupling to the zero-energy resonance of ``h(0)``.

    ``G(0, 0)`` is linear in the coupling, so the resonant coupling is the
    reciprocal of the top eigenvalue at unit coupling.
    """
    if pot_shape.is_zero:
        raise ValueError("resonance calibration needs a nonzero potential shape")
    unit = pot_shape.with_mu(1.0)
    vals, vecs = linalg.eigh(reduced_G(unit, np.zeros(3), 0.0))
    top = float(vals[-1])
    if len(vals) > 1 and vals[-2] > top * (1 - 1e-9):
        raise RuntimeError("top eigenvalue of G(0,0) is degenerate; resonance not simple")
    mu_star = 1.0 / top
    pot = pot_shape.with_mu(mu_star)
    a = vecs[:, -1]
    root = pot.sqrt_coefficients
    if root @ a < 0:
        a = -a

    u = _fourier_basis(pot, grid)
    psi = (u @ a).real / np.sqrt(grid.weight)
    if np.max(np.abs(psi - psi[grid.negation()])) > 1e-10 * np.max(np.abs(psi)):
        raise RuntimeError("resonance eigenfunction is not even")
    phi0 = grid.integrate(halfpower_kernel(pot, grid.nodes) * psi)
    if abs(phi0) < 1e-12:
        raise RuntimeError("phi(0) vanishes: threshold eigenvalue, not a resonance")
    residual = abs(_top_eig(reduced_G(pot, np.zeros(3), 0.0)) - 1.0)
    return ResonanceCalibration(mu_star, psi, phi0, residual, pot, grid, a)


def bound_state_energy(
    pot: LatticePotential,
    k,
    xtol: float = 1e-12,
    resonance_tol: float = 1e-10,
) -> float | None:
    """Eigenvalue of ``h(k)`` below ``E_min(k)``, or ``None`` if there is none.

    Solves ``top eigenvalue of G(k, z) == 1`` by bisection in ``z`` (the top
    eigenvalue increases with ``z``) followed by one secant step.  When the
    equation holds at ``z = E_min(k)`` within ``resonance_tol`` the threshold
    itself is returned.  Only the top eigenvalue is followed, i.e. the lowest
    eigenvalue of ``h(k)``.
    """
    e_min = twobody_band(k)[0]

    def f(z):
        return _top_eig(reduced_G(pot, k, z)) - 1.0

    try:
        f_hi = f(e_min)
    except ThresholdError:
        f_hi = np.inf
    if f_hi < -resonance_tol:
        return None
    if f_hi <= resonance_tol:
        return e_min

    width = 1.0
    lo = e_min - width
    f_lo = f(lo)
    while f_lo >= 0:
        width *= 2.0
        if width > 1e6:
            raise RuntimeError("could not bracket the bound state from below")
        lo = e_min - width
        f_lo = f(lo)
    hi = e_min
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    z = 0.5 * (lo + hi)
    if np.isfinite(f_hi) and f_hi != f_lo:
        secant = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        if lo <= secant <= hi:
            z = secant
    return float(z)


@dataclass
class ExpansionReport:
    """Difference quotients of ``G`` against the rank-one first-order term."""

    steps: np.ndarray
    distances: np.ndarray
    ratios: np.ndarray
    limit: np.ndarray
    route: str


def _first_order_term(cal: ResonanceCalibration, grid: TorusGrid, coefficient: float) -> np.ndarray:
    r = halfpower_kernel(cal.potential, grid.nodes)
    return coefficient * grid.weight * np.outer(r, r)


def difference_quotient(cal: ResonanceCalibration, grid: TorusGrid, k=None, z=None) -> np.ndarray:
    """``(G(k, 0) - G(0, 0)) / |k|`` or ``(G(0, z) - G(0, 0)) / sqrt(-z)`` on ``grid``."""
    base = build_G(cal.potential, np.zeros(3), 0.0, grid).matrix
    if k is not None:
        k = np.asarray(k, dtype=float)
        return (build_G(cal.potential, k, 0.0, grid).matrix - base) / np.linalg.norm(k)
    if z is None or z >= 0:
        raise ValueError("need a nonzero k or a negative z")
    return (build_G(cal.potential, np.zeros(3), z, grid).matrix - base) / np.sqrt(-z)


def expansion_check_G(
    cal: ResonanceCalibration,
    grid: TorusGrid,
    steps,
    direction=(1.0, 0.0, 0.0),
    route: str = "k",
) -> ExpansionReport:
    """Distance of difference quotients of ``G`` to their rank-one limit.

    ``route="k"``: ``k = step * direction`` at ``z = 0``, limit
    ``-(1/(8 pi)) v^{1/2}(p) v^{1/2}(q)``.  ``route="z"``: ``z = -step**2`` at
    ``k = 0``, limit ``-(1/(4 pi)) v^{1/2}(p) v^{1/2}(q)``.  Distances are max
    norms of weighted matrices; a first-order remainder halves them when the
    step is halved.
    """
    steps = np.asarray(steps, dtype=float)
    if route == "k":
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        limit = _first_order_term(cal, grid, -1.0 / (8.0 * np.pi))
        quotients = [difference_quotient(cal, grid, k=h * d) for h in steps]
    elif route == "z":
        limit = _first_order_term(cal, grid, -1.0 / (4.0 * np.pi))
        quotients = [difference_quotient(cal, grid, z=-h * h) for h in steps]
    else:
        raise ValueError(f"route must be 'k' or 'z', got {route!r}")
    dist = np.array([np.max(np.abs(q - limit)) for q in quotients])
    return ExpansionReport(steps, dist, dist[1:] / dist[:-1], limit, route)


def resonance_witness_w(
    cal: ResonanceCalibration,
    grid: TorusGrid,
    k,
    pot: LatticePotential | None = None,
    rcond: float = 1e-13,
) -> float:
    """``|k| (w(k, 0) psi, psi)`` with ``w = (I - G(k, 0))^{-1}`` on the grid.

    ``pot`` defaults to the calibrated potential; pass another coupling to
    probe the regular (sub-resonant) case with the same ``psi``.
    """
    k = np.asarray(k, dtype=float)
    size = float(np.linalg.norm(k))
    if size == 0:
        raise ConditioningError("I - G(0, 0) is singular at the resonance; need k != 0")
    pot = cal.potential if pot is None else pot
    a = np.eye(grid.size) - build_G(pot, k, 0.0, grid).matrix
    eig = linalg.eigvalsh(a)
    if np.min(np.abs(eig)) < rcond * np.max(np.abs(eig)):
        raise ConditioningError(f"I - G(k, 0) numerically singular at |k|={size:g}")
    u = cal.vector if cal.grid.n_per_axis == grid.n_per_axis else _resample(cal, grid)
    return size * float(u @ linalg.solve(a, u, assume_a="sym"))


def _resample(cal: ResonanceCalibration, grid: TorusGrid) -> np.ndarray:
    return (_fourier_basis(cal.potential, grid) @ cal.coefficients).real
