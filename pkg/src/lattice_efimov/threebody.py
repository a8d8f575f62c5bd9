"""Three-boson fiber operators H(K), their essential spectrum, exact tiny-grid
Birman-Schwinger counting, and the reduced model operator T1.

States of the discretised fiber are indexed by ``(p, k)``: ``p`` is the total
momentum of the pair (2, 3) and ``k`` the momentum of particle 2, both grid
nodes.  The remaining momenta are ``k1 = K - p`` and ``k3 = p - k``, so every
pair interaction is a convolution in one grid variable after an index
substitution and the grid is never left.  The free energy at ``(p, k)`` is
``threebody_symbol(K, p, p/2 - k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, sparse

from .greens import ThresholdError
from .kernel import CountingCurve, KernelOperator, count_above, count_below
from .model import _map, legendre_table
from .potential import LatticePotential, aliased_symbol, convolution_matrix
from .torus import TorusGrid, dispersion, threebody_band
from .twobody import BirmanSchwingerMismatch, bound_state_energy

__all__ = [
    "EssentialSpectrumReport",
    "ModelOperatorT1",
    "ThreeBodyFiber",
    "apply_H",
    "build_T1",
    "count_N_model",
    "count_three_body_tiny",
    "delta_sweep",
    "first_crossing_rho",
    "tau",
]

TWO_BODY_BRANCH = "two-body-branch"
BAND_BOTTOM = "band-bottom"

TINY_GRID_MAX = 4


@dataclass(frozen=True)
class EssentialSpectrumReport:
    K: tuple
    tau: float
    branch: str
    band: tuple
    # minimiser p of z(p) + dispersion(K - p), None when no bound state exists
    argmin: tuple | None = None


@lru_cache(maxsize=4096)
def _bound_state_cached(pot: LatticePotential, p: tuple, xtol: float):
    return bound_state_energy(pot, np.array(p), xtol=xtol)


def tau(pot: LatticePotential, K, eval_grid: TorusGrid, xtol: float = 1e-12) -> EssentialSpectrumReport:
    """Bottom of the essential spectrum of ``H(K)`` over ``eval_grid``.

    ``min(min_p [z(p) + dispersion(K - p)], E_min(K))``, where ``p`` ranges over
    the grid nodes at which ``h(p)`` has an eigenvalue ``z(p)`` below its band.
    A tie goes to the two-body branch.
    """
    K = np.asarray(K, dtype=float)
    band = threebody_band(K)
    best, argmin = np.inf, None
    for p in eval_grid.nodes:
        # z(p) is even in each component of p
        z = _bound_state_cached(pot, tuple(np.round(np.abs(p), 12)), xtol)
        if z is None:
            continue
        value = z + float(dispersion(K - p))
        if value < best:
            best, argmin = value, tuple(float(x) for x in p)
    if best <= band[0]:
        return EssentialSpectrumReport(tuple(K.tolist()), float(best), TWO_BODY_BRANCH, band, argmin)
    return EssentialSpectrumReport(tuple(K.tolist()), float(band[0]), BAND_BOTTOM, band, argmin)


class ThreeBodyFiber:
    """Discretised ``H(K) = H0(K) - V1 - V2 - V3`` on the ``(p, k)`` grid.

    ``V1`` couples particles 2 and 3, ``V2`` particles 1 and 3, ``V3``
    particles 1 and 2.  Vectors have shape ``(N, N)`` or ``(N, N, B)`` with
    ``N = n**3``; the first axis is ``p``, the second ``k``.
    """

    def __init__(self, pot: LatticePotential, K, grid: TorusGrid):
        pot.check_grid(grid)
        self.pot = pot
        self.grid = grid
        self.K = np.asarray(K, dtype=float)
        self.mK = grid.locate(self.K)
        n = grid.n_per_axis
        N = grid.size
        self.n, self.N = n, N
        idx = grid.indices
        self.idx = idx
        # sub[a, b]: node index of p_a - k_b
        self.sub = grid.flat_index(idx[:, None, :] - idx[None, :, :])
        self.k1 = grid.flat_index(self.mK - idx)
        eps = dispersion(grid.nodes)
        self.energies = eps[self.k1][:, None] + eps[None, :] + eps[self.sub]
        self._symbol = aliased_symbol(pot, n)

    @property
    def dim(self) -> int:
        return self.N * self.N

    def _convolve(self, f: np.ndarray, axes: tuple) -> np.ndarray:
        n = self.n
        shape = f.shape
        g = f.reshape((n,) * 6 + shape[2:])
        sym = self._symbol.reshape(
            tuple(n if i in axes else 1 for i in range(6)) + (1,) * (len(shape) - 2)
        )
        out = np.fft.ifftn(sym * np.fft.fftn(g, axes=axes), axes=axes)
        return out.real.reshape(shape)

    def _swap_k_k3(self, f: np.ndarray) -> np.ndarray:
        """Re-index ``f(p, k)`` as a function of ``(p, k3 = p - k)``; an involution."""
        rows = np.arange(self.N)[:, None]
        return f[rows, self.sub]

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        flat = f.ndim in (1, 2) and f.shape[0] == self.dim
        if flat:
            f = f.reshape((self.N, self.N) + f.shape[1:])
        energies = self.energies.reshape(self.energies.shape + (1,) * (f.ndim - 2))
        out = energies * f
        out -= self._convolve(f, (3, 4, 5))
        out -= self._convolve(f, (0, 1, 2))
        out -= self._swap_k_k3(self._convolve(self._swap_k_k3(f), (0, 1, 2)))
        if flat:
            out = out.reshape((self.dim,) + out.shape[2:])
        return out

    def dense(self) -> np.ndarray:
        """Dense matrix assembled entry by entry from the convolution matrix."""
        N = self.N
        vm = convolution_matrix(self.pot, self.grid)
        eye = np.eye(N)
        H = np.diag(self.energies.ravel()) - np.kron(eye, vm) - np.kron(vm, eye)
        rows = np.arange(N * N)
        a = rows // N
        k3 = self.sub.ravel()
        for ap in range(N):
            cols = ap * N + self.sub[ap, k3]
            H[rows, cols] -= vm[a, ap]
        return H

    def cyclic_permutation(self) -> np.ndarray:
        """State map of ``(k1, k2, k3) -> (k2, k3, k1)``."""
        N = self.N
        a = np.repeat(np.arange(N), N)
        b = np.tile(np.arange(N), N)
        a_new = self.grid.flat_index(self.mK - self.idx[b])
        b_new = self.sub.ravel()
        return a_new * N + b_new

    def triples(self) -> np.ndarray:
        N = self.N
        k1 = np.repeat(self.k1, N)
        k2 = np.tile(np.arange(N), N)
        return np.stack([k1, k2, self.sub.ravel()], axis=1)

    def symmetric_basis(self) -> sparse.csr_matrix:
        """Orthonormal basis of functions symmetric under all momentum permutations."""
        keys = np.sort(self.triples(), axis=1)
        return _orbit_basis(keys)

    def even_basis(self) -> tuple[sparse.csr_matrix, np.ndarray]:
        """Basis of functions even under ``k <-> p - k`` and the ``p`` index of each column."""
        N = self.N
        a = np.repeat(np.arange(N), N)
        b = np.tile(np.arange(N), N)
        c = self.sub.ravel()
        keys = np.stack([a, np.minimum(b, c), np.maximum(b, c)], axis=1)
        Q = _orbit_basis(keys)
        uniq = np.unique(keys, axis=0)
        return Q, uniq[:, 0]

    def channel_blocks(self, z: float):
        """Per-``p`` blocks of ``V1^{1/2} R0 V1^{1/2}`` on the even subspace.

        Yields ``(columns, block)`` pairs; ``columns`` index the even basis.
        """
        Y, R0, owner = self._even_sandwich(z)
        for a in np.unique(owner):
            cols = np.flatnonzero(owner == a)
            block = Y[:, cols].T @ (R0[:, None] * Y[:, cols])
            yield cols, 0.5 * (block + block.T)

    def _even_sandwich(self, z: float):
        min_energy = float(self.energies.min())
        if not z < min_energy:
            raise ThresholdError(f"z={z!r} is not below the free three-body minimum {min_energy!r}")
        Q, owner = self.even_basis()
        B = convolution_matrix(self.pot, self.grid, half=True)
        N = self.N
        Qd = Q.toarray().reshape(N, N, -1)
        Y = np.einsum("ij,ajd->aid", B, Qd).reshape(N * N, -1)
        R0 = 1.0 / (self.energies.ravel() - z)
        return Y, R0, owner

    def channel_threshold(self) -> float:
        """Lowest eigenvalue of ``H0 - V1`` on the even subspace (over all ``p``)."""
        Q, owner = self.even_basis()
        N = self.N
        vm = convolution_matrix(self.pot, self.grid)
        best = np.inf
        Qd = Q.toarray()
        for a in np.unique(owner):
            cols = np.flatnonzero(owner == a)
            q = Qd[a * N : (a + 1) * N, cols]
            h = np.diag(self.energies[a]) - vm
            block = q.T @ h @ q
            best = min(best, float(linalg.eigvalsh(0.5 * (block + block.T))[0]))
        return best


def _orbit_basis(keys: np.ndarray) -> sparse.csr_matrix:
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    values = 1.0 / np.sqrt(counts[inverse])
    rows = np.arange(len(keys))
    return sparse.csr_matrix((values, (rows, inverse)), shape=(len(keys), len(counts)))


def apply_H(pot: LatticePotential, K, grid: TorusGrid, vector) -> np.ndarray:
    """Matrix-free ``H(K)`` on a vector indexed by the ``(p, k)`` double grid."""
    return ThreeBodyFiber(pot, K, grid).apply(vector)


def count_three_body_tiny(pot: LatticePotential, K, z: float, grid: TorusGrid) -> tuple[int, int]:
    """Eigenvalues of the bosonic ``H(K)`` below ``z``, counted two ways.

    ``N_direct`` diagonalises the dense fiber matrix restricted to symmetric
    functions.  ``N_bs`` is ``n(1, W^{1/2} E W^{1/2})`` on functions even in
    the pair (2, 3), where ``E = V1^{1/2} R0 (P + P^2) V1^{1/2}`` with ``P`` the
    cyclic relabelling of particles and ``W = (I - V1^{1/2} R0 V1^{1/2})^{-1}``
    is assembled block by block in the pair momentum.

    Raises
    ------
    ThresholdError
        If ``z`` is not below the discrete channel threshold.
    BirmanSchwingerMismatch
        If the two counts differ.
    """
    if grid.n_per_axis > TINY_GRID_MAX:
        raise ValueError(f"dense three-body counting is limited to n <= {TINY_GRID_MAX}")
    fiber = ThreeBodyFiber(pot, K, grid)

    Qs = fiber.symmetric_basis()
    H = fiber.dense()
    Hs = (Qs.T @ (Qs.T @ H).T).T
    n_direct = count_below(0.5 * (Hs + Hs.T), z)

    Y, R0, owner = fiber._even_sandwich(z)
    d = Y.shape[1]
    w_half = np.zeros((d, d))
    for a in np.unique(owner):
        cols = np.flatnonzero(owner == a)
        block = Y[:, cols].T @ (R0[:, None] * Y[:, cols])
        lam, vec = linalg.eigh(0.5 * (block + block.T))
        if np.any(lam >= 1.0):
            raise ThresholdError(
                f"z={z!r} is not below the channel threshold: "
                f"pair block at p index {a} has eigenvalue {lam.max():.6g} >= 1"
            )
        w_half[np.ix_(cols, cols)] = (vec / np.sqrt(1.0 - lam)) @ vec.T
    perm = fiber.cyclic_permutation()
    Z = R0[:, None] * (Y[perm] + Y[perm[perm]])
    E = Y.T @ Z
    T = w_half @ (0.5 * (E + E.T)) @ w_half
    n_bs = count_above(0.5 * (T + T.T), 1.0)
    if n_direct != n_bs:
        raise BirmanSchwingerMismatch(f"N_direct={n_direct} but N_bs={n_bs} at K={K}, z={z}")
    return n_direct, n_bs


# -- reduced model operator T1 ------------------------------------------------

INNER_FACTOR = 0.3
DEFAULT_NODES_PER_DECADE = 30
DEFAULT_T1_ANGULAR_N = 24


@dataclass
class ModelOperatorT1:
    """Legendre channels of ``T1(delta, rho)`` on a geometric radial grid."""

    rho: float
    delta: float
    radial_grid: np.ndarray
    channels: list = field(default_factory=list)

    @property
    def l_max(self) -> int:
        return len(self.channels) - 1

    def channel_counts(self, level: float = 1.0) -> list[int]:
        return [op.count(level) for op in self.channels]

    def count(self, level: float = 1.0) -> int:
        """``sum_l (2l + 1) n(level, channel_l)``."""
        return sum((2 * l + 1) * c for l, c in enumerate(self.channel_counts(level)))

    def spectral_radii(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(op.eigenvalues()))) for op in self.channels])


def build_T1(
    rho: float,
    delta: float = 1.0,
    l_max: int = 6,
    radial_n: int = DEFAULT_NODES_PER_DECADE,
    angular_n: int = DEFAULT_T1_ANGULAR_N,
) -> ModelOperatorT1:
    """Channel matrices of ``T1`` for ``|p|, |q| < delta``.

    The kernel is ``(1/pi^2) [(3p^2/4 + rho)(3q^2/4 + rho)]^{-1/4} / (p^2 + p.q + q^2 + rho)``.
    Radial nodes are midpoints of a uniform grid in ``log p`` on
    ``[min(0.3 sqrt(rho), delta/10), delta]`` with ``radial_n`` nodes per decade; the measure
    ``p^2 dp = p^3 d(log p)`` is split symmetrically between the two sides.
    """
    if rho <= 0 or delta <= 0:
        raise ValueError("rho and delta must be positive")
    if radial_n < 1 or angular_n < 1 or l_max < 0:
        raise ValueError("radial_n, angular_n must be positive and l_max nonnegative")
    hi = np.log(delta)
    # keep at least one decade when rho is large against delta**2
    lo = min(np.log(INNER_FACTOR * np.sqrt(rho)), hi - np.log(10.0))
    n = max(2, int(np.ceil((hi - lo) / np.log(10.0) * radial_n)))
    h = (hi - lo) / n
    p = np.exp(lo + (np.arange(n) + 0.5) * h)

    t, w = leggauss(angular_n)
    legendre_rows = legendre_table(l_max, t) * w
    base = p[:, None] ** 2 + p[None, :] ** 2 + rho
    cross = p[:, None] * p[None, :]
    kernels = np.zeros((l_max + 1, n, n))
    for j in range(angular_n):
        inv = 1.0 / (base + t[j] * cross)
        kernels += legendre_rows[:, j, None, None] * inv
    scale = np.sqrt(h * p**3) * (0.75 * p**2 + rho) ** -0.25
    kernels *= (2.0 * np.pi / np.pi**2) * scale[None, :, None] * scale[None, None, :]
    channels = [
        KernelOperator(p, 0.5 * (kernels[l] + kernels[l].T), f"T1_{l}(rho={rho:g})")
        for l in range(l_max + 1)
    ]
    return ModelOperatorT1(float(rho), float(delta), p, channels)


def _count_with_extension(rho, delta, l_max, radial_n, angular_n, l_cap=40):
    while True:
        op = build_T1(rho, delta, l_max, radial_n, angular_n)
        per_l = op.channel_counts()
        if per_l[-1] == 0 or l_max >= l_cap:
            return sum((2 * l + 1) * c for l, c in enumerate(per_l)), per_l
        l_max = min(2 * l_max, l_cap)


def count_N_model(
    rho_sequence,
    delta: float = 1.0,
    l_max: int = 6,
    radial_n: int = DEFAULT_NODES_PER_DECADE,
    angular_n: int = DEFAULT_T1_ANGULAR_N,
    threads: int = 1,
    min_decades: float = 10.0,
) -> CountingCurve:
    """Counts ``n(1, T1(delta, rho))`` against ``|log rho|`` with a least-squares slope.

    ``rho_sequence`` must be strictly decreasing and span ``min_decades``.  If
    channel ``l_max`` ever counts an eigenvalue, more channels are added.
    """
    rho = np.asarray(rho_sequence, dtype=float)
    if rho.size < 2 or np.any(rho <= 0) or np.any(np.diff(rho) >= 0):
        raise ValueError("rho_sequence must be positive and strictly decreasing")
    if np.log10(rho[0] / rho[-1]) < min_decades:
        raise ValueError(f"rho_sequence must span at least {min_decades:g} decades")
    results = _map(lambda r: _count_with_extension(r, delta, l_max, radial_n, angular_n), rho, threads)
    width = max(len(per_l) for _, per_l in results)
    table = np.zeros((len(results), width), dtype=int)
    for i, (_, per_l) in enumerate(results):
        table[i, : len(per_l)] = per_l
    curve = CountingCurve.fit(np.abs(np.log(rho)), [c for c, _ in results], label=f"n(1,T1) delta={delta:g}")
    curve.channel_counts = table
    return curve


def delta_sweep(rho_sequence, deltas=(0.5, 1.0, 2.0), **kwargs) -> dict:
    """``count_N_model`` for several cutoffs; the slopes should agree."""
    return {float(d): count_N_model(rho_sequence, delta=d, **kwargs) for d in deltas}


def first_crossing_rho(
    delta: float = 1.0,
    radial_n: int = DEFAULT_NODES_PER_DECADE,
    angular_n: int = DEFAULT_T1_ANGULAR_N,
    bracket: tuple = (1e-12, 1.0),
    rtol: float = 1e-3,
) -> float:
    """Largest ``rho`` at which the top s-wave eigenvalue of ``T1`` reaches 1 (bisection in ``log rho``)."""

    def top(r):
        return build_T1(r, delta, 0, radial_n, angular_n).channels[0].top_eigenvalue()

    lo, hi = np.log(bracket[0]), np.log(bracket[1])
    if not (top(np.exp(lo)) > 1.0 > top(np.exp(hi))):
        raise ValueError("bracket does not enclose the first crossing")
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if top(np.exp(mid)) > 1.0:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))
