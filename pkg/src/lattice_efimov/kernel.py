"""Dense symmetric discretisations of integral operators and eigenvalue counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg
from scipy.stats import linregress


def count_above(matrix: np.ndarray, level: float) -> int:
    """Number of eigenvalues of a symmetric matrix strictly above ``level``."""
    if matrix.size == 0:
        return 0
    return int(linalg.eigvalsh(matrix, subset_by_value=(level, np.inf), check_finite=False).size)


def count_below(matrix: np.ndarray, level: float) -> int:
    """Number of eigenvalues of a symmetric matrix strictly below ``level``."""
    if matrix.size == 0:
        return 0
    # subset_by_value selects the half-open interval (a, b]
    vals = linalg.eigvalsh(matrix, subset_by_value=(-np.inf, level), check_finite=False)
    return int(np.count_nonzero(vals < level))


@dataclass
class KernelOperator:
    """Nystrom matrix ``M[i, j] = sqrt(w_i) K(x_i, x_j) sqrt(w_j)`` of a symmetric kernel.

    ``grid`` is whatever carries the nodes: a :class:`~lattice_efimov.torus.TorusGrid`
    or a 1D array of radial / log nodes.
    """

    grid: Any
    matrix: np.ndarray
    label: str = ""
    _eigvals: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {m.shape}")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T))) if self.dim else 0.0

    def is_symmetric(self, rtol: float = 1e-13) -> bool:
        scale = max(float(np.max(np.abs(self.matrix))), 1.0) if self.dim else 1.0
        return self.asymmetry() <= rtol * scale

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues (cached)."""
        if self._eigvals is None:
            self._eigvals = linalg.eigvalsh(self.matrix, check_finite=False)
        return self._eigvals

    def top_eigenvalue(self) -> float:
        if self._eigvals is not None:
            return float(self._eigvals[-1])
        n = self.dim
        return float(linalg.eigvalsh(self.matrix, subset_by_index=(n - 1, n - 1))[0])

    def gershgorin_bound(self) -> float:
        """Upper bound ``max_i sum_j |M_ij|`` on every eigenvalue."""
        return float(np.max(np.sum(np.abs(self.matrix), axis=1))) if self.dim else 0.0

    def count(self, level: float = 1.0) -> int:
        """``n(level, A)``: eigenvalues strictly above ``level``."""
        if self._eigvals is not None:
            return int(np.count_nonzero(self._eigvals > level))
        if self.gershgorin_bound() <= level:
            return 0
        return count_above(self.matrix, level)


@dataclass
class CountingCurve:
    """Eigenvalue counts against a scale parameter with a least-squares slope."""

    abscissa: np.ndarray
    counts: np.ndarray
    slope: float
    stderr: float
    intercept: float
    label: str = ""
    # optional per-channel counts, one row per abscissa
    channel_counts: np.ndarray | None = None

    @classmethod
    def fit(cls, abscissa, counts, label: str = "") -> "CountingCurve":
        x = np.asarray(abscissa, dtype=float)
        y = np.asarray(counts, dtype=int)
        if x.size != y.size or x.size < 2:
            raise ValueError("need at least two (abscissa, count) pairs of equal length")
        if np.any(y < 0):
            raise ValueError("counts must be nonnegative")
        if np.ptp(x) == 0:
            raise ValueError("abscissa must not be constant")
        fit = linregress(x, y)
        stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
        return cls(x, y, float(fit.slope), stderr, float(fit.intercept), label)

    def is_nondecreasing(self) -> bool:
        order = np.argsort(self.abscissa, kind="stable")
        return bool(np.all(np.diff(self.counts[order]) >= 0))
