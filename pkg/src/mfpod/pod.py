"""Reduced-basis construction and coefficient projection.

The basis is the set of dominant left singular vectors of the high-fidelity
snapshot matrix. Truncation follows either a fixed mode count or an energy
tolerance ``tol``: the retained count is the minimum N such that

    sum_{i<=N} sigma_i^2 / sum_i sigma_i^2  >=  1 - tol^2.

For tall-thin snapshot matrices (n_dof >> n_columns, the usual regime) the
decomposition goes through the eigendecomposition of the small Gram matrix
X^T X, forming only the retained left vectors; otherwise a direct thin SVD
is used. Both routes agree to LAPACK accuracy and are cross-checked in the
test suite.

Mean subtraction before the SVD is off by default; ``PodRule.center``
enables it, in which case the mean is stored on the basis and re-added on
reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .numerics import Grid2D, require_matrix, thin_svd
from .snapshots import SnapshotSet

# Column count beyond which the Gram-matrix route beats a direct thin SVD.
_GRAM_THRESHOLD = 1024


@dataclass(frozen=True)
class PodRule:
    """Truncation rule: exactly one of ``n_modes`` (fixed) or ``tol`` (energy)."""

    n_modes: int | None = None
    tol: float | None = None
    center: bool = False

    def __post_init__(self):
        if (self.n_modes is None) == (self.tol is None):
            raise ValidationError("specify exactly one of n_modes or tol")
        if self.n_modes is not None and self.n_modes < 1:
            raise ValidationError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.tol is not None and not (0.0 < self.tol < 1.0):
            raise ValidationError(f"tolerance must lie in (0, 1), got {self.tol}")


@dataclass
class PodBasis:
    """Orthonormal reduced basis with its full singular-value spectrum."""

    modes: np.ndarray
    sigma: np.ndarray
    n_pod: int
    eps_pod: float | None
    snapshot_mean: np.ndarray | None
    grid: Grid2D
    field_names: tuple[str, ...]

    @property
    def n_dof(self) -> int:
        return self.modes.shape[0]


@dataclass
class CoefficientSeries:
    """Reduced coefficients per column, parameter-major like SnapshotSet."""

    coeffs: np.ndarray
    times: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asfortranarray(self.coeffs, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        params = np.asarray(self.params, dtype=np.float64)
        if params.ndim == 1:
            params = params[:, None]
        self.params = params
        if self.coeffs.shape[1] != self.n_mu * self.n_t:
            raise ShapeError(
                f"coefficient matrix has {self.coeffs.shape[1]} columns, expected "
                f"{self.n_mu} * {self.n_t}"
            )

    @property
    def n_pod(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_t(self) -> int:
        return self.times.size

    @property
    def n_mu(self) -> int:
        return self.params.shape[0]

    def trajectory(self, mu_index: int) -> np.ndarray:
        return self.coeffs[:, mu_index * self.n_t : (mu_index + 1) * self.n_t]


def modes_by_energy(sigma: np.ndarray, tol: float) -> int:
    """Minimum mode count whose squared singular values capture 1 - tol^2."""
    energy = sigma**2
    total = energy.sum()
    if total == 0.0:
        return 1
    cumulative = np.cumsum(energy) / total
    return int(np.argmax(cumulative >= 1.0 - tol**2)) + 1


def _numerical_rank(sigma: np.ndarray, m: int, n: int) -> int:
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    cutoff = max(m, n) * np.finfo(np.float64).eps * sigma[0]
    return int(np.count_nonzero(sigma > cutoff))


def _orthonormalize(u: np.ndarray) -> np.ndarray:
    """QR polish of a nearly orthonormal block, keeping column directions."""
    q, r = np.linalg.qr(u)
    return q * np.sign(np.diag(r))


def build_basis(snaps: SnapshotSet, rule: PodRule) -> PodBasis:
    """Extract the reduced basis from a (high-fidelity) snapshot set."""
    x = snaps.data
    if x.shape[1] < 1 or x.shape[0] < 1:
        raise ValidationError("cannot build a basis from an empty snapshot set")
    mean = None
    if rule.center:
        mean = x.mean(axis=1)
        x = x - mean[:, None]

    m, n = x.shape
    use_gram = n <= m and n > _GRAM_THRESHOLD
    if use_gram:
        # Sigma first to settle the count, then only the retained left block.
        gram = x.T @ x
        gram = 0.5 * (gram + gram.T)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1]
        sigma = np.sqrt(np.clip(eigvals[order], 0.0, None))
        n_pod = _resolve_count(sigma, m, n, rule)
        right = eigvecs[:, order[:n_pod]]
        safe = np.maximum(sigma[:n_pod], np.finfo(np.float64).tiny)
        modes = (x @ right) / safe
        gram_err = np.abs(modes.T @ modes - np.eye(n_pod)).max()
        if gram_err > 1e-12:
            modes = _orthonormalize(modes)
    else:
        u, sigma, _ = thin_svd(x)
        n_pod = _resolve_count(sigma, m, n, rule)
        modes = u[:, :n_pod]

    return PodBasis(
        modes=np.asfortranarray(modes),
        sigma=sigma,
        n_pod=n_pod,
        eps_pod=rule.tol,
        snapshot_mean=mean,
        grid=snaps.grid,
        field_names=snaps.field_names,
    )


def _resolve_count(sigma: np.ndarray, m: int, n: int, rule: PodRule) -> int:
    if rule.tol is not None:
        return modes_by_energy(sigma, rule.tol)
    rank = max(_numerical_rank(sigma, m, n), 1)
    return min(rule.n_modes, rank, sigma.size)


def project(basis: PodBasis, snaps: SnapshotSet) -> CoefficientSeries:
    """Reduced coefficients of snapshots living on the basis grid."""
    if snaps.n_dof != basis.n_dof:
        raise ShapeError(
            f"snapshot rows ({snaps.n_dof}) do not match basis rows ({basis.n_dof})"
        )
    x = snaps.data
    if basis.snapshot_mean is not None:
        x = x - basis.snapshot_mean[:, None]
    return CoefficientSeries(
        coeffs=basis.modes.T @ x,
        times=snaps.times,
        params=snaps.params,
    )


def reconstruct(basis: PodBasis, series: CoefficientSeries,
                fidelity: str = "HF") -> SnapshotSet:
    """Full fields from reduced coefficients: modes @ coeffs (+ mean)."""
    coeffs = require_matrix(series.coeffs, "coefficients")
    if coeffs.shape[0] != basis.n_pod:
        raise ShapeError(
            f"coefficient rows ({coeffs.shape[0]}) do not match basis n_pod ({basis.n_pod})"
        )
    data = basis.modes @ coeffs
    if basis.snapshot_mean is not None:
        data = data + basis.snapshot_mean[:, None]
    return SnapshotSet(
        fidelity=fidelity,
        data=data,
        grid=basis.grid,
        times=series.times,
        params=series.params,
        field_names=basis.field_names,
    )
