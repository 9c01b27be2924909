"""Lifting of low-fidelity snapshot sets to high-fidelity resolution.

Lifting interpolates each snapshot spatially onto the finer grid (per field
component, nearest-neighbor or bilinear with periodic wrap) and then
linearly interpolates each trajectory in time onto the target time grid.
Both stages are linear maps, so the composite acts like P @ X @ Q^T; the
order (space first, then time) therefore does not affect the result and is
chosen to keep peak memory low.

``lift_project`` fuses lifting with projection onto a reduced basis by
pre-contracting the basis with the spatial interpolation stencil, so the
lifted fields are never materialized. It is exactly the linear-algebra
rearrangement basis^T (P X Q^T) = ((P^T basis)^T X) Q^T and is used on the
hot online path; plain ``lift`` is the reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .numerics import Grid2D, bilinear_weight_map, interp_time, nearest_index_map
from .pod import CoefficientSeries, PodBasis
from .snapshots import SnapshotSet

_MODES = ("nearest", "bilinear")


@dataclass(frozen=True)
class LiftSpec:
    """How to carry a snapshot set to target spatial and temporal resolution."""

    spatial_mode: str
    src_grid: Grid2D
    dst_grid: Grid2D
    dst_times: np.ndarray

    def __post_init__(self):
        if self.spatial_mode not in _MODES:
            raise ValidationError(
                f"spatial_mode must be one of {_MODES}, got {self.spatial_mode!r}"
            )
        object.__setattr__(
            self, "dst_times", np.asarray(self.dst_times, dtype=np.float64)
        )
        if self.dst_times.ndim != 1 or self.dst_times.size < 1:
            raise ValidationError("dst_times must be a nonempty 1-D vector")


def _flat_gather(spec: LiftSpec) -> tuple[np.ndarray, ...]:
    """Flat source indices (and weights for bilinear) for one field component.

    Destination flat index r = ix + n_dst*iy maps to source flat indices
    following the same column-major convention.
    """
    ns = spec.src_grid.n
    if spec.spatial_mode == "nearest":
        idx = nearest_index_map(spec.src_grid, spec.dst_grid)
        gather = idx[:, None] + ns * idx[None, :]
        return (gather.ravel(order="F"),)
    i0, i1, f = bilinear_weight_map(spec.src_grid, spec.dst_grid)
    g00 = (i0[:, None] + ns * i0[None, :]).ravel(order="F")
    g10 = (i1[:, None] + ns * i0[None, :]).ravel(order="F")
    g01 = (i0[:, None] + ns * i1[None, :]).ravel(order="F")
    g11 = (i1[:, None] + ns * i1[None, :]).ravel(order="F")
    fx = np.broadcast_to(f[:, None], (f.size, f.size)).ravel(order="F")
    fy = np.broadcast_to(f[None, :], (f.size, f.size)).ravel(order="F")
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    return g00, g10, g01, g11, w00, w10, w01, w11


def _validate_input(snaps: SnapshotSet, spec: LiftSpec) -> int:
    if snaps.grid != spec.src_grid:
        raise ValidationError(
            f"snapshot grid (n={snaps.grid.n}, L={snaps.grid.L}) does not match "
            f"lift source grid (n={spec.src_grid.n}, L={spec.src_grid.L})"
        )
    n_fields = len(snaps.field_names)
    if snaps.n_dof != n_fields * snaps.grid.n**2:
        raise ShapeError(
            f"snapshot rows ({snaps.n_dof}) are not field_count * n^2 "
            f"({n_fields} * {snaps.grid.n}^2); cannot lift spatially"
        )
    return n_fields


def _lift_block_spatial(block: np.ndarray, n_fields: int, ns2: int,
                        nd2: int, gather: tuple[np.ndarray, ...]) -> np.ndarray:
    """Spatially lift one trajectory block (n_fields*ns2, n_t)."""
    out = np.empty((n_fields * nd2, block.shape[1]), dtype=np.float64, order="F")
    for f in range(n_fields):
        sub = block[f * ns2 : (f + 1) * ns2, :]
        if len(gather) == 1:
            out[f * nd2 : (f + 1) * nd2, :] = sub[gather[0], :]
        else:
            g00, g10, g01, g11, w00, w10, w01, w11 = gather
            out[f * nd2 : (f + 1) * nd2, :] = (
                w00[:, None] * sub[g00, :]
                + w10[:, None] * sub[g10, :]
                + w01[:, None] * sub[g01, :]
                + w11[:, None] * sub[g11, :]
            )
    return out


def lift(snaps: SnapshotSet, spec: LiftSpec) -> SnapshotSet:
    """Lift a snapshot set onto the target grid and times."""
    n_fields = _validate_input(snaps, spec)
    ns2 = spec.src_grid.n**2
    nd2 = spec.dst_grid.n**2
    gather = _flat_gather(spec)
    same_times = np.array_equal(snaps.times, spec.dst_times)

    out = np.empty(
        (n_fields * nd2, snaps.n_mu * spec.dst_times.size), dtype=np.float64, order="F"
    )
    n_t_dst = spec.dst_times.size
    for i in range(snaps.n_mu):
        lifted = _lift_block_spatial(snaps.trajectory(i), n_fields, ns2, nd2, gather)
        if not same_times:
            lifted = interp_time(lifted, snaps.times, spec.dst_times)
        out[:, i * n_t_dst : (i + 1) * n_t_dst] = lifted
    return SnapshotSet(
        fidelity=snaps.fidelity,
        data=out,
        grid=spec.dst_grid,
        times=spec.dst_times.copy(),
        params=snaps.params,
        field_names=snaps.field_names,
    )


def reduced_stencil(basis: PodBasis, spec: LiftSpec) -> np.ndarray:
    """Pre-contracted matrix R = P^T basis with P the spatial lift stencil.

    R has shape (n_dof_src, n_pod); projecting a lifted snapshot equals
    R.T @ snapshot for every linear spatial mode.
    """
    n_fields = len(basis.field_names)
    ns2 = spec.src_grid.n**2
    nd2 = spec.dst_grid.n**2
    if basis.n_dof != n_fields * nd2:
        raise ShapeError(
            f"basis rows ({basis.n_dof}) are not field_count * n_dst^2 "
            f"({n_fields} * {spec.dst_grid.n}^2)"
        )
    gather = _flat_gather(spec)
    reduced = np.zeros((n_fields * ns2, basis.n_pod), dtype=np.float64)
    for f in range(n_fields):
        modes_f = basis.modes[f * nd2 : (f + 1) * nd2, :]
        target = reduced[f * ns2 : (f + 1) * ns2, :]
        if len(gather) == 1:
            np.add.at(target, gather[0], modes_f)
        else:
            g00, g10, g01, g11, w00, w10, w01, w11 = gather
            np.add.at(target, g00, w00[:, None] * modes_f)
            np.add.at(target, g10, w10[:, None] * modes_f)
            np.add.at(target, g01, w01[:, None] * modes_f)
            np.add.at(target, g11, w11[:, None] * modes_f)
    return reduced


def lift_project(
    snaps: SnapshotSet,
    spec: LiftSpec,
    basis: PodBasis,
    stencil: np.ndarray | None = None,
) -> CoefficientSeries:
    """Project the lifted set onto ``basis`` without materializing the lift.

    Equivalent to ``pod.project(basis, lift(snaps, spec))`` up to floating
    point summation order. ``stencil`` may carry a precomputed
    ``reduced_stencil`` to amortize repeated calls.
    """
    _validate_input(snaps, spec)
    if stencil is None:
        stencil = reduced_stencil(basis, spec)
    coef_src = stencil.T @ snaps.data
    if basis.snapshot_mean is not None:
        # basis^T (x - mean) = basis^T x - basis^T mean, with x already lifted:
        # the mean lives on the destination grid, so contract it directly.
        coef_src = coef_src - (basis.modes.T @ basis.snapshot_mean)[:, None]
    n_t_dst = spec.dst_times.size
    if np.array_equal(snaps.times, spec.dst_times):
        out = coef_src
    else:
        out = np.empty((basis.n_pod, snaps.n_mu * n_t_dst), dtype=np.float64, order="F")
        for i in range(snaps.n_mu):
            block = coef_src[:, i * snaps.n_t : (i + 1) * snaps.n_t]
            out[:, i * n_t_dst : (i + 1) * n_t_dst] = interp_time(
                block, snaps.times, spec.dst_times
            )
    return CoefficientSeries(coeffs=out, times=spec.dst_times.copy(), params=snaps.params)
