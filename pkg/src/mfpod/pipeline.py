"""Offline training orchestration, online inference, metrics, persistence.

Offline, the four stages run in order: the reduced basis is extracted from
the high-fidelity snapshots alone; the low-fidelity set is lifted to
high-fidelity resolution; both sets are projected onto the basis; and the
recurrent map is trained on the aligned coefficient pairs. Online, a new
parameter value costs one low-fidelity solve: its trajectory is lifted,
projected, mapped through the network, and expanded back to full fields.
The high-fidelity solver is never invoked online.

Relative errors follow the column-wise definition

    err% = 100/N_test * sum_i ||x_ref(t_i, mu_i) - x(t_i, mu_i)|| / ||x_ref(t_i, mu_i)||

averaged over every (time, parameter) pair in the test set, evaluated for
both the surrogate prediction and the lifted low-fidelity input. Wall-clock
times are medians over repeated runs of the per-trajectory mean, with the
online path timed end to end (low-fidelity solve through reconstruction).
"""

from __future__ import annotations

import struct
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import solvers
from .errors import (
    AlignmentError,
    CoverageError,
    FormatError,
    StorageError,
    ValidationError,
)
from .lifting import LiftSpec, lift, lift_project
from .mflstm import LstmModel, lstm_from_bytes, lstm_to_bytes, predict, train
from .numerics import Grid2D
from .pod import CoefficientSeries, PodBasis, PodRule, build_basis, project, reconstruct
from .snapshots import SnapshotSet
from .solvers import FidelityProfile

SURROGATE_MAGIC = b"MFSURR01"
_BASIS_MAGIC = b"MFBASIS1"
_LIFT_MAGIC = b"MFLIFT01"
_PROV_MAGIC = b"MFPROV01"


@dataclass(frozen=True)
class Provenance:
    """What produced the training data; needed to drive the online stage."""

    problem: str | None = None
    hf_profile: FidelityProfile | None = None
    lf_profile: FidelityProfile | None = None
    t_train: float | None = None
    param_lo: float | None = None
    param_hi: float | None = None


@dataclass
class SurrogateModel:
    """Deployable bundle: reduced basis, lift recipe, trained network."""

    basis: PodBasis
    lift_spec: LiftSpec
    lstm: LstmModel
    provenance: Provenance

    def __post_init__(self):
        if self.lstm.layout.n_coef != self.basis.n_pod:
            raise ValidationError(
                f"network expects {self.lstm.layout.n_coef} coefficients but the "
                f"basis retains {self.basis.n_pod} modes"
            )
        if self.lift_spec.dst_grid != self.basis.grid:
            raise ValidationError("lift destination grid does not match the basis grid")


@dataclass
class OnlinePrediction:
    """Full online-stage output for one parameter value."""

    prediction: SnapshotSet
    lf_snapshots: SnapshotSet
    lf_coefficients: CoefficientSeries
    mf_coefficients: CoefficientSeries


@dataclass
class EvalReport:
    """Eq.-style relative errors plus wall-clock comparison."""

    err_mf_percent: float
    err_lf_percent: float
    time_lf: float
    time_mf: float
    time_hf: float
    mus: np.ndarray
    ts: np.ndarray
    col_err_mf_percent: np.ndarray
    col_err_lf_percent: np.ndarray

    def per_parameter(self) -> list[tuple[float, float, float]]:
        """(mu, mean err_mf%, mean err_lf%) per tested parameter."""
        out = []
        for mu in np.unique(self.mus):
            mask = self.mus == mu
            out.append(
                (
                    float(mu),
                    float(self.col_err_mf_percent[mask].mean()),
                    float(self.col_err_lf_percent[mask].mean()),
                )
            )
        return out

    def to_csv(self, path: str | Path) -> None:
        lines = ["mu,t,err_mf_percent,err_lf_percent"]
        for mu, t, emf, elf in zip(
            self.mus, self.ts, self.col_err_mf_percent, self.col_err_lf_percent
        ):
            lines.append(f"{float(mu)!r},{float(t)!r},{float(emf)!r},{float(elf)!r}")
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot write report to {path}: {exc}") from exc

    def summary(self) -> str:
        lines = [
            "surrogate evaluation summary",
            f"  test columns: {self.mus.size}",
            f"  relative error  lifted LF input: {self.err_lf_percent:.2f}%"
            f"   surrogate: {self.err_mf_percent:.2f}%",
        ]
        if np.isfinite(self.time_hf) and self.time_hf > 0:
            lines.append(
                f"  wall time per trajectory  LF {self.time_lf:.3f}s"
                f" ({100 * self.time_lf / self.time_hf:.2f}% of HF)"
                f"   surrogate {self.time_mf:.3f}s"
                f" ({100 * self.time_mf / self.time_hf:.2f}% of HF)"
                f"   HF {self.time_hf:.3f}s (100%)"
            )
        lines.append("  per-parameter mean errors:")
        for mu, emf, elf in self.per_parameter():
            lines.append(f"    mu = {mu:g}: surrogate {emf:.2f}%   lifted LF {elf:.2f}%")
        return "\n".join(lines)


def offline_train(
    hf: SnapshotSet,
    lf: SnapshotSet,
    pod_rule: PodRule,
    train_cfg,
    spatial_mode: str = "bilinear",
    problem: str | None = None,
    hf_profile: FidelityProfile | None = None,
    lf_profile: FidelityProfile | None = None,
    val_every: int = 1,
) -> SurrogateModel:
    """Run the four offline stages and assemble the deployable surrogate."""
    if hf.data.size == 0 or hf.n_mu < 1:
        raise ValidationError("high-fidelity snapshot set is empty")
    if hf.params.shape != lf.params.shape or not np.allclose(
        hf.params, lf.params, rtol=0, atol=0
    ):
        raise AlignmentError(
            "high- and low-fidelity sets must be sampled at the same parameters"
        )
    basis = build_basis(hf, pod_rule)
    spec = LiftSpec(
        spatial_mode=spatial_mode,
        src_grid=lf.grid,
        dst_grid=hf.grid,
        dst_times=hf.times,
    )
    coef_hf = project(basis, hf)
    coef_lf = lift_project(lf, spec, basis)
    lstm = train(coef_lf, coef_hf, train_cfg, val_every=val_every)
    provenance = Provenance(
        problem=problem,
        hf_profile=hf_profile,
        lf_profile=lf_profile,
        t_train=float(hf.times[-1]),
        param_lo=float(hf.params[:, 0].min()),
        param_hi=float(hf.params[:, 0].max()),
    )
    return SurrogateModel(basis=basis, lift_spec=spec, lstm=lstm, provenance=provenance)


def _hf_step(model: SurrogateModel) -> float:
    prov = model.provenance
    if prov.hf_profile is not None:
        return prov.hf_profile.dt
    times = model.lift_spec.dst_times
    if times.size < 2:
        raise ValidationError("cannot infer the high-fidelity time step from the model")
    return float(times[1] - times[0])


def prediction_times(model: SurrogateModel, T: float) -> np.ndarray:
    """High-fidelity-cadence time grid over [0, T] used for predictions."""
    if T < 0:
        raise ValidationError(f"final time must be nonnegative, got T={T}")
    dt = _hf_step(model)
    return dt * np.arange(int(round(T / dt)) + 1)


def _run_lf(model: SurrogateModel, mu: float, t_end: float) -> SnapshotSet:
    prov = model.provenance
    if prov.problem is None or prov.lf_profile is None:
        raise ValidationError(
            "model provenance lacks a low-fidelity solver configuration; "
            "online prediction from raw parameters is unavailable"
        )
    profile = prov.lf_profile
    steps = int(np.ceil(t_end / profile.dt - 1e-12)) if t_end > 0 else 0
    return solvers.generate_dataset(
        prov.problem, profile, np.array([mu]), steps * profile.dt
    )


def online_predict_detailed(
    model: SurrogateModel, mu: float, T: float
) -> OnlinePrediction:
    """Full online stage for one parameter: solve LF, lift, map, reconstruct."""
    prov = model.provenance
    if (
        prov.param_lo is not None
        and prov.param_hi is not None
        and not (prov.param_lo <= mu <= prov.param_hi)
    ):
        warnings.warn(
            f"mu = {mu:g} lies outside the training range "
            f"[{prov.param_lo:g}, {prov.param_hi:g}]; extrapolating",
            stacklevel=2,
        )
    times = prediction_times(model, T)
    lf_set = _run_lf(model, mu, float(times[-1]))
    spec = LiftSpec(
        spatial_mode=model.lift_spec.spatial_mode,
        src_grid=model.lift_spec.src_grid,
        dst_grid=model.lift_spec.dst_grid,
        dst_times=times,
    )
    coef_lf = lift_project(lf_set, spec, model.basis)
    coef_mf = predict(model.lstm, coef_lf)
    prediction = reconstruct(model.basis, coef_mf)
    return OnlinePrediction(
        prediction=prediction,
        lf_snapshots=lf_set,
        lf_coefficients=coef_lf,
        mf_coefficients=coef_mf,
    )


def online_predict(model: SurrogateModel, mu: float, T: float) -> SnapshotSet:
    """Predicted high-fidelity fields for one parameter over [0, T]."""
    return online_predict_detailed(model, mu, T).prediction


def _column_errors(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    ref_norm = np.linalg.norm(reference, axis=0)
    diff_norm = np.linalg.norm(reference - candidate, axis=0)
    safe = np.where(ref_norm > 0, ref_norm, 1.0)
    return np.where((ref_norm > 0) | (diff_norm > 0), diff_norm / safe, 0.0)


def _reference_index(reference: SnapshotSet, mu: float) -> int:
    matches = np.nonzero(np.isclose(reference.params[:, 0], mu, rtol=1e-12, atol=1e-12))[0]
    if matches.size == 0:
        raise CoverageError(f"reference set does not contain mu = {mu:g}")
    return int(matches[0])


def evaluate(
    model: SurrogateModel,
    test_params: np.ndarray,
    T: float,
    hf_reference: SnapshotSet,
    timing_reps: int = 3,
) -> EvalReport:
    """Column-wise relative errors and wall-clock comparison on a test set.

    ``hf_reference`` must hold trajectories for every requested parameter on
    the prediction time grid. ``timing_reps = 0`` skips the timing loops
    (times reported as NaN); otherwise each path's per-trajectory mean time
    is measured ``timing_reps`` times and the median is reported.
    """
    test_params = np.atleast_1d(np.asarray(test_params, dtype=np.float64))
    times = prediction_times(model, T)
    if hf_reference.n_dof != model.basis.n_dof:
        raise CoverageError(
            f"reference has {hf_reference.n_dof} rows, model expects {model.basis.n_dof}"
        )
    if hf_reference.times.size != times.size or not np.allclose(
        hf_reference.times, times, rtol=0, atol=1e-9
    ):
        raise CoverageError(
            "reference time grid does not cover the prediction grid "
            f"({hf_reference.times.size} vs {times.size} instants)"
        )
    ref_idx = [_reference_index(hf_reference, mu) for mu in test_params]

    all_mu = []
    all_t = []
    err_mf = []
    err_lf = []
    for mu, idx in zip(test_params, ref_idx):
        detail = online_predict_detailed(model, float(mu), T)
        ref_block = hf_reference.trajectory(idx)
        err_mf.append(_column_errors(ref_block, detail.prediction.data))
        lf_spec = LiftSpec(
            spatial_mode=model.lift_spec.spatial_mode,
            src_grid=model.lift_spec.src_grid,
            dst_grid=model.lift_spec.dst_grid,
            dst_times=times,
        )
        lifted = lift(detail.lf_snapshots, lf_spec)
        err_lf.append(_column_errors(ref_block, lifted.data))
        all_mu.append(np.full(times.size, mu))
        all_t.append(times)

    col_mf = 100.0 * np.concatenate(err_mf)
    col_lf = 100.0 * np.concatenate(err_lf)

    time_lf = time_mf = time_hf = float("nan")
    if timing_reps > 0:
        prov = model.provenance
        lf_reps, mf_reps, hf_reps = [], [], []
        for _ in range(timing_reps):
            t0 = time.perf_counter()
            for mu in test_params:
                _run_lf(model, float(mu), float(times[-1]))
            lf_reps.append((time.perf_counter() - t0) / test_params.size)
            t0 = time.perf_counter()
            for mu in test_params:
                online_predict(model, float(mu), T)
            mf_reps.append((time.perf_counter() - t0) / test_params.size)
            if prov.problem is not None and prov.hf_profile is not None:
                t0 = time.perf_counter()
                for mu in test_params:
                    solvers.generate_dataset(
                        prov.problem, prov.hf_profile, np.array([mu]), float(times[-1])
                    )
                hf_reps.append((time.perf_counter() - t0) / test_params.size)
        time_lf = float(np.median(lf_reps))
        time_mf = float(np.median(mf_reps))
        if hf_reps:
            time_hf = float(np.median(hf_reps))

    return EvalReport(
        err_mf_percent=float(col_mf.mean()),
        err_lf_percent=float(col_lf.mean()),
        time_lf=time_lf,
        time_mf=time_mf,
        time_hf=time_hf,
        mus=np.concatenate(all_mu),
        ts=np.concatenate(all_t),
        col_err_mf_percent=col_mf,
        col_err_lf_percent=col_lf,
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _dump_f64(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _basis_to_bytes(basis: PodBasis) -> bytes:
    parts = [_BASIS_MAGIC]
    parts.append(
        struct.pack(
            "<7I",
            basis.n_dof,
            basis.n_pod,
            basis.sigma.size,
            basis.grid.n,
            len(basis.field_names),
            int(basis.snapshot_mean is not None),
            int(basis.eps_pod is not None),
        )
    )
    parts.append(struct.pack("<d", basis.grid.L))
    if basis.eps_pod is not None:
        parts.append(struct.pack("<d", basis.eps_pod))
    parts.append(_dump_f64(basis.sigma))
    parts.append(np.asfortranarray(basis.modes, dtype="<f8").tobytes(order="F"))
    if basis.snapshot_mean is not None:
        parts.append(_dump_f64(basis.snapshot_mean))
    for name in basis.field_names:
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
    return b"".join(parts)


class _BlockReader:
    def __init__(self, buf: bytes, what: str):
        self.buf = buf
        self.pos = 0
        self.what = what

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.buf):
            raise FormatError(f"truncated {self.what} block")
        out = self.buf[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals[0] if count == 1 else vals

    def f64(self, count: int = 1):
        vals = struct.unpack(f"<{count}d", self.take(8 * count))
        return vals[0] if count == 1 else vals

    def f64_array(self, size: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * size), dtype="<f8").copy()


def _basis_from_bytes(buf: bytes) -> PodBasis:
    reader = _BlockReader(buf, "basis")
    if reader.take(8) != _BASIS_MAGIC:
        raise FormatError("bad basis block magic")
    n_dof, n_pod, n_sigma, n_grid, n_fields, has_mean, has_eps = reader.u32(7)
    length = reader.f64()
    eps = reader.f64() if has_eps else None
    sigma = reader.f64_array(n_sigma)
    modes = reader.f64_array(n_dof * n_pod).reshape((n_dof, n_pod), order="F")
    mean = reader.f64_array(n_dof) if has_mean else None
    names = []
    for _ in range(n_fields):
        n_bytes = reader.u32()
        names.append(reader.take(n_bytes).decode("utf-8"))
    return PodBasis(
        modes=np.asfortranarray(modes),
        sigma=sigma,
        n_pod=n_pod,
        eps_pod=eps,
        snapshot_mean=mean,
        grid=Grid2D(n_grid, length),
        field_names=tuple(names),
    )


_MODE_CODES = {"nearest": 0, "bilinear": 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def _lift_to_bytes(spec: LiftSpec) -> bytes:
    return b"".join(
        [
            _LIFT_MAGIC,
            struct.pack(
                "<4I",
                _MODE_CODES[spec.spatial_mode],
                spec.src_grid.n,
                spec.dst_grid.n,
                spec.dst_times.size,
            ),
            struct.pack("<2d", spec.src_grid.L, spec.dst_grid.L),
            _dump_f64(spec.dst_times),
        ]
    )


def _lift_from_bytes(buf: bytes) -> LiftSpec:
    reader = _BlockReader(buf, "lift spec")
    if reader.take(8) != _LIFT_MAGIC:
        raise FormatError("bad lift block magic")
    mode, src_n, dst_n, n_times = reader.u32(4)
    src_l, dst_l = reader.f64(2)
    times = reader.f64_array(n_times)
    if mode not in _MODE_NAMES:
        raise FormatError(f"unknown lift mode code {mode}")
    return LiftSpec(
        spatial_mode=_MODE_NAMES[mode],
        src_grid=Grid2D(src_n, src_l),
        dst_grid=Grid2D(dst_n, dst_l),
        dst_times=times,
    )


def _profile_to_bytes(profile: FidelityProfile | None) -> bytes:
    if profile is None:
        return struct.pack("<I", 0)
    return struct.pack(
        "<3I2d",
        1,
        0 if profile.fidelity == "HF" else 1,
        profile.n,
        profile.dt,
        profile.d if profile.d is not None else float("nan"),
    )


def _profile_from_reader(reader: _BlockReader) -> FidelityProfile | None:
    present = reader.u32()
    if not present:
        return None
    fid_code, n = reader.u32(2)
    dt, d = reader.f64(2)
    return FidelityProfile(
        fidelity="HF" if fid_code == 0 else "LF",
        n=n,
        dt=dt,
        d=None if np.isnan(d) else d,
    )


def _provenance_to_bytes(prov: Provenance) -> bytes:
    problem = (prov.problem or "").encode("utf-8")
    parts = [_PROV_MAGIC, struct.pack("<I", len(problem)), problem]
    parts.append(_profile_to_bytes(prov.hf_profile))
    parts.append(_profile_to_bytes(prov.lf_profile))
    nan = float("nan")
    parts.append(
        struct.pack(
            "<3d",
            prov.t_train if prov.t_train is not None else nan,
            prov.param_lo if prov.param_lo is not None else nan,
            prov.param_hi if prov.param_hi is not None else nan,
        )
    )
    return b"".join(parts)


def _provenance_from_bytes(buf: bytes) -> Provenance:
    reader = _BlockReader(buf, "provenance")
    if reader.take(8) != _PROV_MAGIC:
        raise FormatError("bad provenance block magic")
    n_problem = reader.u32()
    problem = reader.take(n_problem).decode("utf-8") or None
    hf_profile = _profile_from_reader(reader)
    lf_profile = _profile_from_reader(reader)
    t_train, lo, hi = reader.f64(3)
    return Provenance(
        problem=problem,
        hf_profile=hf_profile,
        lf_profile=lf_profile,
        t_train=None if np.isnan(t_train) else t_train,
        param_lo=None if np.isnan(lo) else lo,
        param_hi=None if np.isnan(hi) else hi,
    )


def save_model(model: SurrogateModel, path: str | Path) -> None:
    """Persist the composite surrogate; round trips are bit-exact."""
    blocks = [
        _basis_to_bytes(model.basis),
        _lift_to_bytes(model.lift_spec),
        lstm_to_bytes(model.lstm),
        _provenance_to_bytes(model.provenance),
    ]
    try:
        with open(path, "wb") as fh:
            fh.write(SURROGATE_MAGIC)
            for block in blocks:
                fh.write(struct.pack("<Q", len(block)))
                fh.write(block)
    except OSError as exc:
        raise StorageError(f"cannot write model to {path}: {exc}") from exc


def load_model(path: str | Path) -> SurrogateModel:
    """Load a surrogate written by ``save_model``; never returns a partial model."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read model from {path}: {exc}") from exc
    reader = _BlockReader(raw, "surrogate container")
    if reader.take(8) != SURROGATE_MAGIC:
        raise FormatError("bad surrogate file magic")
    blocks = []
    for _ in range(4):
        (size,) = struct.unpack("<Q", reader.take(8))
        blocks.append(reader.take(size))
    if reader.pos != len(raw):
        raise FormatError("trailing bytes after surrogate container")
    basis = _basis_from_bytes(blocks[0])
    spec = _lift_from_bytes(blocks[1])
    lstm = lstm_from_bytes(blocks[2])
    provenance = _provenance_from_bytes(blocks[3])
    return SurrogateModel(basis=basis, lift_spec=spec, lstm=lstm, provenance=provenance)
