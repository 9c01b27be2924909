"""Fourier pseudo-spectral generators of high- and low-fidelity datasets.

Two benchmark problems on periodic square domains:

* ``rd`` — a lambda-omega reaction-diffusion system for (u, v):
      u_t = (1 - (u^2+v^2)) u + mu (u^2+v^2) v + d (u_xx + u_yy)
      v_t = -mu (u^2+v^2) u + (1 - (u^2+v^2)) v + d (v_xx + v_yy)
  on [-20, 20]^2, producing rotating spiral waves on a limit cycle.

* ``sw`` — advection-diffusion of vorticity in the shallow-water limit:
      w_t + mu (psi_x w_y - psi_y w_x) = d laplace(w),   laplace(psi) = w
  on [-10, 10]^2 with a stretched-Gaussian initial vorticity.

Both solvers keep the state in spectral space, apply diffusion exactly via
wavenumber multiplication, evaluate nonlinear terms pseudo-spectrally in
physical space, and advance with classical fixed-step RK4. Snapshots are
stored at every step, so a run over [0, T] yields round(T/dt) + 1 columns.
No dealiasing filter is applied by default (``dealias`` enables a 2/3-rule
mask). Trajectories are deterministic: identical configs give bit-identical
output.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, ValidationError
from .numerics import Grid2D, field_to_vec
from .snapshots import ParameterGrid, SnapshotSet


@dataclass
class RdConfig:
    """Reaction-diffusion run: reaction strength ``mu``, diffusion ``d``."""

    n: int
    T: float
    mu: float
    d: float = 0.05
    L: float = 20.0
    dt: float = 0.05

    def __post_init__(self):
        _check_common(self.n, self.dt, self.T)
        if not (self.d > 0):
            raise ValidationError(f"diffusion coefficient must be positive, got {self.d}")


@dataclass
class SwConfig:
    """Shallow-water vorticity run: advection strength ``mu``, diffusion ``d``."""

    n: int
    T: float = 20.0
    mu: float = 3.0
    d: float = 0.001
    L: float = 10.0
    dt: float = 0.25

    def __post_init__(self):
        _check_common(self.n, self.dt, self.T)
        if not (self.d > 0):
            raise ValidationError(f"diffusion coefficient must be positive, got {self.d}")


@dataclass(frozen=True)
class FidelityProfile:
    """Numerical resolution plus optional physical corruption of one fidelity level.

    ``d`` overrides the problem's diffusion coefficient when set (the
    corrupted-physics low-fidelity mode); ``None`` keeps the default.
    """

    fidelity: str
    n: int
    dt: float
    d: float | None = None

    def __post_init__(self):
        if self.fidelity not in ("HF", "LF"):
            raise ValidationError(f"fidelity must be 'HF' or 'LF', got {self.fidelity!r}")
        if self.n < 4 or self.n % 2:
            raise ValidationError(f"profile grid size must be even and >= 4, got {self.n}")
        if not (self.dt > 0):
            raise ValidationError(f"profile time step must be positive, got {self.dt}")


def _check_common(n: int, dt: float, T: float) -> None:
    if n < 4 or n % 2:
        raise ValidationError(f"grid size must be even and >= 4, got n={n}")
    if not (dt > 0):
        raise ValidationError(f"time step must be positive, got dt={dt}")
    if T < 0:
        raise ValidationError(f"final time must be nonnegative, got T={T}")


def _times(T: float, dt: float) -> np.ndarray:
    steps = int(round(T / dt))
    return dt * np.arange(steps + 1)


def _dealias_mask(n: int) -> np.ndarray:
    cutoff = n // 3
    modes = np.abs(np.fft.fftfreq(n) * n)
    keep = modes <= cutoff
    return np.outer(keep, keep)


def rd_initial(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Spiral-seed initial condition, identical for both components.

    u0 = v0 = tanh(r * cos(theta - r)) with r the radius and theta the
    complex argument of x + iy (theta = 0 at the origin), evaluated
    nodewise.
    """
    X, Y = grid.meshes()
    r = np.sqrt(X**2 + Y**2)
    theta = np.angle(X + 1j * Y)
    u0 = np.tanh(r * np.cos(theta - r))
    return u0, u0.copy()


def sw_initial(grid: Grid2D) -> np.ndarray:
    """Stretched-Gaussian initial vorticity exp(-2x^2 - y^2/20)."""
    X, Y = grid.meshes()
    return np.exp(-2.0 * X**2 - Y**2 / 20.0)


def solve_poisson(omega: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Solve laplace(psi) = omega spectrally with a zero-mean gauge for psi."""
    KX, KY = grid.wavenumber_meshes()
    k2 = KX**2 + KY**2
    w_hat = np.fft.fft2(omega)
    psi_hat = np.zeros_like(w_hat)
    nonzero = k2 > 0
    psi_hat[nonzero] = -w_hat[nonzero] / k2[nonzero]
    return np.fft.ifft2(psi_hat).real


def _check_finite(state_hats: tuple[np.ndarray, ...], step: int, t: float) -> None:
    for hat in state_hats:
        if not np.all(np.isfinite(hat)):
            raise InstabilityError(
                f"solver produced non-finite values at step {step} (t = {t:g}); "
                f"reduce dt or resolution demands"
            )


def solve_rd(
    cfg: RdConfig,
    ic: tuple[np.ndarray, np.ndarray] | None = None,
    include_reaction: bool = True,
    dealias: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the reaction-diffusion system; snapshots at every step.

    Returns (times, data) with data (2*n^2, n_steps+1): each column stacks
    the flattened u field over the flattened v field. ``ic`` and
    ``include_reaction`` are test hooks (defaults reproduce the benchmark).
    """
    grid = Grid2D(cfg.n, cfg.L)
    KX, KY = grid.wavenumber_meshes()
    k2 = KX**2 + KY**2
    mask = _dealias_mask(cfg.n) if dealias else None

    u0, v0 = rd_initial(grid) if ic is None else ic
    u_hat = np.fft.fft2(np.asarray(u0, dtype=np.float64))
    v_hat = np.fft.fft2(np.asarray(v0, dtype=np.float64))

    def rhs(uh, vh):
        if include_reaction:
            u = np.fft.ifft2(uh).real
            v = np.fft.ifft2(vh).real
            a2 = u * u + v * v
            ru = np.fft.fft2((1.0 - a2) * u + cfg.mu * a2 * v)
            rv = np.fft.fft2(-cfg.mu * a2 * u + (1.0 - a2) * v)
            if mask is not None:
                ru *= mask
                rv *= mask
        else:
            ru = rv = 0.0
        return ru - cfg.d * k2 * uh, rv - cfg.d * k2 * vh

    times = _times(cfg.T, cfg.dt)
    data = np.empty((2 * cfg.n**2, times.size), dtype=np.float64, order="F")

    def store(col, uh, vh):
        data[: cfg.n**2, col] = field_to_vec(np.fft.ifft2(uh).real)
        data[cfg.n**2 :, col] = field_to_vec(np.fft.ifft2(vh).real)

    store(0, u_hat, v_hat)
    dt = cfg.dt
    # overflow in a diverging run is reported as InstabilityError, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, times.size):
            k1u, k1v = rhs(u_hat, v_hat)
            k2u, k2v = rhs(u_hat + 0.5 * dt * k1u, v_hat + 0.5 * dt * k1v)
            k3u, k3v = rhs(u_hat + 0.5 * dt * k2u, v_hat + 0.5 * dt * k2v)
            k4u, k4v = rhs(u_hat + dt * k3u, v_hat + dt * k3v)
            u_hat = u_hat + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v_hat = v_hat + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            _check_finite((u_hat, v_hat), step, times[step])
            store(step, u_hat, v_hat)
    return times, data


def solve_sw(
    cfg: SwConfig,
    ic: np.ndarray | None = None,
    dealias: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the vorticity transport problem; snapshots at every step.

    Each RK4 stage re-solves the Poisson problem for the streamfunction
    (zero-mean gauge), forms the advection bracket pseudo-spectrally, and
    adds exact spectral diffusion. Returns (times, data) with data
    (n^2, n_steps+1) holding flattened vorticity columns.
    """
    grid = Grid2D(cfg.n, cfg.L)
    KX, KY = grid.wavenumber_meshes()
    k2 = KX**2 + KY**2
    inv_k2 = np.zeros_like(k2)
    nonzero = k2 > 0
    inv_k2[nonzero] = 1.0 / k2[nonzero]
    mask = _dealias_mask(cfg.n) if dealias else None

    w0 = sw_initial(grid) if ic is None else np.asarray(ic, dtype=np.float64)
    w_hat = np.fft.fft2(w0)

    def rhs(wh):
        psi_hat = -wh * inv_k2
        psi_x = np.fft.ifft2(1j * KX * psi_hat).real
        psi_y = np.fft.ifft2(1j * KY * psi_hat).real
        w_x = np.fft.ifft2(1j * KX * wh).real
        w_y = np.fft.ifft2(1j * KY * wh).real
        bracket = np.fft.fft2(psi_x * w_y - psi_y * w_x)
        if mask is not None:
            bracket *= mask
        return -cfg.mu * bracket - cfg.d * k2 * wh

    times = _times(cfg.T, cfg.dt)
    data = np.empty((cfg.n**2, times.size), dtype=np.float64, order="F")
    data[:, 0] = field_to_vec(np.fft.ifft2(w_hat).real)
    dt = cfg.dt
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, times.size):
            k1 = rhs(w_hat)
            k2_ = rhs(w_hat + 0.5 * dt * k1)
            k3 = rhs(w_hat + 0.5 * dt * k2_)
            k4 = rhs(w_hat + dt * k3)
            w_hat = w_hat + (dt / 6.0) * (k1 + 2.0 * k2_ + 2.0 * k3 + k4)
            _check_finite((w_hat,), step, times[step])
            data[:, step] = field_to_vec(np.fft.ifft2(w_hat).real)
    return times, data


_RD_FIELDS = ("u", "v")
_SW_FIELDS = ("omega",)


def _solve_one(problem: str, profile: FidelityProfile, mu: float, T: float):
    if problem == "rd":
        cfg = RdConfig(n=profile.n, T=T, mu=mu, dt=profile.dt,
                       d=profile.d if profile.d is not None else 0.05)
        return solve_rd(cfg)
    if problem == "sw":
        cfg = SwConfig(n=profile.n, T=T, mu=mu, dt=profile.dt,
                       d=profile.d if profile.d is not None else 0.001)
        return solve_sw(cfg)
    raise ValidationError(f"unknown problem {problem!r} (expected 'rd' or 'sw')")


def problem_grid(problem: str, n: int) -> Grid2D:
    if problem == "rd":
        return Grid2D(n, 20.0)
    if problem == "sw":
        return Grid2D(n, 10.0)
    raise ValidationError(f"unknown problem {problem!r} (expected 'rd' or 'sw')")


def generate_dataset(
    problem: str,
    profile: FidelityProfile,
    params: ParameterGrid | np.ndarray,
    T: float,
    workers: int = 1,
) -> SnapshotSet:
    """Run the solver at every parameter value and assemble a SnapshotSet.

    Trajectories are independent jobs; with ``workers > 1`` they run in a
    thread pool, but assembly order is always by parameter index so the
    result does not depend on scheduling.
    """
    values = params.values if isinstance(params, ParameterGrid) else np.asarray(params, float)
    if values.ndim != 1 or values.size < 1:
        raise ValidationError("parameter values must be a nonempty 1-D vector")
    grid = problem_grid(problem, profile.n)

    def run(mu: float):
        try:
            return _solve_one(problem, profile, float(mu), T)
        except InstabilityError as exc:
            raise InstabilityError(f"mu = {mu:g}: {exc}") from exc

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, values))
    else:
        results = [run(mu) for mu in values]

    times = results[0][0]
    n_dof = results[0][1].shape[0]
    data = np.empty((n_dof, values.size * times.size), dtype=np.float64, order="F")
    for i, (_, traj) in enumerate(results):
        data[:, i * times.size : (i + 1) * times.size] = traj
    return SnapshotSet(
        fidelity=profile.fidelity,
        data=data,
        grid=grid,
        times=times,
        params=values[:, None],
        field_names=_RD_FIELDS if problem == "rd" else _SW_FIELDS,
    )
