"""Fixed-point construction ``u(n) = V(u(n-1))`` of periodic Navier-Stokes
solutions, with physical scaling, the existence-horizon estimate and the
diagnostic table for the local existence result.

``V`` maps a drift ``b`` to the velocity reconstructed from the solution of the
linearized vorticity equation driven by ``b``.  All internal work is done with
period 1 and viscosity 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import FieldError, GridSpec, PeriodicVectorField, curl, irfft3, rfft3, spectral_gradient
from .gaussian import parabolic_norm
from .vorticity import DriftHistory, SolveConfig, VorticityTrajectory, solve_linearized_vorticity

LOG_COLUMNS = ("n", "delta_n", "sup_u", "sup_w", "residual")
DIAG_COLUMNS = ("t", "sup_u", "sqrt_t_grad_u", "sup_w", "sqrt_t_grad_w")


@dataclass(frozen=True)
class PhysicalProblem:
    nu: float
    L: float
    u0: PeriodicVectorField

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")
        if not self.L > 0:
            raise ValueError("period must be positive")
        if self.u0.components != 3:
            raise FieldError("u0 must be a vector field")
        scale = max(1.0, self.u0.sup_norm())
        div = irfft3(sum(2j * np.pi * k * c for k, c in zip(self.u0.grid.deriv_wavenumbers, rfft3(self.u0.data))), self.u0.grid.n)
        if np.abs(div).max() > 1e-10 * scale:
            raise FieldError("u0 is not divergence-free")
        if np.abs(self.u0.data.mean(axis=(1, 2, 3))).max() > 1e-12 * scale:
            raise FieldError("u0 must have zero mean")


@dataclass(frozen=True)
class TimeMap:
    """``t_scaled = 2 nu t_phys / L**2``; velocity scales by ``L / (2 nu)``."""

    nu: float
    L: float

    @property
    def time_factor(self) -> float:
        return 2 * self.nu / self.L**2

    @property
    def velocity_factor(self) -> float:
        return self.L / (2 * self.nu)

    def to_scaled(self, t_phys):
        return np.asarray(t_phys) * self.time_factor if np.ndim(t_phys) else t_phys * self.time_factor

    def to_physical(self, t_scaled):
        return np.asarray(t_scaled) / self.time_factor if np.ndim(t_scaled) else t_scaled / self.time_factor


def nondimensionalize(p: PhysicalProblem) -> tuple[PeriodicVectorField, TimeMap]:
    """Unit-period, viscosity-1/2 initial velocity plus the time map.

    Grid samples of ``u0`` on ``L [0,1)^3`` are the samples of the scaled field
    on ``[0,1)^3``; only the amplitude changes.
    """
    tm = TimeMap(p.nu, p.L)
    return p.u0.scaled(tm.velocity_factor), tm


def dimensionalize(u: PeriodicVectorField, tm: TimeMap) -> PeriodicVectorField:
    return PeriodicVectorField(u.grid, u.data / tm.velocity_factor, float(tm.to_physical(u.time)))


def estimate_T0(omega0_sup: float, nu: float, L: float, C1: float = 1.0) -> float:
    """``C1 nu^2 L^-4 |omega0|_inf^-2``; ``+inf`` for zero vorticity."""
    if omega0_sup == 0:
        return math.inf
    return C1 * nu**2 / L**4 / omega0_sup**2


# --- the mapping V ------------------------------------------------------------


def _apply_V(b: DriftHistory, omega0: PeriodicVectorField, cfg: SolveConfig) -> tuple[DriftHistory, VorticityTrajectory]:
    traj = solve_linearized_vorticity(omega0, b, cfg, with_velocity=True)
    return DriftHistory(omega0.grid, traj.times, traj.v, check=False), traj


def apply_V(b: DriftHistory, omega0: PeriodicVectorField, cfg: SolveConfig) -> DriftHistory:
    """Solve the linearized vorticity problem with drift ``b`` and return the
    reconstructed velocity history."""
    return _apply_V(b, omega0, cfg)[0]


# --- residual and pressure ----------------------------------------------------


def _leray(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    ks = grid.deriv_wavenumbers
    kd2 = sum(k**2 for k in ks)
    kdotf = sum(k * c for k, c in zip(ks, fh))
    inv = np.where(kd2 > 0, 1.0 / np.where(kd2 > 0, kd2, 1.0), 0.0)
    return np.stack([c - k * kdotf * inv for k, c in zip(ks, fh)])


def _convective(grid: GridSpec, u: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Spectral ``(u . grad) u``."""
    uh = rfft3(u)
    gu = irfft3(spectral_gradient(grid, uh), grid.n)
    Nh = rfft3(np.einsum("j...,ij...->i...", u, gu))
    if dealias:
        Nh = Nh * grid.dealias_mask
    return Nh


def momentum_residual(grid: GridSpec, times: np.ndarray, u: np.ndarray, dealias: bool = True) -> np.ndarray:
    """``sup_x |P(du/dt + (u . grad) u - 1/2 Lap u)|`` at interior stored times.

    The time derivative is a central difference taken in the integrating-factor
    frame ``exp(k2 t / 2) u_hat``, which differentiates the heat semigroup
    exactly and leaves only the slowly varying part to the finite difference.
    Stored times must be uniformly spaced.
    """
    m = len(times)
    if m < 3:
        return np.zeros(0)
    dts = np.diff(times)
    if np.ptp(dts) > 1e-9 * dts.mean():
        raise ValueError("momentum residual needs uniformly spaced snapshots")
    h = dts.mean()
    up = np.exp(0.5 * grid.k2 * h)
    dn = np.exp(-0.5 * grid.k2 * h)
    out = np.empty(m - 2)
    prev, cur = rfft3(u[0]), rfft3(u[1])
    for k in range(1, m - 1):
        nxt = rfft3(u[k + 1])
        lin = (up * nxt - dn * prev) / (2 * h)
        r = _leray(grid, lin + _convective(grid, u[k], dealias))
        out[k - 1] = float(np.sqrt((irfft3(r, grid.n) ** 2).sum(axis=0)).max())
        prev, cur = cur, nxt
    return out


def recover_pressure(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    """Mean-zero ``P`` with ``Lap P = -div((u . grad) u)``; ``u`` is ``(..., 3, n, n, n)``."""
    u = np.asarray(u, dtype=float)
    flat = u.reshape((-1, 3) + u.shape[-3:])
    ks = grid.deriv_wavenumbers
    kd2 = (2 * np.pi) ** 2 * sum(k**2 for k in ks)
    inv = np.where(kd2 > 0, 1.0 / np.where(kd2 > 0, kd2, 1.0), 0.0)
    out = np.empty((len(flat),) + u.shape[-3:])
    for i, uk in enumerate(flat):
        Nh = _convective(grid, uk, dealias=False)
        Ph = sum(2j * np.pi * k * c for k, c in zip(ks, Nh)) * inv
        out[i] = irfft3(Ph, grid.n)
    return out.reshape(u.shape[:-4] + u.shape[-3:])


# --- Picard iteration ---------------------------------------------------------


@dataclass(frozen=True)
class IterationConfig:
    dt: float = 1e-3
    T: float | None = None  # physical horizon; None means the estimated T0
    tol: float = 1e-8
    max_iter: int = 50
    C1: float = 1.0
    dealias: bool = True
    compute_residual: bool = True

    def __post_init__(self):
        if self.T is not None and not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class IterationReport:
    grid: GridSpec
    time_map: TimeMap
    T: float  # scaled horizon
    deltas: list[float]
    sup_u: list[float]
    sup_w: list[float]
    residuals: list[float]
    converged: bool
    times: np.ndarray  # scaled
    u: np.ndarray
    w: np.ndarray
    omega0_sup: float
    P: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.deltas)

    @property
    def physical_times(self) -> np.ndarray:
        return self.time_map.to_physical(self.times)

    def velocity(self, k: int) -> PeriodicVectorField:
        return PeriodicVectorField(self.grid, self.u[k], float(self.times[k]))

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(LOG_COLUMNS)
            for i, row in enumerate(zip(self.deltas, self.sup_u, self.sup_w, self.residuals), start=1):
                out.writerow([i] + [repr(float(v)) for v in row])

    def write_diagnostics(self, path) -> None:
        table = existence_diagnostics(self)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(DIAG_COLUMNS)
            for row in zip(*(table["series"][c] for c in DIAG_COLUMNS)):
                out.writerow([repr(float(v)) for v in row])


def _sup_series(a: np.ndarray) -> np.ndarray:
    return np.sqrt((a**2).sum(axis=1)).max(axis=(1, 2, 3))


def physical_vorticity_sup(p: PhysicalProblem) -> float:
    # derivatives on the unit grid are L times the physical ones
    return curl(p.u0).sup_norm() / p.L


def resolve_horizon(p: PhysicalProblem, cfg: IterationConfig) -> tuple[float, int]:
    """Scaled horizon and step count; ``T=None`` rounds T0 down to whole steps.

    ``cfg.T`` and ``cfg.dt`` are physical times.
    """
    tm = TimeMap(p.nu, p.L)
    dt = float(tm.to_scaled(cfg.dt))
    if cfg.T is None:
        T0 = estimate_T0(physical_vorticity_sup(p), p.nu, p.L, cfg.C1)
        T = float(tm.to_scaled(T0)) if math.isfinite(T0) else 100 * dt
        steps = max(1, int(math.floor(T / dt + 1e-9)))
    else:
        T = float(tm.to_scaled(cfg.T))
        steps = int(round(T / dt))
        if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"dt={cfg.dt} does not divide T={cfg.T}")
    return steps * dt, steps


def picard_iterate(p: PhysicalProblem, cfg: IterationConfig, *, log=None) -> IterationReport:
    """Iterate ``u(n) = V(u(n-1))`` from ``u(0)(x, t) = u0(x)``.

    Convergence: ``sup_t |u(n) - u(n-1)|_inf <= tol * sup_t |u(n)|_inf``.
    Non-convergence after ``max_iter`` is reported, not raised.
    """
    U0, tm = nondimensionalize(p)
    grid = U0.grid
    omega0 = curl(U0)
    w0_sup = omega0.sup_norm()
    T, steps = resolve_horizon(p, cfg)
    dt = T / steps
    scfg = SolveConfig(dt=dt, t_end=T, dealias=cfg.dealias)

    times = np.arange(steps + 1) * dt
    b = DriftHistory(grid, times, np.broadcast_to(U0.data, (steps + 1,) + U0.data.shape).copy(), check=False)
    prev_u = b.data
    deltas, sups, supw, res = [], [], [], []
    converged = False
    traj = None
    for it in range(1, cfg.max_iter + 1):
        b, traj = _apply_V(b, omega0, scfg)
        u = b.data
        delta = float(_sup_series(u - prev_u).max())
        sup_u = float(_sup_series(u).max())
        deltas.append(delta)
        sups.append(sup_u)
        supw.append(float(traj.diagnostics["sup_w"].max()))
        r = momentum_residual(grid, traj.times, u, cfg.dealias) if cfg.compute_residual else np.zeros(0)
        res.append(float(r.max()) if r.size else 0.0)
        if log is not None:
            log(it, delta, sup_u, res[-1])
        prev_u = u
        if delta <= cfg.tol * sup_u or sup_u == 0.0:
            converged = True
            break

    return IterationReport(
        grid=grid,
        time_map=tm,
        T=T,
        deltas=deltas,
        sup_u=sups,
        sup_w=supw,
        residuals=res,
        converged=converged,
        times=traj.times,
        u=b.data,
        w=traj.w,
        omega0_sup=w0_sup,
    )


def existence_diagnostics(report: IterationReport) -> dict:
    """Sup and parabolic norms of ``u``, ``grad u``, ``w``, ``grad w`` divided by ``|omega0|_inf``."""
    grid = report.grid
    times = report.times
    sup_u = _sup_series(report.u)
    sup_w = _sup_series(report.w)
    gu = np.array([np.sqrt((irfft3(spectral_gradient(grid, rfft3(x)), grid.n) ** 2).sum(axis=(0, 1))).max() for x in report.u])
    gw = np.array([np.sqrt((irfft3(spectral_gradient(grid, rfft3(x)), grid.n) ** 2).sum(axis=(0, 1))).max() for x in report.w])
    w0 = report.omega0_sup
    scale = 1.0 / w0 if w0 > 0 else 0.0
    T = float(times[-1])
    return {
        "sup_u": float(sup_u.max()) * scale,
        "grad_u": parabolic_norm(times, gu, 0.0, T) * scale,
        "sup_w": float(sup_w.max()) * scale,
        "grad_w": parabolic_norm(times, gw, 0.0, T) * scale,
        "series": {
            "t": times,
            "sup_u": sup_u * scale,
            "sqrt_t_grad_u": np.sqrt(times) * gu * scale,
            "sup_w": sup_w * scale,
            "sqrt_t_grad_w": np.sqrt(times) * gw * scale,
        },
    }
