"""Linearized vorticity equation, Hodge velocity reconstruction, and the
drift-diffusion transition density on the torus.

The linearized problem is

    dw/dt + (b . grad) w - A(b) w - 1/2 Lap w = 0,     w(0) = omega0,

with ``A(b)[i, j] = d_j b^i``.  Time stepping is an integrating-factor Heun
scheme: diffusion is applied exactly per Fourier mode and the
advection/stretching terms are treated explicitly with 2/3-rule dealiasing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    FieldError,
    GridSpec,
    PeriodicVectorField,
    irfft3,
    rfft3,
    spectral_curl,
    spectral_divergence,
    spectral_gradient,
    trilinear,
)
from .gaussian import GaussianKernelParams, parabolic_norm, periodized_gaussian

_TIME_EPS = 1e-9


class CFLError(ValueError):
    def __init__(self, dt: float, max_dt: float):
        super().__init__(f"time step {dt:g} violates the advective CFL limit; need dt <= {max_dt:g}")
        self.dt = dt
        self.max_dt = max_dt


class SolverAbort(RuntimeError):
    """Numerical failure inside a solve (blow-up, NaN, mass drift)."""


class PoissonError(FieldError):
    pass


# --- drift histories ----------------------------------------------------------


class DriftHistory:
    """Time-indexed divergence-free velocity snapshots ``b(x, t_k)``.

    Linear interpolation in time, spectral (exact) in space.  Snapshots are
    stored as one ``(m, 3, n, n, n)`` array.
    """

    def __init__(self, grid: GridSpec, times, data, *, check: bool = True):
        times = np.asarray(times, dtype=float)
        data = np.asarray(data, dtype=float)
        n = grid.n
        if times.ndim != 1 or len(times) < 1:
            raise FieldError("drift history needs at least one time")
        if abs(times[0]) > _TIME_EPS:
            raise FieldError("drift history must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise FieldError("drift history times must be strictly increasing")
        if data.shape != (len(times), 3, n, n, n):
            raise FieldError(f"drift data must have shape ({len(times)}, 3, {n}, {n}, {n}), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise FieldError("drift history contains non-finite values")
        self.grid = grid
        self.times = times
        self.data = data
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        if check:
            for k in range(len(times)):
                div = irfft3(spectral_divergence(grid, rfft3(data[k])), n)
                scale = max(1.0, float(np.abs(data[k]).max()))
                if np.abs(div).max() > 1e-10 * scale:
                    raise FieldError(f"drift snapshot {k} (t={times[k]:g}) is not divergence-free")

    @classmethod
    def frozen(cls, b: PeriodicVectorField, t_end: float | None = None) -> "DriftHistory":
        """Time-independent drift; valid for all ``t >= 0``."""
        if t_end is None:
            return cls(b.grid, [0.0], b.data[None])
        return cls(b.grid, [0.0, t_end], np.stack([b.data, b.data]))

    @classmethod
    def from_fields(cls, fields, times) -> "DriftHistory":
        fields = list(fields)
        return cls(fields[0].grid, times, np.stack([f.data for f in fields]))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1]) if len(self.times) > 1 else math.inf

    def field(self, k: int) -> PeriodicVectorField:
        return PeriodicVectorField(self.grid, self.data[k], float(self.times[k]))

    def _bracket(self, t: float) -> tuple[int, int, float]:
        times = self.times
        if len(times) == 1:
            return 0, 0, 0.0
        if t < -_TIME_EPS or t > times[-1] + _TIME_EPS * max(1.0, times[-1]):
            raise FieldError(f"time {t:g} outside drift history [0, {times[-1]:g}]")
        j = int(np.searchsorted(times, t, side="right"))
        j = min(max(j, 1), len(times) - 1)
        i = j - 1
        h = times[j] - times[i]
        lam = (t - times[i]) / h
        if lam < 1e-12:
            return i, i, 0.0
        if lam > 1 - 1e-12:
            return j, j, 0.0
        return i, j, float(lam)

    def at(self, t: float) -> np.ndarray:
        """Velocity samples at time ``t``, shape ``(3, n, n, n)``."""
        i, j, lam = self._bracket(t)
        if i == j:
            return self.data[i]
        return (1 - lam) * self.data[i] + lam * self.data[j]

    def _snapshot_gradient(self, k: int) -> np.ndarray:
        if k not in self._cache:
            if len(self._cache) > 4:
                self._cache.pop(next(iter(self._cache)))
            g = irfft3(spectral_gradient(self.grid, rfft3(self.data[k])), self.grid.n)
            self._cache[k] = g
        return self._cache[k]

    def gradient_at(self, t: float) -> np.ndarray:
        """``A(b)`` samples at time ``t``, shape ``(3, 3, n, n, n)``."""
        i, j, lam = self._bracket(t)
        if i == j:
            return self._snapshot_gradient(i)
        return (1 - lam) * self._snapshot_gradient(i) + lam * self._snapshot_gradient(j)

    def sup_norm(self) -> float:
        return float(np.sqrt((self.data**2).sum(axis=1)).max())

    def grad_sup(self, k: int) -> float:
        g = self._snapshot_gradient(k)
        return float(np.sqrt((g**2).sum(axis=(0, 1))).max())

    def grad_parabolic_norm(self, tau: float, T: float) -> float:
        """``sup_{tau <= t <= T} sqrt(t - tau) |grad b|`` (Hilbert-Schmidt).

        A frozen history is treated as constant on ``[tau, T]``.
        """
        if len(self.times) == 1:
            return math.sqrt(T - tau) * self.grad_sup(0)
        ks = [k for k, t in enumerate(self.times) if tau - _TIME_EPS <= t <= T + _TIME_EPS]
        if not ks:
            raise FieldError("no drift snapshots inside the requested interval")
        norms = [self.grad_sup(k) for k in ks]
        return parabolic_norm([self.times[k] for k in ks], norms, tau, T)

    # point evaluation used by the path samplers
    def velocity(self, x: np.ndarray, t: float) -> np.ndarray:
        return trilinear(self.at(t), np.mod(x, 1.0))

    def jacobian(self, x: np.ndarray, t: float) -> np.ndarray:
        return trilinear(self.gradient_at(t), np.mod(x, 1.0))


# --- configuration and results ------------------------------------------------


@dataclass(frozen=True)
class SolveConfig:
    dt: float
    t_end: float
    dealias: bool = True
    store_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.store_stride < 1:
            raise ValueError("store_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"dt={self.dt} does not divide t_end={self.t_end}")
        return max(n, 1)


def max_stable_dt(grid: GridSpec, b_sup: float) -> float:
    return 0.5 * grid.spacing / max(1.0, b_sup)


def check_cfl(grid: GridSpec, dt: float, b_sup: float) -> None:
    limit = max_stable_dt(grid, b_sup)
    if dt > limit * (1 + 1e-12):
        raise CFLError(dt, limit)


DIAGNOSTIC_COLUMNS = ("t", "max_div_w", "mean_w_norm", "sup_w", "sup_sqrt_t_grad_w")


@dataclass
class VorticityTrajectory:
    grid: GridSpec
    times: np.ndarray
    w: np.ndarray  # (m, 3, n, n, n)
    v: np.ndarray | None = None
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def w_field(self, k: int) -> PeriodicVectorField:
        return PeriodicVectorField(self.grid, self.w[k], float(self.times[k]))

    def v_field(self, k: int) -> PeriodicVectorField:
        if self.v is None:
            raise ValueError("trajectory was solved without velocity reconstruction")
        return PeriodicVectorField(self.grid, self.v[k], float(self.times[k]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(DIAGNOSTIC_COLUMNS)
            for k, t in enumerate(self.times):
                out.writerow([repr(float(t))] + [repr(float(self.diagnostics[c][k])) for c in DIAGNOSTIC_COLUMNS[1:]])


# --- the linearized vorticity stepper -----------------------------------------


def _vorticity_rhs(grid: GridSpec, wh: np.ndarray, b: np.ndarray, A: np.ndarray, dealias: bool) -> np.ndarray:
    """Spectral ``-(b . grad) w + A(b) w``."""
    n = grid.n
    w = irfft3(wh, n)
    gw = irfft3(spectral_gradient(grid, wh), n)
    N = np.einsum("ij...,j...->i...", A, w) - np.einsum("j...,ij...->i...", b, gw)
    Nh = rfft3(N)
    if dealias:
        Nh *= grid.dealias_mask
    return Nh


def _heun(grid, wh, dt, rhs0, rhs_fn, decay):
    """One integrating-factor Heun step given ``rhs0 = N(w_n)``."""
    pred = decay * (wh + dt * rhs0)
    rhs1 = rhs_fn(pred)
    return decay * (wh + 0.5 * dt * rhs0) + 0.5 * dt * rhs1


def step_linearized_vorticity(
    w: PeriodicVectorField,
    b0: PeriodicVectorField,
    b1: PeriodicVectorField,
    dt: float,
    *,
    dealias: bool = True,
) -> PeriodicVectorField:
    """Advance ``w`` by one step; ``b0``/``b1`` are the drift at the start/end.

    ``A(b)`` is formed spectrally from the supplied drift samples.
    """
    grid = w.grid
    for b in (b0, b1):
        if b.grid != grid or b.components != 3:
            raise FieldError("drift must be a 3-component field on the same grid as w")
    check_cfl(grid, dt, max(b0.sup_norm(), b1.sup_norm()))
    A0 = irfft3(spectral_gradient(grid, rfft3(b0.data)), grid.n)
    A1 = irfft3(spectral_gradient(grid, rfft3(b1.data)), grid.n)
    decay = np.exp(-0.5 * grid.k2 * dt)
    wh = rfft3(w.data)
    rhs0 = _vorticity_rhs(grid, wh, b0.data, A0, dealias)
    out = _heun(grid, wh, dt, rhs0, lambda p: _vorticity_rhs(grid, p, b1.data, A1, dealias), decay)
    return PeriodicVectorField(grid, irfft3(out, grid.n), w.time + dt)


def _diagnose(grid: GridSpec, wh: np.ndarray, t: float) -> tuple[float, float, float, float]:
    n = grid.n
    w = irfft3(wh, n)
    div = irfft3(spectral_divergence(grid, wh), n)
    gw = irfft3(spectral_gradient(grid, wh), n)
    return (
        float(np.abs(div).max()),
        float(np.linalg.norm(w.mean(axis=(1, 2, 3)))),
        float(np.sqrt((w**2).sum(axis=0)).max()),
        math.sqrt(max(t, 0.0)) * float(np.sqrt((gw**2).sum(axis=(0, 1))).max()),
    )


def solve_linearized_vorticity(
    omega0: PeriodicVectorField,
    b: DriftHistory,
    cfg: SolveConfig,
    *,
    with_velocity: bool = True,
) -> VorticityTrajectory:
    """Integrate the linearized vorticity equation on ``[0, cfg.t_end]``."""
    grid = omega0.grid
    if omega0.components != 3:
        raise FieldError("omega0 must be a vector field")
    if b.grid != grid:
        raise FieldError("drift history lives on a different grid")
    n_steps = cfg.n_steps
    if b.t_end < cfg.t_end - 1e-9:
        raise FieldError(f"drift history ends at {b.t_end:g} before t_end={cfg.t_end:g}")
    check_cfl(grid, cfg.dt, b.sup_norm())

    w0_sup = omega0.sup_norm()
    guard = 1e6 * w0_sup
    decay = np.exp(-0.5 * grid.k2 * cfg.dt)
    wh = rfft3(omega0.data)

    times, ws, diags = [], [], []

    def store(t, wh):
        times.append(t)
        ws.append(irfft3(wh, grid.n))
        diags.append(_diagnose(grid, wh, t))

    store(0.0, wh)
    for step in range(n_steps):
        t0 = step * cfg.dt
        t1 = (step + 1) * cfg.dt
        b0, A0 = b.at(t0), b.gradient_at(t0)
        b1, A1 = b.at(t1), b.gradient_at(t1)
        rhs0 = _vorticity_rhs(grid, wh, b0, A0, cfg.dealias)
        wh = _heun(grid, wh, cfg.dt, rhs0, lambda p: _vorticity_rhs(grid, p, b1, A1, cfg.dealias), decay)
        if (step + 1) % cfg.store_stride == 0 or step + 1 == n_steps:
            store(t1, wh)
            sup = diags[-1][2]
            if not math.isfinite(sup) or (w0_sup > 0 and sup > guard):
                raise SolverAbort(f"vorticity blow-up at t={t1:g}: sup|w|={sup:g} exceeds 1e6*|omega0|={guard:g}")
        elif not np.all(np.isfinite(wh)):
            raise SolverAbort(f"non-finite vorticity at t={t1:g}")

    diag = np.array(diags)
    traj = VorticityTrajectory(
        grid=grid,
        times=np.array(times),
        w=np.stack(ws),
        diagnostics={name: diag[:, i] for i, name in enumerate(DIAGNOSTIC_COLUMNS[1:])},
    )
    traj.diagnostics["t"] = traj.times
    if with_velocity:
        traj.v = np.stack([reconstruct_velocity_array(grid, wk) for wk in traj.w])
    return traj


# --- Hodge reconstruction -----------------------------------------------------


def reconstruct_velocity_array(grid: GridSpec, w: np.ndarray) -> np.ndarray:
    wh = rfft3(w)
    kd2 = (2 * np.pi) ** 2 * sum(k**2 for k in grid.deriv_wavenumbers)
    inv = np.where(kd2 > 0, 1.0 / np.where(kd2 > 0, kd2, 1.0), 0.0)
    vh = spectral_curl(grid, wh) * inv
    vh[:, 0, 0, 0] = 0.0
    return irfft3(vh, grid.n)


def reconstruct_velocity(w: PeriodicVectorField, *, mean_tol: float = 1e-10) -> PeriodicVectorField:
    """Mean-zero ``v`` with ``Lap v = -curl w`` (hence ``curl v = w`` for solenoidal ``w``)."""
    if w.components != 3:
        raise FieldError("reconstruct_velocity needs a vector field")
    m = np.abs(w.data.mean(axis=(1, 2, 3))).max()
    if m > mean_tol * max(1.0, w.sup_norm()):
        raise PoissonError(f"mean(w) = {m:g} is not zero; the Poisson problem is not solvable")
    return PeriodicVectorField(w.grid, reconstruct_velocity_array(w.grid, w.data), w.time)


# --- drift-diffusion transition density ---------------------------------------


@dataclass
class KernelTrajectory:
    """Snapshots of ``h_b(tau, xi, t, .)`` on the grid."""

    grid: GridSpec
    xi: np.ndarray
    tau: float
    t_mollify: float
    times: np.ndarray
    density: np.ndarray  # (m, n, n, n)
    mass_drift: float = 0.0
    min_density: float = 0.0

    def at(self, t: float) -> np.ndarray:
        """Density at time ``t``, linear in time between stored snapshots."""
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t={t:g} outside the stored range [{times[0]:g}, {times[-1]:g}]")
        j = int(np.clip(np.searchsorted(times, t), 1, len(times) - 1))
        lam = float(np.clip((t - times[j - 1]) / (times[j] - times[j - 1]), 0.0, 1.0))
        if lam == 0.0:
            return self.density[j - 1]
        if lam == 1.0:
            return self.density[j]
        return (1 - lam) * self.density[j - 1] + lam * self.density[j]

    def evaluate(self, t: float, points: np.ndarray) -> np.ndarray:
        """Trilinear interpolation of the stored density at ``points``."""
        return trilinear(self.at(t), np.mod(np.atleast_2d(points), 1.0))

    def gradient(self, t: float) -> np.ndarray:
        """Spectral gradient of the density at time ``t``, shape ``(3, n, n, n)``."""
        return irfft3(spectral_gradient(self.grid, rfft3(self.at(t))), self.grid.n)


def kernel_pde(
    xi,
    b: DriftHistory,
    t_end: float,
    cfg: SolveConfig,
    *,
    tau: float = 0.0,
    align_clock: bool = False,
) -> KernelTrajectory:
    """Evolve a mollified point mass at ``xi`` under ``dp/dt = 1/2 Lap p - b . grad p``.

    The initial density is the torus Gaussian of variance ``4 h**2`` (``h`` the
    grid spacing).  By default it is placed at time ``tau`` so that for
    ``b = 0`` the result is the torus kernel of variance ``t - tau + t_mollify``.
    With ``align_clock`` the mollified mass is treated as the density already
    aged ``t_mollify`` (centre advanced by ``t_mollify * b(xi, tau)``), which
    removes the leading mollification bias.  ``cfg.t_end`` is ignored in favour
    of ``t_end``, and ``cfg.dt`` is shortened if needed so that whole steps
    cover the span.
    """
    grid = b.grid
    n = grid.n
    xi = np.asarray(xi, dtype=float).reshape(3)
    t_m = 4.0 * grid.spacing**2
    check_cfl(grid, cfg.dt, b.sup_norm())

    centre = xi.copy()
    t_start = tau
    if align_clock:
        centre = xi + t_m * b.velocity(xi[None], tau)[0]
        t_start = tau + t_m
    span = t_end - t_start
    if not span > 0:
        raise ValueError(f"t_end={t_end:g} must exceed the start time {t_start:g}")
    # shrink the step so that a whole number of steps covers the span
    n_steps = max(1, math.ceil(span / cfg.dt - 1e-9))
    dt = span / n_steps

    X = np.stack(grid.mesh(), axis=-1)
    p0 = periodized_gaussian(GaussianKernelParams(t_m, 3), X - centre)
    p0 = p0 / p0.mean()
    ph = rfft3(p0)
    decay = np.exp(-0.5 * grid.k2 * dt)

    def rhs(ph, bt):
        gp = irfft3(spectral_gradient(grid, ph), n)
        Nh = rfft3(-np.einsum("j...,j...->...", bt, gp))
        if cfg.dealias:
            Nh *= grid.dealias_mask
        return Nh

    times = [t_start]
    dens = [p0]
    worst_mass = 0.0
    for step in range(n_steps):
        t0 = t_start + step * dt
        t1 = t0 + dt
        b1 = b.at(t1)
        r0 = rhs(ph, b.at(t0))
        ph = _heun(grid, ph, dt, r0, lambda q: rhs(q, b1), decay)
        mass_err = abs(ph.real[0, 0, 0] - 1.0)
        worst_mass = max(worst_mass, mass_err)
        if mass_err > 1e-8 or not np.isfinite(mass_err):
            raise SolverAbort(f"kernel mass drifted by {mass_err:g} at t={t1:g}")
        if (step + 1) % cfg.store_stride == 0 or step + 1 == n_steps:
            times.append(t1)
            dens.append(irfft3(ph, n))

    dens = np.stack(dens)
    return KernelTrajectory(
        grid=grid,
        xi=xi,
        tau=tau,
        t_mollify=t_m,
        times=np.array(times),
        density=dens,
        mass_drift=worst_mass,
        min_density=float(dens.min()),
    )
