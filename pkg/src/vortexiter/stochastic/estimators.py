"""Monte Carlo estimators for the drift-diffusion kernel, the linearized
vorticity and the logarithmic gradient of the kernel.

All estimators stream the ensemble block by block (same blocks and streams as
:func:`~vortexiter.stochastic.paths.sample_paths`) and keep only per-path
scalars, so 10^5 to 10^6 paths fit in memory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..fields import PeriodicVectorField, trilinear
from ..gaussian import gaussian, theta, theta_moment
from .paths import LOG_WEIGHT_CAP, SdeConfig, block_increments

DENSITY_FLOOR = 1e-300
ESTIMATE_COLUMNS = ("target_x", "target_y", "target_z", "t", "value", "component", "std_err", "n_paths", "seed")


@dataclass(frozen=True)
class KernelEstimate:
    value: np.ndarray
    std_error: np.ndarray
    n_paths: int
    target: np.ndarray
    t: float
    seed: int
    flagged: int = 0
    vector: bool = False  # value holds the three components at one target

    def rows(self) -> list[list]:
        """CSV rows; vector-valued estimates get one row per component."""
        targets = np.atleast_2d(self.target)
        value = np.atleast_1d(self.value)
        err = np.atleast_1d(self.std_error)
        rows = []
        if self.vector:
            for c in range(3):
                rows.append(list(targets[0]) + [self.t, value[c], c, err[c], self.n_paths, self.seed])
            return rows
        for i, y in enumerate(targets):
            rows.append(list(y) + [self.t, value[i], "", err[i], self.n_paths, self.seed])
        return rows


def write_estimates(path, estimates) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(ESTIMATE_COLUMNS)
        for est in estimates:
            for row in est.rows():
                out.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(samples)
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(n)


def _is_zero_drift(b) -> bool:
    return b is None or (hasattr(b, "sup_norm") and b.sup_norm() == 0.0)


# --- heat kernel representation -----------------------------------------------


def _correction_kernel(z: np.ndarray, s_left: float, bvec: np.ndarray, periodic: bool) -> np.ndarray:
    """``sum over images of G_s(z) b . z / s`` for ``z`` of shape ``(P, q, 3)``."""
    if not periodic:
        return gaussian(s_left, z) * (bvec[:, None, :] * z).sum(axis=-1) / s_left
    th = theta(s_left, z)
    mo = theta_moment(s_left, z)
    out = np.zeros(z.shape[:-1])
    for i in range(3):
        j, k = [a for a in range(3) if a != i]
        out += bvec[:, None, i] * mo[..., i] * th[..., j] * th[..., k]
    return out / s_left


def _leading_term(t: float, z: np.ndarray, periodic: bool) -> np.ndarray:
    if not periodic:
        return gaussian(t, z)
    return theta(t, z).prod(axis=-1)


def kernel_mc(tau: float, xi, t: float, y, b, cfg: SdeConfig, *, periodic: bool = True) -> KernelEstimate:
    """Estimate the transition density from ``(tau, xi)`` to ``(t, y)``.

    Uses the representation

        p = G_{t-tau}(y - xi) + int_tau^t E[U_s G_{t-s}(y - X_s) b(X_s, s) . (y - X_s) / (t - s)] ds

    with ``X`` a Brownian motion from ``xi`` and ``U`` the Cameron-Martin
    weight of ``b`` along ``X``.  The time integral is a left Riemann sum over
    the SDE steps, so the last sample sits at ``s = t - dt``.  With
    ``periodic`` every Gaussian factor is summed over lattice images, giving
    the torus kernel.  ``y`` may be one point or an array of targets.
    """
    if not t > tau:
        raise ValueError("kernel_mc needs t > tau")
    xi = np.asarray(xi, dtype=float).reshape(3)
    y = np.asarray(y, dtype=float)
    targets = np.atleast_2d(y)
    lead = _leading_term(t - tau, targets - xi, periodic)
    if _is_zero_drift(b):
        value = lead if y.ndim == 2 else lead[0]
        return KernelEstimate(value, np.zeros_like(value), cfg.n_paths, y, t, cfg.seed)

    m = cfg.steps(t - tau)
    dt = cfg.dt
    per_path = []
    flagged = 0
    for _, size, rng in cfg.blocks():
        dB = block_increments(rng, m, size, dt)
        X = np.broadcast_to(xi, (size, 3)).copy()
        logU = np.zeros(size)
        acc = np.zeros((size, len(targets)))
        for k in range(m):
            s = tau + k * dt
            bk = b.velocity(np.mod(X, 1.0), s)
            U = np.exp(np.minimum(logU, LOG_WEIGHT_CAP))
            acc += dt * U[:, None] * _correction_kernel(targets[None] - X[:, None], t - s, bk, periodic)
            logU += (bk * dB[k]).sum(axis=1) - 0.5 * dt * (bk**2).sum(axis=1)
            X += dB[k]
        flagged += int((logU > LOG_WEIGHT_CAP).sum())
        per_path.append(acc)
    corr, se = _mean_se(np.concatenate(per_path))
    value = lead + corr
    if y.ndim == 1:
        value, se = value[0], se[0]
    return KernelEstimate(value, se, cfg.n_paths, y, t, cfg.seed, flagged)


# --- Feynman-Kac vorticity ----------------------------------------------------


def _vector_evaluator(f) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, PeriodicVectorField):
        data = f.data
        return lambda pts: trilinear(data, np.mod(pts, 1.0))
    if hasattr(f, "vorticity"):
        return f.vorticity
    return f


def feynman_kac_vorticity(x, t: float, b, omega0, cfg: SdeConfig) -> KernelEstimate:
    """Estimate ``w(x, t)`` for ``dw/dt + (b . grad) w - A(b) w - 1/2 Lap w = 0``.

    Samples reversed paths ``dY = dB - b(Y, t - r) dr`` from ``Y_0 = x`` and the
    stretching matrix ``dQ/dr = Q A(b)(Y_r, t - r)``, ``Q_0 = I``, and returns
    the mean of ``Q_t omega0(Y_t)``.  ``omega0`` is a callable on ``(P, 3)``
    points, a grid field (trilinear interpolation), or an analytic drift with
    a ``vorticity`` method.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    w0 = _vector_evaluator(omega0)
    m = cfg.steps(t)
    dt = cfg.dt
    samples = []
    for _, size, rng in cfg.blocks():
        dB = block_increments(rng, m, size, dt)
        Y = np.broadcast_to(x, (size, 3)).copy()
        Q = np.broadcast_to(np.eye(3), (size, 3, 3)).copy()
        A_now = b.jacobian(np.mod(Y, 1.0), t)
        for k in range(m):
            s = t - k * dt
            Y += dB[k] - dt * b.velocity(np.mod(Y, 1.0), s)
            A_next = b.jacobian(np.mod(Y, 1.0), max(s - dt, 0.0))
            f0 = Q @ A_now
            Q = Q + 0.5 * dt * (f0 + (Q + dt * f0) @ A_next)
            A_now = A_next
        samples.append(np.einsum("pij,pj->pi", Q, w0(np.mod(Y, 1.0))))
    value, se = _mean_se(np.concatenate(samples))
    return KernelEstimate(vector=True, value=value, std_error=se, n_paths=cfg.n_paths, target=x, t=t, seed=cfg.seed)


# --- Bismut gradient ----------------------------------------------------------


def gaussian_density_evaluator(xi, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """Free-space ``G_t(. - xi)`` on unwrapped points."""
    xi = np.asarray(xi, dtype=float)
    return lambda pts: gaussian(t, pts - xi)


def grid_density_evaluator(density: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Trilinear interpolation of torus density samples on wrapped points."""
    return lambda pts: trilinear(density, np.mod(pts, 1.0))


def bismut_gradient(
    tau: float,
    xi,
    T: float,
    x,
    b,
    cfg: SdeConfig,
    *,
    density_eps: Callable[[np.ndarray], np.ndarray] | None = None,
    density_x: float | None = None,
) -> KernelEstimate:
    """Estimate ``grad_x ln p(tau, xi, tau + T, x)``.

    With ``eps = T/2``, reversed paths ``dY = dB - b(Y, T + tau - r) dr`` from
    ``x`` and the derivative flow ``dZ = -A(b) Z dr`` give

        (1 / (T - eps)) E[R int_0^{T-eps} Z^T dB],
        R = p(tau, xi, tau + eps, Y_{T-eps}) / p(tau, xi, tau + T, x).

    ``density_eps`` evaluates ``p(tau, xi, tau + eps, .)`` at unwrapped path
    points and ``density_x`` is ``p(tau, xi, tau + T, x)``.  For zero drift both
    default to the free-space Gaussian.  Paths where ``density_eps`` is not
    positive are floored at 1e-300 and counted in ``flagged``.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    xi = np.asarray(xi, dtype=float).reshape(3)
    eps = 0.5 * T
    if density_eps is None or density_x is None:
        if not _is_zero_drift(b):
            raise ValueError("a density evaluator is required for a non-zero drift")
        density_eps = gaussian_density_evaluator(xi, eps)
        density_x = float(gaussian(T, x - xi))
    if not density_x > 0:
        raise ValueError("density at the target must be positive")
    span = T - eps
    m = cfg.steps(span)
    dt = cfg.dt
    zero = _is_zero_drift(b)
    samples = []
    flagged = 0
    for _, size, rng in cfg.blocks():
        dB = block_increments(rng, m, size, dt)
        Y = np.broadcast_to(x, (size, 3)).copy()
        if zero:
            S = dB.sum(axis=0)
            Y += S
        else:
            Z = np.broadcast_to(np.eye(3), (size, 3, 3)).copy()
            S = np.zeros((size, 3))
            A_now = b.jacobian(np.mod(Y, 1.0), T + tau)
            for k in range(m):
                s = T + tau - k * dt
                S += np.einsum("pij,pi->pj", Z, dB[k])
                Y += dB[k] - dt * b.velocity(np.mod(Y, 1.0), s)
                A_next = b.jacobian(np.mod(Y, 1.0), s - dt)
                f0 = -A_now @ Z
                Z = Z + 0.5 * dt * (f0 - A_next @ (Z + dt * f0))
                A_now = A_next
        p = np.asarray(density_eps(Y), dtype=float)
        bad = ~(p > 0)
        flagged += int(bad.sum())
        R = np.where(bad, DENSITY_FLOOR, p) / density_x
        samples.append(R[:, None] * S / span)
    value, se = _mean_se(np.concatenate(samples))
    return KernelEstimate(vector=True, value=value, std_error=se, n_paths=cfg.n_paths, target=x, t=T, seed=cfg.seed, flagged=flagged)
