"""Euler-Maruyama path ensembles with reproducible block-wise random streams.

Paths are generated in fixed blocks of ``SdeConfig.block_size``.  Block ``j``
draws its Brownian increments from a PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(j,))``, so any estimator that walks the same
blocks in the same order sees bit-identical numbers whether it stores the full
ensemble or streams it.  (Plain ``seed ^ j`` would make nearby seeds share
streams.)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

LOG_WEIGHT_CAP = 700.0


class PathError(RuntimeError):
    pass


@dataclass(frozen=True)
class SdeConfig:
    dt: float
    n_paths: int
    seed: int = 0
    block_size: int = 4096

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def steps(self, span: float) -> int:
        m = round(span / self.dt)
        if m < 1 or abs(m * self.dt - span) > 1e-9 * max(1.0, span):
            raise ValueError(f"dt={self.dt} does not divide the time span {span:g}")
        return m

    def blocks(self) -> Iterator[tuple[int, int, np.random.Generator]]:
        """Yield ``(block_id, size, rng)`` in deterministic order."""
        n_blocks = math.ceil(self.n_paths / self.block_size)
        for j in range(n_blocks):
            size = min(self.block_size, self.n_paths - j * self.block_size)
            yield j, size, np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(j,))))


def block_increments(rng: np.random.Generator, n_steps: int, size: int, dt: float) -> np.ndarray:
    """Brownian increments of shape ``(n_steps, size, 3)``."""
    return rng.standard_normal((n_steps, size, 3)) * math.sqrt(dt)


@dataclass
class PathBundle:
    """Stored ensemble.  ``unwrapped`` lives on R^3; ``positions`` is its image in [0,1)^3."""

    times: np.ndarray  # (m+1,)
    unwrapped: np.ndarray  # (m+1, P, 3)
    increments: np.ndarray  # (m, P, 3)
    seed: int
    drift_times: np.ndarray | None = None  # time argument fed to b at each step
    log_weight: np.ndarray | None = None
    Q: np.ndarray | None = None
    Z: np.ndarray | None = None
    flagged: np.ndarray | None = None

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros(self.n_paths, dtype=bool)

    @property
    def positions(self) -> np.ndarray:
        return np.mod(self.unwrapped, 1.0)

    @property
    def n_paths(self) -> int:
        return self.unwrapped.shape[1]

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _euler_block(
    x0: np.ndarray,
    dB: np.ndarray,
    dt: float,
    drift: Callable[[np.ndarray, float], np.ndarray] | None,
    drift_times: np.ndarray,
    sign: float,
    block_offset: int = 0,
) -> np.ndarray:
    m, size, _ = dB.shape
    X = np.empty((m + 1, size, 3))
    X[0] = x0
    for k in range(m):
        step = dB[k]
        if drift is not None:
            bk = drift(X[k], drift_times[k])
            if not np.all(np.isfinite(bk)):
                bad = int(np.flatnonzero(~np.isfinite(bk).all(axis=1))[0]) + block_offset
                raise PathError(f"non-finite drift sample on path {bad} at step {k}")
            step = step + sign * dt * bk
        X[k + 1] = X[k] + step
    return X


def _drift_callable(b):
    if b is None:
        return None
    return lambda x, t: b.velocity(np.mod(x, 1.0), t)


def sample_paths(xi, tau: float, t_end: float, b, cfg: SdeConfig) -> PathBundle:
    """Forward paths ``dX = b(X, t) dt + dB`` from ``X_tau = xi``.

    ``b`` is any object with ``velocity(x, t)`` (analytic drift or
    :class:`DriftHistory`); ``None`` gives Brownian motion.  The drift is
    evaluated at the left endpoint of each step.
    """
    m = cfg.steps(t_end - tau)
    times = tau + cfg.dt * np.arange(m + 1)
    return _sample(xi, times, times[:-1], _drift_callable(b), cfg, +1.0)


def sample_backward_paths(x, T: float, b, cfg: SdeConfig, *, tau: float = 0.0) -> PathBundle:
    """Reversed paths ``dY = dB - b(Y, T + tau - r) dr`` from ``Y_0 = x``, ``r in [0, T]``."""
    m = cfg.steps(T)
    times = cfg.dt * np.arange(m + 1)
    return _sample(x, times, T + tau - times[:-1], _drift_callable(b), cfg, -1.0)


def _sample(x0, times, drift_times, drift, cfg: SdeConfig, sign: float) -> PathBundle:
    x0 = np.asarray(x0, dtype=float).reshape(3)
    m = len(times) - 1
    Xs, dBs = [], []
    for j, size, rng in cfg.blocks():
        dB = block_increments(rng, m, size, cfg.dt)
        Xs.append(_euler_block(x0, dB, cfg.dt, drift, drift_times, sign, j * cfg.block_size))
        dBs.append(dB)
    return PathBundle(
        times=times,
        unwrapped=np.concatenate(Xs, axis=1),
        increments=np.concatenate(dBs, axis=1),
        seed=cfg.seed,
        drift_times=np.asarray(drift_times, dtype=float),
    )


def _bundle_drift_times(bundle: PathBundle) -> np.ndarray:
    return bundle.drift_times if bundle.drift_times is not None else bundle.times[:-1]


def log_cameron_martin(X: np.ndarray, dB: np.ndarray, dt: float, b, drift_times) -> np.ndarray:
    """Running ``int b . dB - 1/2 int |b|^2 ds`` (left-point), shape ``(m+1, P)``."""
    m, P, _ = dB.shape
    out = np.zeros((m + 1, P))
    for k in range(m):
        bk = b.velocity(np.mod(X[k], 1.0), drift_times[k])
        out[k + 1] = out[k] + (bk * dB[k]).sum(axis=1) - 0.5 * dt * (bk**2).sum(axis=1)
    return out


def cameron_martin_weight(bundle: PathBundle, b) -> np.ndarray:
    """Per-path ``U = exp(int b . dB - 1/2 int |b|^2 ds)`` along the bundle.

    Paths whose log-weight exceeds 700 are flagged and their weight is capped
    at ``exp(700)``.
    """
    lw = log_cameron_martin(bundle.unwrapped, bundle.increments, bundle.dt, b, _bundle_drift_times(bundle))[-1]
    over = lw > LOG_WEIGHT_CAP
    bundle.flagged |= over
    bundle.log_weight = lw
    return np.exp(np.minimum(lw, LOG_WEIGHT_CAP))


# --- pathwise matrix flows ----------------------------------------------------


def heun_matrix_flow(A_of_step: Callable[[int], np.ndarray], m: int, dt: float, P: int, *, left: bool) -> np.ndarray:
    """Heun integration of ``M' = M A_k`` (``left=False``) or ``M' = -A_k M`` (``left=True``).

    ``A_of_step(k)`` returns the ``(P, 3, 3)`` matrices at step ``k`` (``0..m``).
    Returns the states at every step, shape ``(m+1, P, 3, 3)``.
    """
    M = np.empty((m + 1, P, 3, 3))
    M[0] = np.eye(3)
    A_next = A_of_step(0)
    for k in range(m):
        A_now, A_next = A_next, A_of_step(k + 1)
        if left:
            f0 = -A_now @ M[k]
            pred = M[k] + dt * f0
            f1 = -A_next @ pred
        else:
            f0 = M[k] @ A_now
            pred = M[k] + dt * f0
            f1 = pred @ A_next
        M[k + 1] = M[k] + 0.5 * dt * (f0 + f1)
    return M


def _jac_along(bundle: PathBundle, b, time_of_step) -> Callable[[int], np.ndarray]:
    X = bundle.unwrapped

    def A(k: int) -> np.ndarray:
        return b.jacobian(np.mod(X[k], 1.0), time_of_step(k))

    return A


def _flag_nonfinite(bundle: PathBundle, M: np.ndarray) -> None:
    bad = ~np.isfinite(M).all(axis=(0, 2, 3))
    bundle.flagged |= bad


def integrate_Q(bundle: PathBundle, b, t: float | None = None) -> np.ndarray:
    """Stretching matrix along reversed paths.

    For a bundle produced by :func:`sample_backward_paths` with horizon ``t``,
    integrates ``dQ/dr = Q A(b)(Y_r, t - r)``, ``Q = I`` at ``r = 0``.  The
    value at ``r = t`` is the matrix that transports ``omega0(Y_t)`` to
    ``w(x, t)``; for constant ``A`` it equals ``exp(t A)``.  Returns the
    states at every step, shape ``(m+1, P, 3, 3)``.
    """
    if t is None:
        t = float(bundle.times[-1])
    times = bundle.times
    Q = heun_matrix_flow(_jac_along(bundle, b, lambda k: max(t - times[k], 0.0)), bundle.n_steps, bundle.dt, bundle.n_paths, left=False)
    _flag_nonfinite(bundle, Q)
    bundle.Q = Q
    return Q


def integrate_Z(bundle: PathBundle, b, T: float | None = None, tau: float = 0.0) -> np.ndarray:
    """Derivative flow ``dZ = -A(b)(Y, T + tau - r) Z dr``, ``Z(0) = I``.

    ``Z`` is the Jacobian of the reversed path with respect to its start
    point.  Returns shape ``(m+1, P, 3, 3)``.
    """
    if T is None:
        T = float(bundle.times[-1])
    times = bundle.times
    Z = heun_matrix_flow(_jac_along(bundle, b, lambda k: T + tau - times[k]), bundle.n_steps, bundle.dt, bundle.n_paths, left=True)
    _flag_nonfinite(bundle, Z)
    bundle.Z = Z
    return Z


def hs_norm(M: np.ndarray) -> np.ndarray:
    return np.sqrt((M**2).sum(axis=(-2, -1)))


def q_bound(t: float, grad_b_parabolic: float) -> float:
    """Right-hand side ``9 exp(4 sqrt(t) |grad b|_{0->t})`` for ``|Q(0, t)|_HS^2``."""
    return 9.0 * math.exp(4.0 * math.sqrt(t) * grad_b_parabolic)


def z_bound(t: np.ndarray, T: float, grad_b_parabolic: float, z0: float = 3.0) -> np.ndarray:
    """``|Z(0)| exp(2 (sqrt T - sqrt(T - t)) |grad b|_{tau->tau+T})``."""
    t = np.asarray(t, dtype=float)
    return z0 * np.exp(2.0 * (math.sqrt(T) - np.sqrt(np.maximum(T - t, 0.0))) * grad_b_parabolic)


# --- PB3D debug dump ----------------------------------------------------------

PB3D_MAGIC = b"PB3D"
PB3D_VERSION = 1
_PB3D_HEADER = struct.Struct("<4sIII")


def write_bundle(bundle: PathBundle, path) -> None:
    """Header ``magic, version u32, n_paths u32, n_steps u32`` then unwrapped
    positions as little-endian f64 in ``(step, path, axis)`` order."""
    head = _PB3D_HEADER.pack(PB3D_MAGIC, PB3D_VERSION, bundle.n_paths, bundle.n_steps)
    Path(path).write_bytes(head + np.ascontiguousarray(bundle.unwrapped, dtype="<f8").tobytes())


def read_bundle_positions(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _PB3D_HEADER.size:
        raise PathError(f"{path}: truncated PB3D header")
    magic, version, P, m = _PB3D_HEADER.unpack_from(raw)
    if magic != PB3D_MAGIC or version != PB3D_VERSION:
        raise PathError(f"{path}: not a PB3D v{PB3D_VERSION} file")
    body = raw[_PB3D_HEADER.size:]
    if len(body) != (m + 1) * P * 3 * 8:
        raise PathError(f"{path}: data size does not match header")
    return np.frombuffer(body, dtype="<f8").reshape(m + 1, P, 3).copy()
