"""Gaussian heat kernels on R^d and on the unit torus, and the parabolic norm."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GaussianKernelParams:
    t: float
    d: int = 3
    beta: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"kernel time must be positive, got {self.t}")
        if self.beta < 1:
            raise ValueError(f"envelope inflation beta must be >= 1, got {self.beta}")


def _check_t(t: float) -> None:
    if not t > 0:
        raise ValueError(f"kernel time must be positive, got {t}")


def gaussian(t: float, x: np.ndarray, d: int | None = None) -> np.ndarray:
    """Normal density with covariance ``t I`` at points ``x`` of shape ``(..., d)``."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    if d is None:
        d = x.shape[-1] if x.ndim else 1
    r2 = (x**2).sum(axis=-1) if x.ndim else x**2
    return (2 * np.pi * t) ** (-d / 2) * np.exp(-r2 / (2 * t))


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def gaussian_kernel(p: GaussianKernelParams, x) -> np.ndarray:
    return gaussian(p.t, _points(x, p.d), p.d)


def gaussian_grad(t: float, x: np.ndarray) -> np.ndarray:
    """Gradient of ``G_t`` at ``x``: ``-x / t * G_t(x)``."""
    x = np.asarray(x, dtype=float)
    return -x / t * gaussian(t, x)[..., None]


def image_cutoff(t: float) -> int:
    """Lattice truncation ``ceil(1 + 6 sqrt(t))`` per axis."""
    return math.ceil(1 + 6 * math.sqrt(t))


def _image_offsets(t: float) -> np.ndarray:
    K = image_cutoff(t)
    return np.arange(-K, K + 1, dtype=float)


def theta(t: float, z: np.ndarray) -> np.ndarray:
    """1-D periodized Gaussian ``sum_k g_t(z + k)``."""
    _check_t(t)
    z = np.asarray(z, dtype=float)
    zk = z[..., None] + _image_offsets(t)
    return np.exp(-zk**2 / (2 * t)).sum(axis=-1) / math.sqrt(2 * np.pi * t)


def theta_moment(t: float, z: np.ndarray) -> np.ndarray:
    """1-D first moment ``sum_k (z + k) g_t(z + k)``."""
    _check_t(t)
    z = np.asarray(z, dtype=float)
    zk = z[..., None] + _image_offsets(t)
    return (zk * np.exp(-zk**2 / (2 * t))).sum(axis=-1) / math.sqrt(2 * np.pi * t)


def periodized_gaussian(p: GaussianKernelParams, x) -> np.ndarray:
    """Torus heat kernel ``sum_{k in Z^d} G_t(x + k)``.

    The cube sum over ``|k_i| <= K`` factorizes into 1-D sums because ``G_t``
    is a product of 1-D Gaussians.
    """
    x = _points(x, p.d)
    out = np.ones(x.shape[:-1])
    for i in range(p.d):
        out = out * theta(p.t, x[..., i])
    return out


def periodized_gaussian_grad(t: float, x: np.ndarray) -> np.ndarray:
    """Gradient of the 3-D (or d-D) torus heat kernel at ``x`` (shape ``(..., d)``)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    th = np.stack([theta(t, x[..., i]) for i in range(d)], axis=-1)
    mo = np.stack([theta_moment(t, x[..., i]) for i in range(d)], axis=-1)
    out = np.empty_like(x)
    for i in range(d):
        others = np.prod(np.delete(th, i, axis=-1), axis=-1)
        out[..., i] = -mo[..., i] / t * others
    return out


def parabolic_norm(times: Sequence[float], values: Sequence[np.ndarray], tau: float, T: float) -> float:
    """``sup sqrt(t - tau) |f(x, t)|`` over stored samples with ``tau <= t <= T``.

    ``values[i]`` holds the pointwise magnitude ``|f(., times[i])|`` (any shape).
    """
    if not tau < T:
        raise ValueError("parabolic norm needs tau < T")
    if len(times) == 0:
        raise ValueError("empty series")
    if len(times) != len(values):
        raise ValueError("times and values differ in length")
    best = 0.0
    seen = False
    eps = 1e-12 * max(1.0, abs(T))
    for t, v in zip(times, values):
        if t < tau - eps or t > T + eps:
            continue
        seen = True
        best = max(best, math.sqrt(max(t - tau, 0.0)) * float(np.max(np.abs(v))))
    if not seen:
        raise ValueError("no samples inside [tau, T]")
    return best
