"""Analytic divergence-free drifts on the unit torus.

Every drift exposes the same point-evaluation interface as
:class:`~vortexiter.vorticity.DriftHistory`:

* ``velocity(x, t)`` with ``x`` of shape ``(m, 3)`` -> ``(m, 3)``
* ``jacobian(x, t)`` -> ``(m, 3, 3)`` with ``[i, j] = d_j b^i``
* ``sup_norm()`` and ``grad_parabolic_norm(tau, T)``

so the stochastic estimators accept either kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GridSpec, PeriodicVectorField
from .vorticity import DriftHistory

TWO_PI = 2 * np.pi


class AnalyticDrift:
    """Base class for time-independent closed-form drifts."""

    name = "analytic"

    def velocity(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def sup_norm(self) -> float:
        raise NotImplementedError

    def grad_sup(self) -> float:
        """``sup_x |grad b|`` in the Hilbert-Schmidt norm."""
        raise NotImplementedError

    def grad_parabolic_norm(self, tau: float, T: float) -> float:
        return math.sqrt(T - tau) * self.grad_sup()

    def on_grid(self, grid: GridSpec, t: float = 0.0) -> PeriodicVectorField:
        X = np.stack(grid.mesh(), axis=-1).reshape(-1, 3)
        v = self.velocity(X, t).T.reshape(3, grid.n, grid.n, grid.n)
        return PeriodicVectorField(grid, v, t)

    def history(self, grid: GridSpec, t_end: float | None = None) -> DriftHistory:
        return DriftHistory.frozen(self.on_grid(grid), t_end)


@dataclass(frozen=True)
class ZeroDrift(AnalyticDrift):
    name = "zero"

    def velocity(self, x, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jacobian(self, x, t=0.0):
        return np.zeros((len(x), 3, 3))

    def sup_norm(self):
        return 0.0

    def grad_sup(self):
        return 0.0


@dataclass(frozen=True)
class ConstantDrift(AnalyticDrift):
    c: tuple[float, float, float] = (1.0, 0.0, 0.0)
    name = "const"

    def velocity(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.c, dtype=float), x.shape).copy()

    def jacobian(self, x, t=0.0):
        return np.zeros((len(x), 3, 3))

    def sup_norm(self):
        return float(np.linalg.norm(self.c))

    def grad_sup(self):
        return 0.0


@dataclass(frozen=True)
class ShearDrift(AnalyticDrift):
    """``b = (a sin(2 pi x2), 0, 0)``."""

    amplitude: float = 1.0
    name = "shear"

    def velocity(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[:, 0] = self.amplitude * np.sin(TWO_PI * x[:, 1])
        return out

    def jacobian(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros((len(x), 3, 3))
        out[:, 0, 1] = TWO_PI * self.amplitude * np.cos(TWO_PI * x[:, 1])
        return out

    def sup_norm(self):
        return abs(self.amplitude)

    def grad_sup(self):
        return TWO_PI * abs(self.amplitude)


@dataclass(frozen=True)
class TaylorGreenDrift(AnalyticDrift):
    """Frozen Taylor-Green velocity
    ``A (sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0)`` with ``xi -> 2 pi xi``.
    """

    amplitude: float = 1.0
    name = "taylor-green"

    def velocity(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        s = np.sin(TWO_PI * x)
        c = np.cos(TWO_PI * x)
        out = np.zeros_like(x)
        out[:, 0] = self.amplitude * s[:, 0] * c[:, 1] * c[:, 2]
        out[:, 1] = -self.amplitude * c[:, 0] * s[:, 1] * c[:, 2]
        return out

    def jacobian(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        s = np.sin(TWO_PI * x)
        c = np.cos(TWO_PI * x)
        a = TWO_PI * self.amplitude
        J = np.zeros((len(x), 3, 3))
        J[:, 0, 0] = a * c[:, 0] * c[:, 1] * c[:, 2]
        J[:, 0, 1] = -a * s[:, 0] * s[:, 1] * c[:, 2]
        J[:, 0, 2] = -a * s[:, 0] * c[:, 1] * s[:, 2]
        J[:, 1, 0] = a * s[:, 0] * s[:, 1] * c[:, 2]
        J[:, 1, 1] = -a * c[:, 0] * c[:, 1] * c[:, 2]
        J[:, 1, 2] = a * c[:, 0] * s[:, 1] * s[:, 2]
        return J

    def vorticity(self, x, t=0.0):
        """Exact curl of the velocity."""
        x = np.asarray(x, dtype=float)
        s = np.sin(TWO_PI * x)
        c = np.cos(TWO_PI * x)
        a = TWO_PI * self.amplitude
        out = np.empty_like(x)
        out[:, 0] = -a * c[:, 0] * s[:, 1] * s[:, 2]
        out[:, 1] = -a * s[:, 0] * c[:, 1] * s[:, 2]
        out[:, 2] = 2 * a * s[:, 0] * s[:, 1] * c[:, 2]
        return out

    def sup_norm(self):
        return abs(self.amplitude)

    def grad_sup(self):
        # |J|_HS^2 = a^2 (2 c1^2 c2^2 c3^2 + 2 s1^2 s2^2 c3^2 + s1^2 c2^2 s3^2 + c1^2 s2^2 s3^2),
        # maximised at x = 0 where it equals 2 a^2
        return math.sqrt(2.0) * TWO_PI * abs(self.amplitude)


PRESETS = {
    "zero": lambda amplitude=1.0: ZeroDrift(),
    "const": lambda amplitude=1.0: ConstantDrift((amplitude, 0.0, 0.0)),
    "shear": lambda amplitude=1.0: ShearDrift(amplitude),
    "taylor-green": lambda amplitude=1.0: TaylorGreenDrift(amplitude),
}


def make_drift(name: str, amplitude: float = 1.0) -> AnalyticDrift:
    try:
        return PRESETS[name](amplitude)
    except KeyError:
        raise ValueError(f"unknown drift preset {name!r}; choose from {sorted(PRESETS)}") from None
