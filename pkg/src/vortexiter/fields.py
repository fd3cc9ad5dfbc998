"""Periodic fields on the unit torus and exact spectral calculus.

Fields are sampled on a uniform ``n**3`` grid over ``[0, 1)**3``.  All
derivatives are computed spectrally with ``numpy.fft`` real transforms, so
identities such as ``div(curl f) = 0`` hold to round-off.

Array layout is ``(components, n, n, n)`` indexed ``[c, i1, i2, i3]`` with the
third axis fastest, matching the VF3D snapshot format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

PERIOD = 1.0


class FieldError(ValueError):
    """Raised on malformed field input (shape, finiteness, grid mismatch)."""


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise FieldError(f"grid size must be even and >= 4, got {self.n}")
        if self.n & (self.n - 1):
            raise FieldError(f"grid size must be a power of two, got {self.n}")

    @property
    def period(self) -> float:
        return PERIOD

    @property
    def spacing(self) -> float:
        return PERIOD / self.n

    @cached_property
    def coords(self) -> np.ndarray:
        """1-D sample coordinates ``j/n``."""
        return np.arange(self.n) * self.spacing

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.coords, self.coords, self.coords, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavevector components broadcastable to the rfftn layout.

        Nyquist entries are kept (value ``-n/2``) so that Laplacians stay
        exact; first-derivative operators use :attr:`deriv_wavenumbers`.
        """
        n = self.n
        k = np.fft.fftfreq(n, d=1.0 / n)
        kz = np.fft.rfftfreq(n, d=1.0 / n)
        return (k[:, None, None], k[None, :, None], kz[None, None, :])

    @cached_property
    def deriv_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # odd derivatives of the Nyquist mode are not representable as real fields
        out = []
        for kk in self.wavenumbers:
            kk = kk.copy()
            kk[np.abs(kk) == self.n // 2] = 0.0
            out.append(kk)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """``|2 pi k|^2`` on the rfftn layout."""
        kx, ky, kz = self.wavenumbers
        return (2 * np.pi) ** 2 * (kx**2 + ky**2 + kz**2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every ``|k_i| < n/3``."""
        cut = self.n / 3.0
        kx, ky, kz = self.wavenumbers
        return (np.abs(kx) < cut) & (np.abs(ky) < cut) & (np.abs(kz) < cut)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)


def _check_finite(data: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(data)):
        raise FieldError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class PeriodicVectorField:
    """Real samples of a scalar (1 component) or vector (3 components) field."""

    grid: GridSpec
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        n = self.grid.n
        if data.ndim == 3:
            data = data[None]
        if data.shape[1:] != (n, n, n) or data.shape[0] not in (1, 3):
            raise FieldError(f"expected (1|3, {n}, {n}, {n}) samples, got {data.shape}")
        _check_finite(data, "field")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_function(cls, grid: GridSpec, fn, time: float = 0.0) -> "PeriodicVectorField":
        """Sample ``fn(x1, x2, x3)`` (returning a scalar array or a 3-sequence)."""
        out = fn(*grid.mesh())
        if isinstance(out, (list, tuple)):
            out = np.stack([np.broadcast_to(np.asarray(c, float), (grid.n,) * 3) for c in out])
        return cls(grid, np.asarray(out, float), time)

    @classmethod
    def zeros(cls, grid: GridSpec, components: int = 3) -> "PeriodicVectorField":
        return cls(grid, np.zeros((components,) + (grid.n,) * 3))

    def sup_norm(self) -> float:
        """Maximum over the grid of the Euclidean norm across components."""
        return float(np.sqrt((self.data**2).sum(axis=0)).max())

    def __add__(self, other: "PeriodicVectorField") -> "PeriodicVectorField":
        _same_shape(self, other)
        return PeriodicVectorField(self.grid, self.data + other.data, self.time)

    def __sub__(self, other: "PeriodicVectorField") -> "PeriodicVectorField":
        _same_shape(self, other)
        return PeriodicVectorField(self.grid, self.data - other.data, self.time)

    def scaled(self, factor: float) -> "PeriodicVectorField":
        return PeriodicVectorField(self.grid, factor * self.data, self.time)


@dataclass(frozen=True)
class TensorField:
    """Rank-2 field ``data[i, j] = d b^i / d x^j``."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.data.shape != (3, 3, n, n, n):
            raise FieldError(f"tensor field must have shape (3, 3, {n}, {n}, {n})")
        _check_finite(self.data, "tensor field")

    def trace(self) -> PeriodicVectorField:
        return PeriodicVectorField(self.grid, np.einsum("ii...->...", self.data)[None])

    def frobenius(self) -> np.ndarray:
        """Pointwise Hilbert-Schmidt norm, shape ``(n, n, n)``."""
        return np.sqrt((self.data**2).sum(axis=(0, 1)))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients in rfftn layout, normalized so that the constant
    field ``c`` has ``k = 0`` coefficient ``c``.

    Hermitian symmetry ``F(-k) = conj F(k)`` is implicit in the half-spectrum
    storage; :meth:`coefficient` reconstructs any ``k`` in ``(-n/2, n/2]^3``.
    """

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def coefficient(self, k: tuple[int, int, int], component: int = 0) -> complex:
        n = self.grid.n
        k = [int(v) for v in k]
        if any(not (-n // 2 < v <= n // 2) for v in k):
            raise FieldError(f"wavevector {k} outside (-n/2, n/2]^3")
        conj = k[2] < 0
        if conj:
            k = [-v for v in k]
        c = self.coeffs[component, k[0] % n, k[1] % n, k[2]]
        return complex(np.conj(c) if conj else c)


def _same_shape(a, b) -> None:
    if a.grid != b.grid or a.data.shape != b.data.shape:
        raise FieldError("field shapes or grids differ")


def rfft3(data: np.ndarray) -> np.ndarray:
    n = data.shape[-1]
    return np.fft.rfftn(data, axes=(-3, -2, -1)) / n**3


def irfft3(coeffs: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfftn(coeffs * n**3, s=(n, n, n), axes=(-3, -2, -1))


def to_spectral(f: PeriodicVectorField) -> SpectralField:
    _check_finite(f.data, "field")
    return SpectralField(f.grid, rfft3(f.data))


def from_spectral(F: SpectralField, time: float = 0.0) -> PeriodicVectorField:
    if F.coeffs.shape[1:] != F.grid.spectral_shape:
        raise FieldError("spectral coefficient shape does not match grid")
    _check_finite(F.coeffs, "spectral field")
    return PeriodicVectorField(F.grid, irfft3(F.coeffs, F.grid.n), time)


# --- spectral-array kernels (shared with the solvers) -------------------------


def spectral_gradient(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    """``fh`` (..., spectral) -> (..., 3, spectral): ``d/dx_j`` appended last."""
    ks = grid.deriv_wavenumbers
    return np.stack([2j * np.pi * kj * fh for kj in ks], axis=-4)


def spectral_curl(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = (2j * np.pi * k for k in grid.deriv_wavenumbers)
    return np.stack([
        ky * fh[2] - kz * fh[1],
        kz * fh[0] - kx * fh[2],
        kx * fh[1] - ky * fh[0],
    ])


def spectral_divergence(grid: GridSpec, fh: np.ndarray) -> np.ndarray:
    kx, ky, kz = (2j * np.pi * k for k in grid.deriv_wavenumbers)
    return kx * fh[0] + ky * fh[1] + kz * fh[2]


# --- public field operators ---------------------------------------------------


def _require_vector(f: PeriodicVectorField, op: str) -> None:
    if f.components != 3:
        raise FieldError(f"{op} needs a 3-component field, got {f.components}")


def curl(f: PeriodicVectorField) -> PeriodicVectorField:
    _require_vector(f, "curl")
    fh = rfft3(f.data)
    return PeriodicVectorField(f.grid, irfft3(spectral_curl(f.grid, fh), f.grid.n), f.time)


def divergence(f: PeriodicVectorField) -> PeriodicVectorField:
    _require_vector(f, "divergence")
    fh = rfft3(f.data)
    return PeriodicVectorField(f.grid, irfft3(spectral_divergence(f.grid, fh), f.grid.n)[None], f.time)


def gradient(f: PeriodicVectorField) -> PeriodicVectorField | TensorField:
    """Gradient of a scalar (3-vector result) or of a vector (``TensorField``)."""
    fh = rfft3(f.data)
    g = irfft3(spectral_gradient(f.grid, fh), f.grid.n)
    if f.components == 1:
        return PeriodicVectorField(f.grid, g[0], f.time)
    return TensorField(f.grid, g)


def total_derivative(b: PeriodicVectorField) -> TensorField:
    """``A(b)[i, j] = d b^i / d x^j``."""
    _require_vector(b, "total_derivative")
    return gradient(b)


def laplacian(f: PeriodicVectorField) -> PeriodicVectorField:
    fh = rfft3(f.data)
    return PeriodicVectorField(f.grid, irfft3(-f.grid.k2 * fh, f.grid.n), f.time)


def mean(f: PeriodicVectorField) -> np.ndarray:
    """Grid average per component (the ``k = 0`` coefficient)."""
    return f.data.mean(axis=(1, 2, 3))


def apply_tensor(A: TensorField, f: PeriodicVectorField) -> PeriodicVectorField:
    """Pointwise matrix-vector product ``(A f)^i = A[i, j] f^j``."""
    _require_vector(f, "apply_tensor")
    return PeriodicVectorField(f.grid, np.einsum("ij...,j...->i...", A.data, f.data), f.time)


def advect(b: PeriodicVectorField, f: PeriodicVectorField) -> PeriodicVectorField:
    """``(b . grad) f`` evaluated pseudo-spectrally (no dealiasing)."""
    _require_vector(b, "advect")
    g = irfft3(spectral_gradient(f.grid, rfft3(f.data)), f.grid.n)
    return PeriodicVectorField(f.grid, np.einsum("j...,ij...->i...", b.data, g), f.time)


def grad_norm(f: PeriodicVectorField) -> np.ndarray:
    """Pointwise Hilbert-Schmidt norm of the spatial gradient, shape ``(n, n, n)``."""
    g = irfft3(spectral_gradient(f.grid, rfft3(f.data)), f.grid.n)
    return np.sqrt((g**2).sum(axis=(0, 1)))


def trilinear(data: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Periodic trilinear interpolation of grid samples at arbitrary points.

    ``data`` has shape ``(..., n, n, n)``; ``points`` has shape ``(m, 3)``.
    Returns shape ``(m, ...)``.
    """
    n = data.shape[-1]
    lead = data.shape[:-3]
    flat = data.reshape(lead + (n**3,))
    s = np.asarray(points, dtype=float) * n
    base = np.floor(s)
    frac = s - base
    i0 = base.astype(np.int64) % n
    i1 = (i0 + 1) % n
    out = 0.0
    for cx in (0, 1):
        ix = i1[:, 0] if cx else i0[:, 0]
        wx = frac[:, 0] if cx else 1.0 - frac[:, 0]
        for cy in (0, 1):
            iy = i1[:, 1] if cy else i0[:, 1]
            wy = frac[:, 1] if cy else 1.0 - frac[:, 1]
            for cz in (0, 1):
                iz = i1[:, 2] if cz else i0[:, 2]
                wz = frac[:, 2] if cz else 1.0 - frac[:, 2]
                idx = (ix * n + iy) * n + iz
                out = out + flat[..., idx] * (wx * wy * wz)
    return np.moveaxis(np.asarray(out), -1, 0)
