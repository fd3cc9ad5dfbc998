from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from vortexiter.fields import (
    FieldError,
    GridSpec,
    PeriodicVectorField,
    SpectralField,
    TensorField,
    curl,
    divergence,
    from_spectral,
    gradient,
    laplacian,
    mean,
    to_spectral,
    total_derivative,
    trilinear,
)
from vortexiter.gaussian import (
    GaussianKernelParams,
    gaussian,
    gaussian_kernel,
    parabolic_norm,
    periodized_gaussian,
)
from vortexiter.snapshot import SnapshotError, read_field, write_field

TWO_PI = 2 * np.pi


def taylor_green(grid: GridSpec, amplitude: float = 1.0) -> PeriodicVectorField:
    def fn(x, y, z):
        return (
            amplitude * np.sin(TWO_PI * x) * np.cos(TWO_PI * y) * np.cos(TWO_PI * z),
            -amplitude * np.cos(TWO_PI * x) * np.sin(TWO_PI * y) * np.cos(TWO_PI * z),
            0.0,
        )

    return PeriodicVectorField.from_function(grid, fn)


def random_field(grid: GridSpec, seed: int, components: int = 3) -> PeriodicVectorField:
    r = np.random.default_rng(seed)
    return PeriodicVectorField(grid, r.standard_normal((components,) + (grid.n,) * 3))


class TestGridSpec:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(FieldError):
            GridSpec(48)

    def test_rejects_tiny(self):
        with pytest.raises(FieldError):
            GridSpec(2)

    def test_mesh_spacing(self):
        g = GridSpec(8)
        x, _, _ = g.mesh()
        assert x.shape == (8, 8, 8)
        assert g.spacing == pytest.approx(1 / 8)
        assert x[1, 0, 0] - x[0, 0, 0] == pytest.approx(1 / 8)


class TestFieldConstruction:
    def test_non_finite_rejected(self):
        g = GridSpec(4)
        data = np.zeros((3, 4, 4, 4))
        data[0, 1, 2, 3] = np.nan
        with pytest.raises(FieldError):
            PeriodicVectorField(g, data)

    def test_wrong_shape_rejected(self):
        with pytest.raises(FieldError):
            PeriodicVectorField(GridSpec(4), np.zeros((3, 4, 4, 8)))

    def test_data_is_read_only(self):
        f = PeriodicVectorField.zeros(GridSpec(4))
        with pytest.raises(ValueError):
            f.data[0, 0, 0, 0] = 1.0

    def test_mismatched_sum_rejected(self):
        with pytest.raises(FieldError):
            PeriodicVectorField.zeros(GridSpec(4)) + PeriodicVectorField.zeros(GridSpec(8))


class TestSpectral:
    @pytest.mark.parametrize("n", [8, 16, 32])
    def test_round_trip(self, n):
        f = random_field(GridSpec(n), seed=n)
        back = from_spectral(to_spectral(f))
        rel = np.abs(back.data - f.data).max() / np.abs(f.data).max()
        assert rel <= 1e-13

    def test_constant_field(self):
        g = GridSpec(8)
        c = np.array([1.5, -2.0, 0.25])
        f = PeriodicVectorField(g, np.broadcast_to(c[:, None, None, None], (3, 8, 8, 8)).copy())
        F = to_spectral(f)
        for comp in range(3):
            assert F.coefficient((0, 0, 0), comp) == pytest.approx(c[comp], abs=1e-15)
        others = np.abs(F.coeffs).copy()
        others[:, 0, 0, 0] = 0.0
        assert others.max() < 1e-15

    def test_single_sine_mode(self):
        g = GridSpec(16)
        f = PeriodicVectorField.from_function(g, lambda x, y, z: np.sin(TWO_PI * x)[None])
        F = to_spectral(f)
        assert F.coefficient((1, 0, 0)) == pytest.approx(1 / 2j, abs=1e-15)
        assert F.coefficient((-1, 0, 0)) == pytest.approx(-1 / 2j, abs=1e-15)
        assert abs(F.coefficient((2, 0, 0))) < 1e-15

    def test_hermitian_symmetry(self):
        F = to_spectral(random_field(GridSpec(8), seed=3))
        for k in [(1, 2, 3), (-3, 1, 2), (4, -2, 1), (2, 3, 0)]:
            minus = tuple(-v if v != 4 else 4 for v in k)
            assert F.coefficient(minus, 1) == pytest.approx(np.conj(F.coefficient(k, 1)), abs=1e-14)
        assert F.coefficient((0, 0, 0), 2).imag == 0.0

    def test_out_of_range_wavevector(self):
        F = to_spectral(random_field(GridSpec(8), seed=4))
        with pytest.raises(FieldError):
            F.coefficient((-4, 0, 0))

    def test_non_finite_coefficients_rejected(self):
        g = GridSpec(4)
        coeffs = np.zeros((1,) + g.spectral_shape, complex)
        coeffs[0, 0, 0, 0] = np.inf
        with pytest.raises(FieldError):
            from_spectral(SpectralField(g, coeffs))


class TestOperators:
    @pytest.mark.parametrize("n", [16, 32])
    def test_div_curl_vanishes(self, n):
        f = random_field(GridSpec(n), seed=n + 1)
        c = curl(f)
        # round-off is measured against the field the outer operator acts on
        assert np.abs(divergence(c).data).max() <= 1e-12 * np.abs(c.data).max()

    @pytest.mark.parametrize("n", [16, 32])
    def test_curl_grad_vanishes(self, n):
        g = random_field(GridSpec(n), seed=n + 2, components=1)
        grad = gradient(g)
        assert np.abs(curl(grad).data).max() <= 1e-12 * np.abs(grad.data).max()

    def test_taylor_green_vorticity(self):
        grid = GridSpec(16)
        A = 0.7
        w = curl(taylor_green(grid, A))
        x, y, z = grid.mesh()
        s, c = np.sin, np.cos
        expected = np.stack([
            -A * c(TWO_PI * x) * s(TWO_PI * y) * s(TWO_PI * z) * TWO_PI,
            -A * s(TWO_PI * x) * c(TWO_PI * y) * s(TWO_PI * z) * TWO_PI,
            2 * A * s(TWO_PI * x) * s(TWO_PI * y) * c(TWO_PI * z) * TWO_PI,
        ])
        assert np.abs(w.data - expected).max() < 1e-12 * TWO_PI

    def test_taylor_green_solenoidal(self):
        d = divergence(taylor_green(GridSpec(32)))
        assert np.abs(d.data).max() < 1e-12

    def test_curl_of_constant_is_zero(self):
        g = GridSpec(8)
        f = PeriodicVectorField(g, np.ones((3, 8, 8, 8)))
        assert np.all(curl(f).data == 0.0)

    def test_curl_rejects_scalar(self):
        with pytest.raises(FieldError):
            curl(PeriodicVectorField.zeros(GridSpec(4), components=1))

    def test_laplacian_eigenfunction(self):
        g = GridSpec(16)
        f = PeriodicVectorField.from_function(g, lambda x, y, z: np.sin(TWO_PI * x)[None])
        lap = laplacian(f)
        np.testing.assert_allclose(lap.data, -(TWO_PI**2) * f.data, atol=1e-11)

    def test_trace_equals_divergence(self):
        b = random_field(GridSpec(16), seed=9)
        A = total_derivative(b)
        assert isinstance(A, TensorField)
        np.testing.assert_allclose(A.trace().data, divergence(b).data, atol=1e-10)

    def test_gradient_layout(self):
        g = GridSpec(16)
        b = PeriodicVectorField.from_function(g, lambda x, y, z: (np.sin(TWO_PI * y), 0.0 * x, 0.0 * x))
        A = total_derivative(b)
        x, y, z = g.mesh()
        np.testing.assert_allclose(A.data[0, 1], TWO_PI * np.cos(TWO_PI * y), atol=1e-12)
        assert np.abs(A.data[1:]).max() < 1e-12

    def test_mean(self):
        g = GridSpec(16)
        assert np.abs(mean(taylor_green(g))).max() < 1e-15
        c = np.array([0.5, -1.0, 2.0])
        f = PeriodicVectorField(g, np.broadcast_to(c[:, None, None, None], (3, 16, 16, 16)).copy())
        np.testing.assert_allclose(mean(f), c)

    def test_mean_of_curl_is_zero(self):
        f = random_field(GridSpec(8), seed=11)
        assert np.abs(mean(curl(f))).max() < 1e-15

    def test_trilinear_exact_on_nodes_and_linear_between(self):
        g = GridSpec(8)
        f = random_field(g, seed=12, components=1)
        pts = np.array([[2 / 8, 3 / 8, 5 / 8], [1.0 + 1 / 8, 0.0, -1 / 8]])
        vals = trilinear(f.data, pts)
        assert vals[0, 0] == pytest.approx(f.data[0, 2, 3, 5])
        assert vals[1, 0] == pytest.approx(f.data[0, 1, 0, 7])
        mid = trilinear(f.data, np.array([[0.5 / 8, 0.0, 0.0]]))
        assert mid[0, 0] == pytest.approx(0.5 * (f.data[0, 0, 0, 0] + f.data[0, 1, 0, 0]))


class TestGaussian:
    def test_one_dimensional_value(self):
        assert gaussian(1.0, np.array([0.0]), 1) == pytest.approx(0.398942, abs=1e-6)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            gaussian(0.0, np.zeros(3))
        with pytest.raises(ValueError):
            GaussianKernelParams(t=-1.0)

    def test_rejects_beta_below_one(self):
        with pytest.raises(ValueError):
            GaussianKernelParams(t=1.0, beta=0.5)

    def test_integrates_to_one(self):
        p = GaussianKernelParams(t=0.3, d=3)
        one_d = integrate.quad(lambda s: float(gaussian(p.t, np.array([s]), 1)), -np.inf, np.inf, epsabs=1e-14)[0]
        # G_t on R^3 factorizes, so the cube of the 1-D integral is the 3-D integral.
        assert one_d**3 == pytest.approx(1.0, abs=1e-10)
        val = gaussian_kernel(p, np.array([0.1, 0.2, -0.3]))
        assert val == pytest.approx(float(np.prod([gaussian(0.3, np.array([c]), 1) for c in (0.1, 0.2, -0.3)])))

    @pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
    def test_periodized_integrates_to_one(self, t):
        g = GridSpec(32)
        pts = np.stack(g.mesh(), axis=-1)
        vals = periodized_gaussian(GaussianKernelParams(t=t), pts)
        assert vals.mean() == pytest.approx(1.0, abs=1e-10)
        assert vals.min() > 0

    @given(
        t1=st.floats(0.01, 2.0),
        t2=st.floats(0.01, 2.0),
        pts=st.lists(st.floats(-2.0, 2.0), min_size=9, max_size=9),
    )
    def test_product_identity(self, t1, t2, pts):
        x, y, z = (np.array(pts[3 * i : 3 * i + 3]) for i in range(3))
        lhs = gaussian(t1, z - y) * gaussian(t2, z - x)
        s = t1 + t2
        rhs = gaussian(t1 * t2 / s, z - (t1 * x + t2 * y) / s) * gaussian(s, y - x)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


class TestParabolicNorm:
    def test_constant(self):
        times = np.linspace(0, 0.5, 11)
        vals = [np.full((4, 4, 4), 3.0) for _ in times]
        assert parabolic_norm(times, vals, 0.0, 0.5) == pytest.approx(math.sqrt(0.5) * 3.0)

    def test_inverse_root(self):
        times = np.linspace(0.01, 1.0, 50)
        vals = [np.array([1 / math.sqrt(t)]) for t in times]
        assert parabolic_norm(times, vals, 0.0, 1.0) == pytest.approx(1.0)

    def test_brute_force(self, rng):
        times = np.sort(rng.uniform(0, 1, 30))
        vals = [rng.standard_normal((3, 5)) for _ in times]
        tau, T = 0.2, 0.8
        brute = max(
            math.sqrt(t - tau) * abs(v[i, j])
            for t, v in zip(times, vals)
            if tau <= t <= T
            for i in range(3)
            for j in range(5)
        )
        assert parabolic_norm(times, vals, tau, T) == brute

    def test_bound_by_sup(self, rng):
        times = np.linspace(0, 2.0, 21)
        vals = [rng.uniform(-1, 1, 10) for _ in times]
        sup = max(np.abs(v).max() for v in vals)
        assert parabolic_norm(times, vals, 0.0, 2.0) <= math.sqrt(2.0) * sup

    def test_errors(self):
        with pytest.raises(ValueError):
            parabolic_norm([], [], 0.0, 1.0)
        with pytest.raises(ValueError):
            parabolic_norm([0.5], [np.ones(1)], 1.0, 1.0)


class TestSnapshot:
    def test_round_trip_bits(self, tmp_path):
        f = taylor_green(GridSpec(8), 0.3)
        f = PeriodicVectorField(f.grid, f.data, time=0.125)
        path = tmp_path / "tg.vf3d"
        write_field(f, path)
        g = read_field(path)
        assert g.time == 0.125
        assert g.data.tobytes() == f.data.tobytes()

    def test_header_layout(self, tmp_path):
        path = tmp_path / "s.vf3d"
        write_field(PeriodicVectorField.zeros(GridSpec(4), components=1), path)
        raw = path.read_bytes()
        assert raw[:4] == b"VF3D"
        assert len(raw) == 4 + 4 + 4 + 4 + 8 + 64 * 8

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.vf3d"
        write_field(taylor_green(GridSpec(4)), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(SnapshotError, match="expected"):
            read_field(path)
        path.write_bytes(b"VF3D")
        with pytest.raises(SnapshotError, match="truncated"):
            read_field(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.vf3d"
        write_field(taylor_green(GridSpec(4)), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(SnapshotError, match="magic"):
            read_field(path)


class TestProperties:
    @given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
    def test_div_curl_random(self, seed, scale):
        f = random_field(GridSpec(8), seed).scaled(scale)
        assert np.abs(divergence(curl(f)).data).max() <= 1e-12 * np.abs(f.data).max()

    @given(seed=st.integers(0, 2**32 - 1))
    def test_round_trip_random(self, seed):
        f = random_field(GridSpec(8), seed)
        back = from_spectral(to_spectral(f))
        assert np.abs(back.data - f.data).max() <= 1e-13 * np.abs(f.data).max()

    @given(seed=st.integers(0, 2**32 - 1))
    def test_curl_has_no_mean(self, seed):
        assert np.abs(mean(curl(random_field(GridSpec(4), seed)))).max() < 1e-14
