"""Acceptance criteria 1 to 14, each recorded through :mod:`acceptance_registry`.

Every test records its outcome before asserting, so the terminal summary shows
one PASS or FAIL line per criterion even when an assertion fails.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from acceptance_registry import record
from nse_reference import ReferenceNSE
from vortexiter.bounds import (
    I_closed_form,
    I_mc,
    IntegralParams,
    check_gaussian_inequalities,
    constants_monotone,
    kernel_samples_from_pde,
    standard_sweep,
    verify_gradient_envelope,
    verify_kernel_envelope,
    verify_vorticity_bounds,
)
from vortexiter.drifts import ConstantDrift, ShearDrift, TaylorGreenDrift, ZeroDrift
from vortexiter.fields import GridSpec, PeriodicVectorField, curl, divergence, gradient, irfft3, rfft3, spectral_divergence
from vortexiter.gaussian import GaussianKernelParams, gaussian, periodized_gaussian
from vortexiter.iteration import (
    IterationConfig,
    PhysicalProblem,
    estimate_T0,
    existence_diagnostics,
    physical_vorticity_sup,
    picard_iterate,
)
from vortexiter.stochastic import SdeConfig, bismut_gradient, feynman_kac_vorticity, kernel_mc
from vortexiter.stochastic.estimators import grid_density_evaluator
from vortexiter.stochastic.paths import hs_norm, integrate_Q, integrate_Z, q_bound, sample_backward_paths, z_bound
from vortexiter.vorticity import SolveConfig, kernel_pde, reconstruct_velocity, solve_linearized_vorticity

TWO_PI = 2 * np.pi
XI = np.array([0.5, 0.5, 0.5])
BETAS = (1.5, 2.0, 4.0)


def smooth_random(grid: GridSpec, seed: int, kmax: int = 3) -> PeriodicVectorField:
    r = np.random.default_rng(seed)
    x, y, z = grid.mesh()
    data = np.zeros((3,) + x.shape)
    for comp in range(3):
        for _ in range(6):
            k = r.integers(-kmax, kmax + 1, size=3)
            data[comp] += r.standard_normal() * np.cos(TWO_PI * (k[0] * x + k[1] * y + k[2] * z) + r.uniform(0, TWO_PI))
    return PeriodicVectorField(grid, data)


def taylor_green_problem() -> PhysicalProblem:
    return PhysicalProblem(0.5, 1.0, TaylorGreenDrift(0.1).on_grid(GridSpec(32)))


@pytest.fixture(scope="module")
def picard_run():
    start = time.perf_counter()
    report = picard_iterate(taylor_green_problem(), IterationConfig(dt=1e-3, T=0.1))
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def picard_run_half_step():
    return picard_iterate(taylor_green_problem(), IterationConfig(dt=5e-4, T=0.1))


@pytest.fixture(scope="module")
def shear_setup():
    """Shear drift on n = 32 up to T = 0.1: aligned PDE kernel and a vorticity solve."""
    g = GridSpec(32)
    sh = ShearDrift(1.0)
    T = 0.1
    hist = sh.history(g, T)
    kt = kernel_pde(XI, hist, T, SolveConfig(1e-3, T), align_clock=True)
    w0 = curl(TaylorGreenDrift(1.0).on_grid(g))
    vt = solve_linearized_vorticity(w0, hist, SolveConfig(1e-3, T, store_stride=10))
    return g, sh, T, kt, vt


def test_criterion_01_spectral_calculus():
    start = time.perf_counter()
    worst = 0.0
    for n in (16, 32):
        g = GridSpec(n)
        for seed in range(3):
            r = np.random.default_rng(1000 * n + seed)
            f = PeriodicVectorField(g, r.standard_normal((3, n, n, n)))
            c = curl(f)
            worst = max(worst, np.abs(divergence(c).data).max() / np.abs(c.data).max())
            s = PeriodicVectorField(g, r.standard_normal((1, n, n, n)))
            grad = gradient(s)
            worst = max(worst, np.abs(curl(grad).data).max() / np.abs(grad.data).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 10
    record(1, ok, f"max relative residual {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_heat_semigroup_exact():
    g = GridSpec(32)
    t = 0.1
    w0 = curl(smooth_random(g, 2))
    traj = solve_linearized_vorticity(w0, ZeroDrift().history(g, t), SolveConfig(1e-3, t), with_velocity=False)
    exact = irfft3(rfft3(w0.data) * np.exp(-0.5 * g.k2 * t), g.n)
    err = np.abs(traj.w[-1] - exact).max() / np.abs(w0.data).max()
    ok = err <= 1e-12
    record(2, ok, f"relative error {err:.2e} after {len(traj.times) - 1} steps")
    assert ok


def test_criterion_03_structure_preserved():
    g = GridSpec(32)
    w0 = curl(smooth_random(g, 3))
    traj = solve_linearized_vorticity(w0, TaylorGreenDrift(1.0).history(g, 0.1), SolveConfig(1e-3, 0.1), with_velocity=False)
    div_ratio, worst_mean = 0.0, 0.0
    for w in traj.w:
        div = irfft3(spectral_divergence(g, rfft3(w)), g.n)
        div_ratio = max(div_ratio, np.abs(div).max() / np.sqrt((w**2).sum(axis=0)).max())
        worst_mean = max(worst_mean, float(np.linalg.norm(w.mean(axis=(1, 2, 3)))))
    ok = div_ratio <= 1e-10 and worst_mean <= 1e-12
    record(3, ok, f"max|div w|/|w| {div_ratio:.2e}, |mean w| {worst_mean:.2e} over {len(traj.w)} snapshots")
    assert ok


def test_criterion_04_hodge_reconstruction():
    worst = 0.0
    for seed in range(20):
        n = 16 if seed % 2 else 32
        g = GridSpec(n)
        w = curl(PeriodicVectorField(g, np.random.default_rng(seed).standard_normal((3, n, n, n))))
        back = curl(reconstruct_velocity(w))
        worst = max(worst, np.abs(back.data - w.data).max() / np.abs(w.data).max())
    ok = worst <= 1e-10
    record(4, ok, f"max relative error {worst:.2e} on 20 fields")
    assert ok


def test_criterion_05_picard_convergence(picard_run):
    report, elapsed = picard_run
    p = taylor_green_problem()
    T0 = estimate_T0(physical_vorticity_sup(p), p.nu, p.L, 1.0)
    deltas = report.deltas
    monotone = all(b < a for a, b in zip(deltas[1:], deltas[2:]))
    ok = (
        report.converged
        and report.iterations <= 50
        and monotone
        and report.residuals[-1] <= 1e-4
        and 0.1 <= T0
        and elapsed < 600
    )
    record(5, ok, f"{report.iterations} iterations, final delta {deltas[-1]:.1e}, residual {report.residuals[-1]:.1e}, "
                  f"T0 {T0:.3f}, {elapsed:.0f} s")
    assert ok


def test_criterion_06_matches_reference_solver(picard_run):
    report, _ = picard_run
    ref = ReferenceNSE(32).run(report.u[0], 1e-3, 100, store_every=50)
    errs = []
    for j, t in ((1, 0.05), (2, 0.1)):
        k = int(np.argmin(np.abs(report.physical_times - t)))
        assert report.physical_times[k] == pytest.approx(t)
        errs.append(float(np.abs(ref[j] - report.u[k]).max()))
    scale = [float(np.abs(ref[j]).max()) for j in (1, 2)]
    ok = max(errs) <= 1e-4
    record(6, ok, "sup error " + ", ".join(f"{e:.1e} (|u| {s:.1e})" for e, s in zip(errs, scale)) + " at t = 0.05, 0.1")
    assert ok


def test_criterion_07_existence_diagnostics(picard_run, picard_run_half_step):
    a = existence_diagnostics(picard_run[0])
    b = existence_diagnostics(picard_run_half_step)
    change = abs(b["grad_w"] - a["grad_w"]) / a["grad_w"]
    ok = a["sup_w"] <= 2 and b["sup_w"] <= 2 and math.isfinite(a["grad_w"]) and change <= 0.1
    record(7, ok, f"sup w ratio {a['sup_w']:.3f}, grad w ratio {a['grad_w']:.4f} vs {b['grad_w']:.4f} at half step ({change:.1e})")
    assert ok


def test_criterion_08_kernel_mc_zero_and_constant_drift():
    start = time.perf_counter()
    t = 0.1
    y = np.array([[0.55, 0.5, 0.5], [0.6, 0.55, 0.5], [0.45, 0.5, 0.52]])
    zero = kernel_mc(0.0, XI, t, y, ZeroDrift(), SdeConfig(1e-3, 100_000, seed=1))
    exact0 = periodized_gaussian(GaussianKernelParams(t), y - XI)
    zero_ok = np.all(zero.std_error == 0.0) and np.allclose(zero.value, exact0, rtol=1e-14, atol=0)
    c = np.array([1.0, 0.5, 0.0])
    const = kernel_mc(0.0, XI, t, y, ConstantDrift(tuple(c)), SdeConfig(1e-3, 100_000, seed=1), periodic=False)
    exact = gaussian(t, y - XI - c * t)
    z = np.abs(const.value - exact) / const.std_error
    elapsed = time.perf_counter() - start
    ok = bool(zero_ok) and bool(np.all(z <= 3)) and elapsed < 60
    record(8, ok, f"b=0 exact with zero variance: {bool(zero_ok)}; const drift max |z| {z.max():.2f}; {elapsed:.1f} s")
    assert ok


def test_criterion_09_kernel_mc_vs_pde_shear(shear_setup):
    _, sh, T, kt, _ = shear_setup
    probes = np.array([[0.5, 0.5, 0.5], [0.5625, 0.5625, 0.5], [0.4375, 0.5, 0.5625], [0.5, 0.4375, 0.4375], [0.625, 0.5, 0.5]])
    start = time.perf_counter()
    est = kernel_mc(0.0, XI, T, probes, sh, SdeConfig(1e-3, 100_000, seed=2))
    elapsed = time.perf_counter() - start
    ref = kt.evaluate(T, probes)
    rel = np.abs(est.value - ref) / ref
    ok = bool(np.all(np.abs(est.value - ref) <= np.maximum(3 * est.std_error, 0.05 * ref))) and elapsed < 600
    record(9, ok, f"max relative error {rel.max():.2e} at 5 probes, 1e5 paths, {elapsed:.1f} s")
    assert ok


def test_criterion_10_moment_integral():
    worst = 0.0
    ok = True
    for k, p in enumerate(standard_sweep()):
        exact = I_closed_form(p)
        mean, se = I_mc(p, 1_000_000, seed=10 + k)
        tol = max(3 * se, 0.01 * abs(exact))
        worst = max(worst, abs(mean - exact) / tol)
        ok &= abs(mean - exact) <= tol
    collapse = 0.0
    for x, y in (((0.0,), (0.15,)), ((0.0, 0.0, 0.0), (0.1, -0.05, 0.08))):
        p = IntegralParams(0.0, 1.0, 0.0, 0.05, 0.1, x, y)
        ref = float(gaussian(0.1, np.subtract(y, x), len(x)))
        collapse = max(collapse, abs(I_closed_form(p) - ref) / ref)
    ok = ok and collapse <= 1e-14
    record(10, ok, f"worst |MC - closed| / tolerance {worst:.2f} on 12 points; alpha=0, beta=1 collapse {collapse:.1e}")
    assert ok


def test_criterion_11_pathwise_bounds():
    t = 0.1
    lines, ok = [], True
    for drift in (ZeroDrift(), ConstantDrift((1.0, 0.5, 0.0)), ShearDrift(1.0), TaylorGreenDrift(1.0)):
        bun = sample_backward_paths([0.3, 0.2, 0.7], t, drift, SdeConfig(1e-3, 10_000, seed=1))
        gn = drift.grad_parabolic_norm(0.0, t)
        Z = hs_norm(integrate_Z(bun, drift, t))
        Q = hs_norm(integrate_Q(bun, drift, t)[-1]) ** 2
        z_frac = float(np.mean(np.all(Z <= z_bound(bun.times, t, gn, 3.0)[:, None], axis=0)))
        q_frac = float(np.mean(Q <= q_bound(t, gn)))
        ok &= z_frac == 1.0 and q_frac == 1.0
        lines.append(f"{drift.name} {z_frac:.0%}/{q_frac:.0%}")
    record(11, ok, "paths within Z/Q bounds: " + ", ".join(lines))
    assert ok


def test_criterion_12_bismut_zero_drift():
    x = np.array([0.6, 0.45, 0.5])
    T = 0.1
    est = bismut_gradient(0.0, XI, T, x, ZeroDrift(), SdeConfig(1e-3, 100_000, seed=7))
    z = np.abs(est.value + (x - XI) / T) / est.std_error
    ok = bool(np.all(z <= 3))
    record(12, ok, f"b=0 score max |z| {z.max():.2f}")
    assert ok


def test_criterion_12_bismut_shear(shear_setup):
    g, sh, T, kt, _ = shear_setup
    grad = kt.gradient(T)
    pT = kt.at(T)
    density_eps = grid_density_evaluator(kt.at(T / 2))
    worst, ok = 0.0, True
    for idx in ((18, 16, 16), (16, 18, 16), (14, 14, 16), (19, 15, 17), (16, 16, 16)):
        x = np.array(idx) / g.n
        ref = grad[(slice(None),) + idx] / pT[idx]
        est = bismut_gradient(0.0, XI, T, x, sh, SdeConfig(1e-3, 100_000, seed=8), density_eps=density_eps, density_x=float(pT[idx]))
        err = np.abs(est.value - ref)
        tol = np.maximum(3 * est.std_error, 0.07 * np.abs(ref))
        worst = max(worst, float((err / tol).max()))
        ok &= bool(np.all(err <= tol)) and est.flagged == 0
    record(12, ok, f"shear: worst error / tolerance {worst:.2f} at 5 probes")
    assert ok


def test_criterion_13_feynman_kac_vorticity():
    g = GridSpec(32)
    tg = TaylorGreenDrift(0.1)
    t = 0.05
    w0 = curl(tg.on_grid(g))
    ref = solve_linearized_vorticity(w0, tg.history(g, t), SolveConfig(1e-3, t), with_velocity=False).w[-1]
    worst, ok = 0.0, True
    probes = ((8, 8, 0), (8, 8, 4), (4, 8, 12), (12, 4, 4), (8, 24, 2), (20, 12, 6), (2, 6, 10), (16, 8, 28))
    start = time.perf_counter()
    for seed, idx in enumerate(probes):
        x = np.array(idx) / g.n
        r = ref[(slice(None),) + idx]
        est = feynman_kac_vorticity(x, t, tg, tg, SdeConfig(1e-3, 100_000, seed=seed))
        tol = np.maximum(3 * est.std_error, 0.05 * np.abs(r))
        worst = max(worst, float((np.abs(est.value - r) / tol).max()))
        ok &= bool(np.all(np.abs(est.value - r) <= tol))
    record(13, ok, f"worst error / tolerance {worst:.2f} at 8 probes, {time.perf_counter() - start:.0f} s")
    assert ok


def envelope_constants(shear_setup) -> dict[str, list]:
    g, sh, T, kt, vt = shear_setup
    samples = kernel_samples_from_pde(kt, [T * k / 5 for k in range(1, 6)], stride=2)
    by_id: dict[str, list] = {}
    for beta in BETAS:
        reps = [verify_kernel_envelope(samples, sh.sup_norm(), beta), verify_gradient_envelope(samples, sh, beta)]
        for r in reps + verify_vorticity_bounds(vt, sh, beta):
            by_id.setdefault(r.inequality_id, []).append(r)
    return by_id


def test_criterion_14_envelopes_finite_and_lattice(shear_setup):
    lattice = check_gaussian_inequalities()
    pointwise = [r for r in lattice if r.inequality_id != "gaussian-rescaling-identity"]
    lattice_ok = all(r.max_ratio <= 1.0 for r in pointwise) and lattice[0].max_ratio <= 1e-12
    by_id = envelope_constants(shear_setup)
    finite = all(
        math.isfinite(r.C1_fit) and math.isfinite(r.C2_fit)
        for ident, reps in by_id.items()
        if ident != "norm-closure"
        for r in reps
    )
    closure = all(r.passed for r in by_id["norm-closure"])
    ok = lattice_ok and finite and closure
    record(14, ok, f"lattice max ratio {max(r.max_ratio for r in pointwise):.3f}; fitted constants finite: {finite}; closure: {closure}")
    assert ok


def test_criterion_14_monotone_in_beta(shear_setup):
    by_id = envelope_constants(shear_setup)
    ids = ("kernel-envelope", "gradient-envelope", "vorticity-envelope", "velocity-envelope", "velocity-gradient-envelope")
    ok = all(constants_monotone([r.C1_fit for r in by_id[i]]) for i in ids)
    record(14, ok, "C1 monotone in beta for kernel, gradient, vorticity and velocity envelopes: " + str(ok))
    assert ok


@pytest.mark.xfail(strict=True, reason="vorticity-gradient constant is U-shaped in beta; see the decisions ledger")
def test_criterion_14_vorticity_gradient_monotone(shear_setup):
    c1 = [r.C1_fit for r in envelope_constants(shear_setup)["vorticity-gradient-envelope"]]
    ok = constants_monotone(c1)
    record(14, ok, "vorticity-gradient C1 over beta = 1.5, 2, 4: " + ", ".join(f"{c:.4f}" for c in c1))
    assert ok
