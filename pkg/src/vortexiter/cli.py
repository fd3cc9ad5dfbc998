"""Command-line entry point: ``vortexiter {iterate,kernel,verify,fields}``.

Parameters come from built-in defaults, then an optional flat ``key=value``
config file (``#`` starts a comment), then command-line flags.  Every run
writes ``OUT/manifest`` in the same ``key=value`` format, so
``vortexiter CMD --config OUT/manifest`` repeats the run exactly.

Exit codes: 0 success (a non-converged iteration is still a success),
1 numerical failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .bounds import (
    BoundCheckReport,
    I_closed_form,
    I_mc,
    check_gaussian_inequalities,
    check_integrated_bound,
    constants_monotone,
    kernel_samples_from_pde,
    standard_sweep,
    verify_gradient_envelope,
    verify_kernel_envelope,
    verify_vorticity_bounds,
    write_reports,
)
from .drifts import TaylorGreenDrift, make_drift
from .fields import FieldError, GridSpec, PeriodicVectorField, curl, divergence
from .gaussian import GaussianKernelParams, periodized_gaussian
from .iteration import IterationConfig, PhysicalProblem, picard_iterate
from .snapshot import read_field, write_field
from .stochastic import PathError, SdeConfig, bismut_gradient, kernel_mc, write_estimates
from .stochastic.estimators import grid_density_evaluator
from .vorticity import CFLError, DriftHistory, SolveConfig, SolverAbort, kernel_pde, solve_linearized_vorticity

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- typed parameters ---------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _horizon(text: str) -> float | None:
    if text.strip().lower() == "auto":
        return None
    value = float(text)
    if not value > 0:
        raise ValueError("T must be positive or 'auto'")
    return value


def _point(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)


def _points(text: str) -> list[tuple[float, float, float]]:
    text = text.strip()
    return [_point(p) for p in text.split(";") if p.strip()] if text else []


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _render(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, list):
        if value and isinstance(value[0], tuple):
            return ";".join(_render(v) for v in value)
        return ",".join(repr(float(v)) for v in value)
    return str(value)


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: str
    help: str


SCHEMAS: dict[str, dict[str, Param]] = {
    "iterate": {
        "preset": Param(str, "taylor-green", "initial velocity: taylor-green, zero or file"),
        "amplitude": Param(float, "0.1", "Taylor-Green amplitude"),
        "u0_file": Param(str, "", "VF3D initial velocity for preset=file"),
        "n": Param(int, "32", "grid points per axis"),
        "dt": Param(float, "0.001", "physical time step"),
        "T": Param(_horizon, "auto", "physical horizon, or auto for the estimated T0"),
        "nu": Param(float, "0.5", "viscosity"),
        "L": Param(float, "1.0", "box period"),
        "C1": Param(float, "1.0", "constant in the T0 estimate"),
        "tol": Param(float, "1e-8", "relative sup-norm convergence tolerance"),
        "max_iter": Param(_positive_int, "50", "iteration cap"),
        "dealias": Param(_bool, "true", "apply the 2/3 rule"),
        "residual": Param(_bool, "true", "compute the momentum residual"),
    },
    "kernel": {
        "drift": Param(str, "zero", "zero, const, shear, taylor-green or file"),
        "amplitude": Param(float, "1.0", "drift amplitude"),
        "drift_file": Param(str, "", "VF3D frozen drift for drift=file"),
        "method": Param(str, "mc", "mc, pde, both or bismut"),
        "n": Param(int, "32", "PDE grid points per axis"),
        "dt": Param(float, "0.001", "PDE time step"),
        "sde_dt": Param(float, "0.001", "Euler-Maruyama step"),
        "t": Param(float, "0.1", "elapsed time t - tau"),
        "xi": Param(_point, "0.5,0.5,0.5", "source point"),
        "targets": Param(_points, "", "semicolon-separated target points (default: five probes near xi)"),
        "n_paths": Param(_positive_int, "100000", "Monte Carlo paths"),
        "seed": Param(_seed, "0", "64-bit seed"),
        "rtol": Param(float, "0.05", "relative tolerance in the pass column"),
    },
    "verify": {
        "sweep": Param(str, "gaussian", "gaussian, integrals, integrated, envelopes or all"),
        "mc_samples": Param(_positive_int, "1000000", "samples per point of the integrals sweep"),
        "seed": Param(_seed, "0", "64-bit seed"),
        "alpha": Param(float, "1.0", "alpha for the integrated bound"),
        "beta": Param(float, "2.0", "beta for the integrated bound"),
        "d": Param(_positive_int, "1", "dimension for the integrated bound"),
        "drift": Param(str, "shear", "drift preset for the envelope sweep"),
        "amplitude": Param(float, "1.0", "drift amplitude for the envelope sweep"),
        "n": Param(int, "32", "grid points per axis for the envelope sweep"),
        "dt": Param(float, "0.001", "time step for the envelope sweep"),
        "t": Param(float, "0.1", "horizon for the envelope sweep"),
        "betas": Param(_floats, "1.5,2,4", "envelope inflation factors"),
        "closure_threshold": Param(float, "2.0", "ratio threshold of the norm closure"),
    },
    "fields": {
        "action": Param(str, "inspect", "inspect or convert"),
        "input": Param(str, "", "VF3D file"),
    },
}

SWEEPS = ("gaussian", "integrals", "integrated", "envelopes", "all")
KERNEL_METHODS = ("mc", "pde", "both", "bismut")
DEFAULT_OFFSETS = ((0.0, 0.0, 0.0), (0.0625, 0.0625, 0.0), (-0.0625, 0.0, 0.0625), (0.0, -0.0625, -0.0625), (0.125, 0.0, 0.0))


def read_config(path: Path, command: str) -> dict[str, str]:
    """Parse a flat ``key=value`` file; raises :class:`ConfigError` with the line number."""
    schema = SCHEMAS[command]
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "version":
            continue
        if key == "command":
            if value != command:
                raise ConfigError(f"{path}:{lineno}: config is for command {value!r}, not {command!r}")
            continue
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for {command}")
        out[key] = (value, f"{path}:{lineno}")
    return out


def resolve(command: str, file_values: dict, flag_values: dict) -> dict[str, Any]:
    schema = SCHEMAS[command]
    resolved = {}
    for key, param in schema.items():
        text, origin = param.default, "default"
        if key in file_values:
            text, origin = file_values[key]
        if flag_values.get(key) is not None:
            text, origin = flag_values[key], f"--{key.replace('_', '-')}"
        try:
            resolved[key] = param.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{origin}: bad value for {key!r}: {exc}") from None
    return resolved


def write_manifest(out: Path, command: str, cfg: dict[str, Any], threads: int) -> None:
    lines = [
        "# vortexiter run manifest; rerun with: vortexiter " + command + " --config <this file>",
        f"# worker threads used: {threads} (results do not depend on it)",
        f"command={command}",
        f"version={__version__}",
    ]
    lines += [f"{k}={_render(v)}" for k, v in cfg.items()]
    (out / "manifest").write_text("\n".join(lines) + "\n")


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise ConfigError("--threads must be >= 1")
        return flag
    env = os.environ.get("VORTEXITER_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"VORTEXITER_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError("VORTEXITER_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


# --- commands -----------------------------------------------------------------


def _require_grid(n: int) -> GridSpec:
    try:
        return GridSpec(n)
    except FieldError as exc:
        raise ConfigError(str(exc)) from None


def _read_vf3d(path: str, what: str) -> PeriodicVectorField:
    if not path:
        raise ConfigError(f"{what} is required")
    if not Path(path).is_file():
        raise ConfigError(f"{what}: no such file {path!r}")
    try:
        return read_field(path)
    except FieldError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def cmd_iterate(cfg: dict, out: Path) -> int:
    grid = _require_grid(cfg["n"])
    preset = cfg["preset"]
    if preset == "taylor-green":
        u0 = TaylorGreenDrift(cfg["amplitude"]).on_grid(grid)
    elif preset == "zero":
        u0 = PeriodicVectorField.zeros(grid)
    elif preset == "file":
        u0 = _read_vf3d(cfg["u0_file"], "u0_file")
        if u0.components != 3:
            raise ConfigError("u0_file must hold a 3-component field")
        grid = u0.grid
    else:
        raise ConfigError(f"unknown preset {preset!r}; choose taylor-green, zero or file")
    try:
        problem = PhysicalProblem(cfg["nu"], cfg["L"], u0)
        icfg = IterationConfig(dt=cfg["dt"], T=cfg["T"], tol=cfg["tol"], max_iter=cfg["max_iter"], C1=cfg["C1"],
                               dealias=cfg["dealias"], compute_residual=cfg["residual"])
    except (ValueError, FieldError) as exc:
        raise ConfigError(str(exc)) from None

    def log(it, delta, sup_u, res):
        print(f"iteration {it}: delta={delta:.3e} sup_u={sup_u:.3e} residual={res:.3e}")

    try:
        report = picard_iterate(problem, icfg, log=log)
    except CFLError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report.write_log(out / "iteration_log.csv")
    report.write_diagnostics(out / "diagnostics.csv")
    tm = report.time_map
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("key", "value"))
        w.writerow(("converged", "true" if report.converged else "false"))
        w.writerow(("iterations", report.iterations))
        w.writerow(("T_physical", repr(float(tm.to_physical(report.T)))))
        w.writerow(("T_scaled", repr(float(report.T))))
        w.writerow(("final_delta", repr(report.deltas[-1])))
        w.writerow(("final_residual", repr(report.residuals[-1])))
    last = len(report.times) - 1
    u_phys = report.u[last] / tm.velocity_factor
    write_field(PeriodicVectorField(report.grid, u_phys, float(tm.to_physical(report.times[last]))), out / "u_final.vf3d")
    write_field(PeriodicVectorField(report.grid, report.w[last], float(report.times[last])), out / "w_final_scaled.vf3d")
    print(f"converged={'true' if report.converged else 'false'} after {report.iterations} iterations")
    return EXIT_OK


def _kernel_drift(cfg: dict, grid: GridSpec, t_end: float):
    """Return ``(point_drift, history)``; the history is on ``grid``."""
    name = cfg["drift"]
    if name == "file":
        field = _read_vf3d(cfg["drift_file"], "drift_file")
        if field.components != 3:
            raise ConfigError("drift_file must hold a 3-component field")
        hist = DriftHistory.frozen(field, t_end)
        return hist, hist
    try:
        drift = make_drift(name, cfg["amplitude"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return drift, drift.history(grid, t_end)


def _analytic_reference(cfg: dict, drift, xi: np.ndarray, targets: np.ndarray, t: float):
    name = cfg["drift"]
    if name == "zero":
        centre = xi
    elif name == "const":
        centre = xi + t * drift.velocity(xi[None], 0.0)[0]
    else:
        return None
    disp = np.mod(targets - centre + 0.5, 1.0) - 0.5
    return periodized_gaussian(GaussianKernelParams(t, 3), disp)


def cmd_kernel(cfg: dict, out: Path) -> int:
    method = cfg["method"]
    if method not in KERNEL_METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(KERNEL_METHODS)}")
    t = cfg["t"]
    if not t > 0:
        raise ConfigError("t must be positive")
    xi = np.array(cfg["xi"])
    targets = np.array(cfg["targets"])
    if cfg["drift"] == "file":
        grid = _read_vf3d(cfg["drift_file"], "drift_file").grid
    else:
        grid = _require_grid(cfg["n"])
    drift, hist = _kernel_drift(cfg, grid, t)
    try:
        sde = SdeConfig(cfg["sde_dt"], cfg["n_paths"], cfg["seed"])
        sde.steps(t)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    pde = None
    if method in ("pde", "both") or (method == "bismut" and cfg["drift"] != "zero"):
        try:
            pde = kernel_pde(xi, hist, t, SolveConfig(dt=cfg["dt"], t_end=t), align_clock=True)
        except ValueError as exc:  # CFL violation or t inside the mollification age
            raise ConfigError(str(exc)) from None

    if method == "bismut":
        return _kernel_bismut(cfg, drift, pde, xi, targets, t, sde, out)

    rows = []
    mc = None
    if method in ("mc", "both"):
        mc = kernel_mc(0.0, xi, t, targets, drift, sde)
        write_estimates(out / "kernel_estimates.csv", [mc])
    pde_vals = pde.evaluate(t, targets) if pde is not None else None
    ref = _analytic_reference(cfg, drift, xi, targets, t)
    all_pass = True
    for i, y in enumerate(targets):
        row = {"target_x": y[0], "target_y": y[1], "target_z": y[2], "t": t}
        if mc is not None:
            row["mc"] = float(np.atleast_1d(mc.value)[i])
            row["mc_std_err"] = float(np.atleast_1d(mc.std_error)[i])
        if pde_vals is not None:
            row["pde"] = float(pde_vals[i])
        reference = ref[i] if ref is not None else (row.get("pde") if mc is not None else None)
        if reference is not None and mc is not None:
            err = abs(row["mc"] - reference)
            ok = err <= max(3 * row["mc_std_err"], cfg["rtol"] * abs(reference), 1e-12 * abs(reference))
            row.update(reference=float(reference), reference_kind="analytic" if ref is not None else "pde",
                       rel_err=err / abs(reference), pass_="true" if ok else "false")
            all_pass &= ok
        rows.append(row)
    cols = ["target_x", "target_y", "target_z", "t", "mc", "mc_std_err", "pde", "reference", "reference_kind", "rel_err", "pass"]
    with open(out / ("kernel_compare.csv" if method == "both" else "kernel_report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            row["pass"] = row.pop("pass_", "")
            w.writerow([_cell(row.get(c, "")) for c in cols])
    if mc is not None and mc.flagged:
        print(f"warning: {mc.flagged} paths hit the weight cap")
    print("kernel: " + ("pass" if all_pass else "mismatch"))
    return EXIT_OK


def _cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _kernel_bismut(cfg, drift, pde, xi, targets, t, sde, out: Path) -> int:
    eps = 0.5 * t
    ests = []
    for y in targets:
        if pde is None:
            est = bismut_gradient(0.0, xi, t, y, drift, sde)
        else:
            dens_eps = grid_density_evaluator(pde.at(eps))
            dens_x = float(pde.evaluate(t, y)[0])
            est = bismut_gradient(0.0, xi, t, y, drift, sde, density_eps=dens_eps, density_x=dens_x)
        ests.append(est)
    write_estimates(out / "bismut_estimates.csv", ests)
    print(f"bismut: {len(ests)} targets written")
    return EXIT_OK


def _integrals_table(cfg: dict, out: Path) -> list[BoundCheckReport]:
    reports = []
    with open(out / "integrals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("alpha", "beta", "d", "closed_form", "mc", "std_err", "rel_err", "pass"))
        for k, p in enumerate(standard_sweep()):
            cf = I_closed_form(p)
            mc, se = I_mc(p, cfg["mc_samples"], seed=int(np.random.SeedSequence(cfg["seed"], spawn_key=(k,)).generate_state(1)[0]))
            ok = abs(mc - cf) <= max(3 * se, 0.01 * abs(cf))
            w.writerow((p.alpha, p.beta, p.d, repr(cf), repr(mc), repr(se), repr(abs(mc - cf) / cf), "true" if ok else "false"))
            reports.append(BoundCheckReport("moment-integral-closed-form", p.as_dict(), abs(mc - cf) / max(3 * se, 0.01 * abs(cf)),
                                            passed=ok, n_samples=cfg["mc_samples"]))
    return reports


def _envelope_sweep(cfg: dict) -> tuple[list[BoundCheckReport], list[BoundCheckReport]]:
    """Returns ``(envelope reports, monotonicity reports)``."""
    grid = _require_grid(cfg["n"])
    try:
        drift = make_drift(cfg["drift"], cfg["amplitude"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    t = cfg["t"]
    hist = drift.history(grid, t)
    try:
        scfg = SolveConfig(dt=cfg["dt"], t_end=t, store_stride=max(1, round(0.01 / cfg["dt"])))
        scfg.n_steps  # validates that dt divides t
    except (ValueError, FieldError) as exc:
        raise ConfigError(str(exc)) from None
    xi = np.array([0.5, 0.5, 0.5])
    try:
        ktraj = kernel_pde(xi, hist, t, SolveConfig(dt=cfg["dt"], t_end=t), align_clock=True)
    except ValueError as exc:  # CFL violation or t inside the mollification age
        raise ConfigError(str(exc)) from None
    # the aligned kernel starts already aged by its mollification time
    probe_times = [t * k / 5 for k in range(1, 6) if t * k / 5 >= ktraj.times[0]]
    if len(probe_times) < 2:
        raise ConfigError(f"t={t:g} is too short for n={cfg['n']}: kernel snapshots start at t={ktraj.times[0]:g}")
    samples = kernel_samples_from_pde(ktraj, probe_times, stride=2)
    omega0 = PeriodicVectorField(grid, curl(TaylorGreenDrift(1.0).on_grid(grid)).data)
    vtraj = solve_linearized_vorticity(omega0, hist, scfg)
    reports, by_id = [], {}
    for beta in cfg["betas"]:
        batch = [verify_kernel_envelope(samples, drift.sup_norm(), beta), verify_gradient_envelope(samples, drift, beta)]
        batch += verify_vorticity_bounds(vtraj, drift, beta, cfg["closure_threshold"])
        for r in batch:
            r.params["drift"] = cfg["drift"]
            reports.append(r)
            by_id.setdefault(r.inequality_id, []).append(r.C1_fit)
    mono = []
    for ident, c1s in by_id.items():
        if ident == "norm-closure":
            continue
        ok = constants_monotone(c1s) and all(math.isfinite(c) for c in c1s)
        mono.append(BoundCheckReport(ident + "-beta-monotone", {"betas": list(cfg["betas"]), "C1": c1s}, float("nan"), passed=ok, n_samples=len(c1s)))
    return reports, mono


def cmd_verify(cfg: dict, out: Path) -> int:
    sweep = cfg["sweep"]
    if sweep not in SWEEPS:
        raise ConfigError(f"unknown sweep {sweep!r}; choose from {', '.join(SWEEPS)}")
    reports: list[BoundCheckReport] = []
    if sweep in ("gaussian", "all"):
        reports += check_gaussian_inequalities()
    if sweep in ("integrals", "all"):
        reports += _integrals_table(cfg, out)
    if sweep in ("integrated", "all"):
        x = (0.0,) * cfg["d"]
        y = (0.2,) + (0.0,) * (cfg["d"] - 1)
        try:
            reports.append(check_integrated_bound(cfg["alpha"], cfg["beta"], 0.0, 0.1, x, y))
            reports.append(check_integrated_bound(cfg["alpha"], cfg["beta"], 0.0, 0.1, x, x))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if sweep in ("envelopes", "all"):
        env, mono = _envelope_sweep(cfg)
        reports += env + mono
    write_reports(out / "verify_report.csv", reports)
    failed = [r for r in reports if not r.passed]
    for r in reports:
        print(f"{'pass' if r.passed else 'FAIL'} {r.inequality_id} max_ratio={r.max_ratio:.4g}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_fields(cfg: dict, out: Path | None) -> int:
    action = cfg["action"]
    if action not in ("inspect", "convert"):
        raise ConfigError(f"unknown fields action {action!r}; choose inspect or convert")
    f = _read_vf3d(cfg["input"], "input")
    n = f.grid.n
    if action == "inspect":
        print(f"n={n} components={f.components} time={f.time!r}")
        print(f"sup_norm={f.sup_norm()!r}")
        print("mean=" + ",".join(repr(float(m)) for m in f.data.mean(axis=(1, 2, 3))))
        if f.components == 3:
            print(f"max_abs_divergence={float(np.abs(divergence(f).data).max())!r}")
        return EXIT_OK
    target = out / (Path(cfg["input"]).stem + ".csv")
    X = np.stack(f.grid.mesh(), axis=-1).reshape(-1, 3)
    vals = f.data.reshape(f.components, -1).T
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"] + [f"c{i}" for i in range(f.components)])
        for p, v in zip(X, vals):
            w.writerow([repr(float(a)) for a in p] + [repr(float(a)) for a in v])
    print(f"wrote {target}")
    return EXIT_OK


COMMANDS = {"iterate": cmd_iterate, "kernel": cmd_kernel, "verify": cmd_verify, "fields": cmd_fields}


# --- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vortexiter", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        if name == "fields":
            p.add_argument("action_pos", nargs="?", metavar="ACTION", choices=("inspect", "convert"))
            p.add_argument("input_pos", nargs="?", metavar="FILE")
        p.add_argument("--config", type=Path, help="flat key=value config file")
        p.add_argument("--out", type=Path, help="output directory" + ("" if name == "fields" else " (default: runs/<command>)"))
        p.add_argument("--threads", type=int, help="worker cap (default: $VORTEXITER_THREADS or all cores)")
        for key, param in schema.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE",
                           help=f"{param.help} [default: {param.default or 'none'}]")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.command
    flags = {k: getattr(args, k) for k in SCHEMAS[command]}
    if command == "fields":
        flags["action"] = flags["action"] or args.action_pos
        flags["input"] = flags["input"] or args.input_pos
    try:
        threads = resolve_threads(args.threads)
        file_values = read_config(args.config, command) if args.config else {}
        cfg = resolve(command, file_values, flags)
        if command == "kernel" and not cfg["targets"]:
            cfg["targets"] = [tuple(float(c) for c in np.mod(np.add(cfg["xi"], off), 1.0)) for off in DEFAULT_OFFSETS]
        out = args.out
        if command == "fields":
            if cfg["action"] == "convert" and out is None:
                raise ConfigError("fields convert needs --out DIR")
        elif out is None:
            out = Path("runs") / command
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            write_manifest(out, command, cfg, threads)
        return COMMANDS[command](cfg, out)
    except ConfigError as exc:
        print(f"vortexiter {command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverAbort, PathError, FloatingPointError) as exc:
        print(f"vortexiter {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
