"""Command-line front end: config ingestion, experiment orchestration,
CSV persistence and plot-data emission.

Exit codes: 0 success, 1 configuration/validation failure, 2 numerical
failure (divergence or accuracy), 3 selftest failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bounds import lower_bound_kernel, upper_bound_kernel
from .config import (
    ConfigError,
    apply_overrides,
    build_potentials,
    dx_grid,
    effective_seed,
    load_config,
    p_grid,
    potential_spec_of,
    tau_grid,
    validate_config,
)
from .errors import (
    AccuracyError,
    DegenerateOperatorError,
    DivergentIntegralError,
    DomainError,
    SingularityError,
)
from .green import (
    LOWER,
    MC,
    UPPER,
    fit_scaling_exponent,
    green_momentum,
    kernel_sandwich_check,
    omega,
)
from .kernel import (
    FIXED_ENDPOINT,
    INTEGRATED_ENDPOINT,
    fk_kernel_momentum,
    second_moment,
)
from .position import gu_momentum_bessel, gu_position, large_distance_decay

SUBCOMMANDS = (
    "kernel",
    "bounds",
    "green",
    "scaling",
    "moments",
    "position",
    "metric",
    "selftest",
)

CSV_COLUMNS = (
    "experiment_id",
    "op",
    "inputs_json",
    "value",
    "error",
    "method",
    "seed",
    "n_paths",
    "n_steps",
    "timestamp",
)


class _Runner:
    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out_dir = out_dir
        self.prefix = cfg["output"].get("prefix", "fkgreen")
        self.seed = effective_seed(cfg)
        self.form, self.w, self.meta = build_potentials(cfg)
        mc = cfg["mc"]
        self.n_paths = mc.get("n_paths", 100_000)
        self.n_steps = mc.get("n_steps", 256)
        self.dirichlet = mc.get("dirichlet", False)
        self.antithetic = mc.get("antithetic", False)
        self.rel_tol = cfg["quadrature"].get("rel_tol", 1e-6)
        grids = cfg["grids"]
        self.eta = grids.get("eta", 0.0)
        self.etap = grids.get("etap", 0.0)
        self.rows = []
        self.timestamp = datetime.now(timezone.utc).isoformat()
        os.makedirs(out_dir, exist_ok=True)

    def add_row(self, op, inputs, value, error, method, n_paths=0, n_steps=0):
        self.rows.append(
            {
                "experiment_id": f"{self.prefix}-{len(self.rows):04d}",
                "op": op,
                "inputs_json": json.dumps(
                    inputs, sort_keys=True, separators=(",", ":")
                ),
                "value": repr(float(value)),
                "error": repr(float(error)),
                "method": method,
                "seed": self.seed,
                "n_paths": n_paths,
                "n_steps": n_steps,
                "timestamp": self.timestamp,
            }
        )

    def path(self, name):
        return os.path.join(self.out_dir, f"{self.prefix}_{name}")

    def write_csv(self, name):
        path = self.path(f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(self.rows)
        return path

    def write_plot(self, name, columns):
        """Whitespace-separated plot data: one (abscissa, value[, error])
        tuple per line."""
        path = self.path(f"{name}.dat")
        with open(path, "w", encoding="utf-8") as fh:
            for row in columns:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        return path

    def fit_window_points(self):
        fits = self.cfg["fits"]
        lo, hi = fits.get("window", (4.0, 64.0))
        n = fits.get("n_points", 8)
        return np.logspace(math.log10(lo), math.log10(hi), n)


def _cmd_kernel(r: _Runner) -> int:
    taus = tau_grid(r.cfg)
    ps = p_grid(r.cfg)
    for i, tau in enumerate(taus):
        plot = []
        for j, p in enumerate(ps):
            est = fk_kernel_momentum(
                r.eta, r.etap, float(tau), [float(p)], r.form, r.w,
                n_paths=r.n_paths, n_steps=r.n_steps, seed=r.seed,
                dirichlet=r.dirichlet, antithetic=r.antithetic,
                stream_offset=(i * len(ps) + j) * 1000,
            )
            inputs = {
                "tau": float(tau), "p": float(p), "eta": r.eta, "etap": r.etap,
            }
            r.add_row(
                "fk_kernel_momentum", inputs, est.mean, est.std_error, "mc",
                est.n_paths, est.n_steps,
            )
            plot.append((p, est.mean, est.std_error))
        r.write_plot(f"kernel_tau{i}", plot)
    r.write_csv("kernel")
    return 0


def _cmd_bounds(r: _Runner) -> int:
    taus = tau_grid(r.cfg)
    ps = p_grid(r.cfg)
    for i, tau in enumerate(taus):
        plot_lo, plot_up = [], []
        for p in ps:
            lo = lower_bound_kernel(
                r.eta, r.etap, float(tau), [float(p)], r.form, r.w,
                rel_tol=r.rel_tol,
            )
            up = upper_bound_kernel(
                r.eta, r.etap, float(tau), [float(p)], r.form, r.w,
                rel_tol=r.rel_tol,
            )
            inputs = {
                "tau": float(tau), "p": float(p), "eta": r.eta, "etap": r.etap,
            }
            r.add_row("lower_bound_kernel", inputs, lo.value,
                      lo.abs_error_estimate, "lower")
            r.add_row("upper_bound_kernel", inputs, up.value,
                      up.abs_error_estimate, "upper")
            plot_lo.append((p, lo.value, lo.abs_error_estimate))
            plot_up.append((p, up.value, up.abs_error_estimate))
        r.write_plot(f"bounds_lower_tau{i}", plot_lo)
        r.write_plot(f"bounds_upper_tau{i}", plot_up)
    r.write_csv("bounds")
    return 0


def _cmd_green(r: _Runner) -> int:
    ps = p_grid(r.cfg)
    report_lines = []
    plots = {LOWER: [], MC: [], UPPER: []}
    for i, p in enumerate(ps):
        values = {}
        for method in (LOWER, MC, UPPER):
            g = green_momentum(
                r.eta, r.etap, [float(p)], r.form, r.w, method=method,
                rel_tol=r.rel_tol, n_paths=r.n_paths, n_steps=r.n_steps,
                seed=r.seed + i,
            )
            values[method] = g
            inputs = {"p": float(p), "eta": r.eta, "etap": r.etap}
            r.add_row(
                "green_momentum", inputs, g.value, g.error, method,
                r.n_paths if method == MC else 0,
                r.n_steps if method == MC else 0,
            )
            plots[method].append((p, g.value, g.error))
        tol = 3.0 * values[MC].error
        ok_lo = values[LOWER].value - values[LOWER].error <= values[MC].value + tol
        ok_up = values[MC].value - tol <= values[UPPER].value + values[UPPER].error
        report_lines.append(
            f"p={float(p):g} lower={values[LOWER].value:.8g} "
            f"mc={values[MC].value:.8g}+-{values[MC].error:.3g} "
            f"upper={values[UPPER].value:.8g} "
            f"sandwich={'pass' if ok_lo and ok_up else 'FAIL'}"
        )
    for method, plot in plots.items():
        r.write_plot(f"green_{method}", plot)
    with open(r.path("green_sandwich.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_lines) + "\n")
    r.write_csv("green")
    return 0


def _cmd_scaling(r: _Runner) -> int:
    ps = r.fit_window_points()
    for method in (LOWER, UPPER):
        samples = []
        for p in ps:
            g = green_momentum(
                r.eta, r.etap, [float(p)], r.form, r.w, method=method,
                rel_tol=max(r.rel_tol, 1e-4),
            )
            samples.append((float(p), g.value, g.error))
        fit = fit_scaling_exponent(samples)
        inputs = {"window": list(fit.window), "n_points": fit.n_points}
        r.add_row(f"fit_scaling_exponent_green_{method}", inputs,
                  fit.exponent, fit.residual_rms, method)
        r.write_plot(f"scaling_green_{method}", samples)
    nu = r.form.scale_exponent
    if nu is not None:
        r.add_row("omega", {"nu": nu}, -2.0 * omega(nu), 0.0, "target")
    if "dx_log_range" in r.cfg["grids"]:
        dxs = dx_grid(r.cfg)
        d = max(r.form.d, 2)
        fit, inconclusive = large_distance_decay(
            r.form, r.eta, r.etap, dxs, d, rel_tol=max(r.rel_tol, 1e-4),
        )
        r.add_row(
            "large_distance_decay",
            {"window": list(fit.window), "inconclusive": inconclusive},
            fit.exponent, fit.residual_rms, "upper",
        )
    r.write_csv("scaling")
    return 0


def _cmd_moments(r: _Runner) -> int:
    taus = tau_grid(r.cfg)
    for mode in (INTEGRATED_ENDPOINT, FIXED_ENDPOINT):
        samples = []
        for i, tau in enumerate(taus):
            est = second_moment(
                float(tau), r.form, r.w, mode=mode,
                n_paths=r.n_paths, n_steps=r.n_steps, seed=r.seed + i,
            )
            r.add_row(
                "second_moment", {"tau": float(tau), "mode": mode},
                est.value, est.std_error, "mc", r.n_paths, r.n_steps,
            )
            samples.append((float(tau), est.value, est.std_error))
        r.write_plot(f"moments_{mode}", samples)
        if len(samples) >= 3:
            fit = fit_scaling_exponent(samples)
            r.add_row(
                "fit_scaling_exponent_moment", {"mode": mode},
                fit.exponent, fit.residual_rms, "mc",
            )
    r.write_csv("moments")
    return 0


def _cmd_position(r: _Runner) -> int:
    ps = p_grid(r.cfg)
    plot = []
    for p in ps:
        g = gu_momentum_bessel(
            r.eta, r.etap, [float(p)], r.form, rel_tol=max(r.rel_tol, 1e-4)
        )
        r.add_row(
            "gu_momentum_bessel", {"p": float(p), "eta": r.eta, "etap": r.etap},
            g.value, g.error, "upper",
        )
        plot.append((p, g.value, g.error))
    r.write_plot("position_bessel", plot)
    if "dx_log_range" in r.cfg["grids"]:
        d = max(r.form.d, 2)
        plot = []
        for dx in dx_grid(r.cfg):
            x = np.zeros(d)
            xp = np.zeros(d)
            xp[0] = float(dx)
            g = gu_position(
                r.eta, x, r.etap, xp, r.form, d=d,
                rel_tol=max(r.rel_tol, 1e-4),
            )
            r.add_row(
                "gu_position",
                {"dx": float(dx), "eta": r.eta, "etap": r.etap, "d": d},
                g.value, g.error, "upper",
            )
            plot.append((dx, g.value, g.error))
        r.write_plot("position_gu", plot)
    r.write_csv("position")
    return 0


def _cmd_metric(r: _Runner) -> int:
    if "metric" not in r.cfg:
        raise ConfigError("the metric subcommand requires a 'metric' section")
    for name in ("nu", "sigma"):
        r.add_row("metric_to_potentials", {"field": name},
                  r.meta[name], 0.0, "compiled")
    for name in ("theorem1_regime", "b_finite"):
        r.add_row("metric_to_potentials", {"field": name},
                  1.0 if r.meta[name] else 0.0, 0.0, "compiled")
    compiled = dict(r.cfg)
    compiled.pop("metric")
    compiled["potential"] = potential_spec_of(r.form, r.w)
    validate_config(compiled)
    with open(r.path("compiled.json"), "w", encoding="utf-8") as fh:
        json.dump(compiled, fh, indent=2, sort_keys=True)
        fh.write("\n")
    r.write_csv("metric")
    return 0


def _selftest_checks(r: _Runner):
    """Quick oracle and invariant battery; yields (name, ok, detail)."""
    from .bounds import closed_lower_scale_invariant, h_isotropic
    from .lattice import build_lattice, lattice_kernel
    from .numerics import (
        beta_weight_integral,
        gamma_fn,
        integrate_semi_infinite,
    )
    from .potentials import IsotropicForm, PowerLawTerm

    def close(a, b, tol):
        return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)

    # Closed-form Green's amplitude identity for three singularity exponents.
    for nu in (-0.25, 0.0, 0.5):
        b = 1.0 + nu
        om = 0.5 / b
        got = integrate_semi_infinite(
            lambda t: (2 * math.pi * t) ** -0.5 * math.exp(-(t**b)),
            small_tau_exponent=-0.5, decay_power=b,
        ).value
        want = (2 * math.pi) ** -0.5 * gamma_fn(om) / b
        yield (
            f"greens-amplitude-closed-form nu={nu}", close(got, want, 1e-6),
            f"{got:.10g} vs {want:.10g}",
        )

    # Endpoint-weight integral against the Gamma-function identity.
    got = beta_weight_integral(-0.25)
    want = gamma_fn(0.75) ** 2 / gamma_fn(1.5)
    yield ("beta-weight-integral", close(got, want, 1e-10),
           f"{got:.12g} vs {want:.12g}")

    # Free-particle kernel: Monte Carlo vs the heat-kernel closed form.
    half = IsotropicForm(1, (PowerLawTerm(0.5, 0.0),))
    est = fk_kernel_momentum(0.0, 0.0, 1.0, [1.0], half,
                             n_paths=20_000, seed=r.seed)
    want = (2 * math.pi) ** -0.5 * math.exp(-0.5)
    yield ("free-field-kernel", close(est.mean, want, 1e-9),
           f"{est.mean:.10g} vs {want:.10g}")

    # Kernel sandwich at one singular-potential point.
    form = IsotropicForm(1, (PowerLawTerm(1.0, -0.5),))
    rows = kernel_sandwich_check([1.0], [[2.0]], form,
                                 n_paths=20_000, seed=r.seed)
    ok = rows[0]["pass_lower"] and rows[0]["pass_upper"]
    yield ("kernel-sandwich nu=-0.25 p=2", ok,
           f"L={rows[0]['lower']:.4g} mc={rows[0]['mc']:.4g} "
           f"U={rows[0]['upper']:.4g}")

    # Scale-invariant closed form vs direct lower-bound quadrature.
    h = h_isotropic(1.0, -0.5, 1)
    lo = lower_bound_kernel(0.0, 0.0, 1.0, [2.0], form)
    cl = closed_lower_scale_invariant(1.0, [2.0], -0.25, 0.0, h, 0.0)
    yield ("lower-bound-closed-form", close(lo.value, cl.value, 1e-8),
           f"{lo.value:.10g} vs {cl.value:.10g}")

    # Bessel-integral route vs the free-field momentum Green's function.
    g = gu_momentum_bessel(0.0, 0.5, [2.0], half)
    want = math.exp(-2.0 * 0.5) / 2.0
    yield ("bessel-free-field", close(g.value, want, 1e-6),
           f"{g.value:.10g} vs {want:.10g}")

    # Position-space upper bound vs the free-field closed form.
    c3 = IsotropicForm(3, (PowerLawTerm(1.0, 0.0),))
    gp = gu_position(0.0, np.zeros(3), 0.0, np.array([1.0, 0, 0]), c3)
    want = (2 * math.pi) ** -2.0
    yield ("position-free-field", close(gp.value, want, 1e-6),
           f"{gp.value:.10g} vs {want:.10g}")

    # Lattice oracle vs constant-potential closed form.
    op = build_lattice(lambda y: np.full_like(y, 0.5), n_sites=2001)
    lv = lattice_kernel(op, 1.0, 0.0, 0.0)
    yield ("lattice-constant-potential", close(lv, want_lat := (
        (2 * math.pi) ** -0.5 * math.exp(-0.5)), 1e-4),
           f"{lv:.8g} vs {want_lat:.8g}")

    # Metric compilation example.
    from .potentials import COSMOLOGICAL, MetricModel, metric_to_potentials
    compiled = metric_to_potentials(
        MetricModel(3, (0.1,), mass=1.0, interpretation=COSMOLOGICAL)
    )
    yield ("metric-compilation alpha=0.1",
           close(compiled.nu, 2.0 / 7.0, 1e-12)
           and close(compiled.sigma, 3.0 / 7.0, 1e-12),
           f"nu={compiled.nu:.6g} sigma={compiled.sigma:.6g}")

    # Determinism: same seed, different thread split, identical result.
    a = fk_kernel_momentum(0.0, 0.0, 1.0, [2.0], form,
                           n_paths=20_000, seed=r.seed, n_threads=1,
                           chunk_size=5_000)
    b2 = fk_kernel_momentum(0.0, 0.0, 1.0, [2.0], form,
                            n_paths=20_000, seed=r.seed, n_threads=4,
                            chunk_size=5_000)
    yield ("thread-count-invariance", a.mean == b2.mean,
           f"{a.mean!r} vs {b2.mean!r}")


def _cmd_selftest(r: _Runner) -> int:
    failures = 0
    lines = []
    for name, ok, detail in _selftest_checks(r):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {name}: {detail}"
        print(line)
        lines.append(line)
        r.add_row("selftest", {"check": name}, 1.0 if ok else 0.0, 0.0,
                  "selftest")
        if not ok:
            failures += 1
    with open(r.path("selftest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    r.write_csv("selftest")
    print(f"{len(lines) - failures}/{len(lines)} checks passed")
    return 3 if failures else 0


_DISPATCH = {
    "kernel": _cmd_kernel,
    "bounds": _cmd_bounds,
    "green": _cmd_green,
    "scaling": _cmd_scaling,
    "moments": _cmd_moments,
    "position": _cmd_position,
    "metric": _cmd_metric,
    "selftest": _cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkgreen",
        description=(
            "Transition kernels and Green's functions of operators with "
            "power-law singular coefficients"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="dot-path override into the config JSON (repeatable)",
        )
        sp.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args.override)
        validate_config(cfg)
        runner = _Runner(cfg, args.out)
        return _DISPATCH[args.subcommand](runner)
    except (DivergentIntegralError, SingularityError, AccuracyError,
            DegenerateOperatorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DomainError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
