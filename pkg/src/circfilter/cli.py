"""Command-line entry point: ``circfilter <command> [options]``.

Exit status: 0 success, 2 usage, 3 configuration, 4 numerical failure,
5 input/output.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import selftest
from .circular import GaussAdfBelief, VonMisesBelief, run_filter
from .config import KEYS, ConfigError, build_experiment, build_model, read_config, resolve
from .errors import DomainError, NumericalError
from .experiments import parse_filter, run_monte_carlo, sweep, timing_report, write_timing
from .expfam import GvmNaturalParams, run_gvm
from .linear import GaussianBelief, run_gkbf
from .models import LinearModelParams, TrajectoryRecord, simulate_circular, simulate_linear
from .particle import run_pf
from .rng import stream

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5

MODEL_KEYS = ("model", "kappa_phi", "kappa_u", "kappa_z", "dt", "obs_stride", "alpha_mode",
              "a", "c", "sigma_x2", "sigma_u2")


def _add_keys(parser, keys):
    for key in keys:
        spec = KEYS[key]
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, metavar="V",
                            help=f"{spec.help} (default {spec.default})")


def _parser():
    p = argparse.ArgumentParser(prog="circfilter", description="Circular filtering toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a trajectory and write it as CSV")
    s.add_argument("--config")
    _add_keys(s, MODEL_KEYS + ("T", "seed", "phi0", "x0", "sigma0_2", "increments", "static"))
    s.add_argument("--out", required=True)

    f = sub.add_parser("filter", help="run one filter over a trajectory CSV")
    f.add_argument("--config")
    f.add_argument("--trajectory", required=True)
    f.add_argument("--filter", dest="filter_name", default="circkf",
                   help="circkf, vm_increment, gauss_adf, pf(N), gvm(K) or gkbf")
    _add_keys(f, MODEL_KEYS + ("seed", "mu0", "kappa0", "x0", "sigma0_2", "gauss_variant",
                               "gkbf_denominator", "gvm_scheme", "quad_points", "init"))
    f.add_argument("--out", required=True)

    all_exp = [k for k, v in KEYS.items() if v.section in ("model", "experiment", "output")]
    for name, text in (("mc", "Monte Carlo experiment"), ("sweep", "parameter sweep"),
                       ("timing", "per-filter wall-clock timing")):
        c = sub.add_parser(name, help=text)
        c.add_argument("--config")
        _add_keys(c, [k for k in all_exp if k != "output_dir"])
        c.add_argument("--out", dest="output_dir", default=None)
        if name == "sweep":
            _add_keys(c, ("parameter", "values"))
        if name == "timing":
            _add_keys(c, ("repeats",))

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return p


def _flags(ns):
    return {k: getattr(ns, k) for k in KEYS if hasattr(ns, k)}


def _values(ns, fallback=None):
    file_values = read_config(ns.config) if getattr(ns, "config", None) else {}
    return resolve(file_values, _flags(ns), fallback)


def _header(values, keys):
    return {k: values[k] for k in keys}


def cmd_simulate(ns):
    v = _values(ns)
    model = build_model(v)
    rng = stream(v["seed"], "simulate")
    try:
        if isinstance(model, LinearModelParams):
            rec = simulate_linear(model, v["x0"], v["T"], rng, sigma0_2=v["sigma0_2"])
        else:
            rec = simulate_circular(model, v["T"], rng, phi0=v["phi0"],
                                    increments=v["increments"], static=v["static"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    keys = MODEL_KEYS + ("T", "seed", "phi0", "x0", "sigma0_2", "increments", "static")
    rec.to_csv(ns.out, header=_header(v, keys))
    print(f"wrote {len(rec.times)} rows to {ns.out}")


def cmd_filter(ns):
    rec = TrajectoryRecord.from_csv(ns.trajectory)
    fallback = {k: val for k, val in rec.meta.items() if k in MODEL_KEYS}
    v = _values(ns, fallback)
    model = build_model(v)
    try:
        kind, arg = parse_filter(ns.filter_name)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if abs(model.dt - rec.dt) > 1e-9 * rec.dt:
        raise ConfigError(f"dt = {model.dt} does not match the trajectory spacing {rec.dt}")
    header = _header(v, MODEL_KEYS + ("seed", "mu0", "kappa0"))
    header.update({"filter": ns.filter_name, "trajectory": ns.trajectory})
    if kind == "gkbf":
        if not isinstance(model, LinearModelParams):
            raise ConfigError("gkbf needs a linear model")
        trace = run_gkbf(rec, model, GaussianBelief(v["x0"], v["sigma0_2"]), v["gkbf_denominator"])
        trace.to_csv(ns.out, header=header)
    elif isinstance(model, LinearModelParams):
        raise ConfigError(f"filter {kind} needs a circular model")
    elif kind == "pf":
        init = ("von_mises", v["mu0"], v["kappa0"]) if v["init"] != "uniform" else ("uniform",)
        tr = run_pf(rec, model, arg, init, stream(v["seed"], "filter", "pf"))
        _write_rows(ns.out, header, ["t", "mu", "r"], zip(tr.times, tr.mu, tr.r))
    elif kind == "gvm":
        theta0 = GvmNaturalParams.from_von_mises(v["mu0"], v["kappa0"], K=arg)
        z = None if rec.z is None else rec.z[1:]
        path = run_gvm(theta0, rec.dU[1:], model, z, v["quad_points"], scheme=v["gvm_scheme"])
        cols = ["t"] + [f"a{k + 1}" for k in range(arg)] + [f"b{k + 1}" for k in range(arg)]
        _write_rows(ns.out, header, cols, ([t, *row] for t, row in zip(rec.times, path)))
    else:
        belief = (GaussAdfBelief(v["mu0"], max(v["kappa0"], 1e-8)) if kind == "gauss_adf"
                  else VonMisesBelief(v["mu0"], v["kappa0"]))
        trace = run_filter(kind, rec, model, belief, variant=v["gauss_variant"])
        trace.to_csv(ns.out, header=header)
    print(f"wrote {ns.out}")


def _write_rows(path, header, cols, rows):
    with open(path, "w", newline="") as fh:
        for key, value in header.items():
            fh.write(f"# {key} = {value}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{x:.17g}" for x in row])


def cmd_mc(ns):
    cfg = build_experiment(_values(ns))
    summary = run_monte_carlo(cfg)
    _report(summary)
    if summary.incomplete:
        print(f"warning: {len(summary.failed)} runs failed and were excluded", file=sys.stderr)


def _report(summary):
    for name, st in summary.filters.items():
        if st.r_mean is not None:
            gap = float(np.max(np.abs(st.r_mean - st.r_hat)))
            print(f"{name}: r_T = {st.r_mean[-1]:.4f}, r_hat_T = {st.r_hat[-1]:.4f}, "
                  f"max |r - r_hat| = {gap:.4f}, runs = {summary.n_runs}")
        else:
            print(f"{name}: sigma2_T = {st.var_mean[-1]:.6g}, mse_T = {st.mse[-1]:.6g}, "
                  f"runs = {summary.n_runs}")


def cmd_sweep(ns):
    v = _values(ns)
    cfg = build_experiment(v)
    if not v["values"]:
        raise ConfigError("sweep needs --values (or 'values' in [sweep])")
    try:
        values = [float(x) for x in v["values"]]
        results = sweep(cfg, v["parameter"], values)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    for value, summary in results:
        print(f"{v['parameter']} = {value:g}")
        _report(summary)


def cmd_timing(ns):
    v = _values(ns)
    cfg = build_experiment(v)
    times = timing_report(cfg, v["repeats"])
    for name, sec in times.items():
        print(f"{name}: {sec:.6g}" + ("" if ":" in name else " s"))
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        write_timing(os.path.join(cfg.output_dir, "timing.csv"), times, cfg)


def cmd_selftest(ns):
    if not selftest.run():
        raise NumericalError("self-test failed")


COMMANDS = {"simulate": cmd_simulate, "filter": cmd_filter, "mc": cmd_mc, "sweep": cmd_sweep,
            "timing": cmd_timing, "selftest": cmd_selftest}


def main(argv=None):
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[ns.command](ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
