"""Monte Carlo harness: simulate many runs, filter each, compare precisions.

For circular models every filter reports its own precision ``r_t = F(kappa_t)``
(the particle filter its weighted resultant length), averaged over runs into
``r_mean``.  The empirical precision ``r_hat`` is the resultant length of the
estimation errors ``mu_t - phi_t`` across runs; a calibrated filter has
``r_mean == r_hat``.  Linear models report the filter variance and the
empirical mean squared error instead.

Runs are indexed and every random draw of run ``k`` comes from streams keyed
by ``(seed, k, purpose)``, so results do not depend on chunking or on the
number of worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import os
import re
import statistics
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .circular import GAUSS_VARIANTS, filter_batch
from .errors import DomainError, NumericalError
from .expfam import GvmNaturalParams, gvm_moments, run_gvm
from .linear import DENOMINATORS, gkbf_batch
from .models import CircularModelParams, LinearModelParams, simulate_circular, simulate_linear
from .particle import default_particles, pf_init
from .rng import derive_seed, stream
from .special import TWO_PI, bessel_ratio, vm_sample

INITS = ("prior", "truth", "uniform")
CIRCULAR_FILTERS = ("circkf", "vm_increment", "gauss_adf", "pf", "gvm")
LINEAR_FILTERS = ("gkbf",)
_FILTER_RE = re.compile(r"^(circkf|vm_increment|gauss_adf|gkbf|pf|gvm)(?:\((\d+)\))?$")


def parse_filter(name):
    """Split ``"pf(1000)"`` into ``("pf", 1000)``; plain names get ``None``."""
    m = _FILTER_RE.match(str(name).replace(" ", ""))
    if not m:
        raise DomainError(
            f"unknown filter {name!r}; expected circkf, vm_increment, gauss_adf, gkbf, pf(N) or gvm(K)"
        )
    kind, arg = m.group(1), m.group(2)
    if arg is not None and kind not in ("pf", "gvm"):
        raise DomainError(f"filter {kind} takes no argument")
    if kind == "gvm" and arg is None:
        raise DomainError("gvm needs a harmonic count, e.g. gvm(2)")
    return kind, (int(arg) if arg is not None else None)


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo protocol.

    ``init`` selects how truth and filters start: ``"prior"`` draws the true
    initial angle from VM(mu0, kappa0) and starts every filter at that belief;
    ``"truth"`` starts the truth at ``mu0`` and every filter at VM(mu0, kappa0);
    ``"uniform"`` draws the truth uniformly and starts filters uninformed.
    Linear models draw ``X_0 ~ N(x0, sigma0_2)`` and start the filter there.
    """

    model: CircularModelParams | LinearModelParams
    filters: tuple = ("circkf",)
    runs: int = 2000
    T: float = 10.0
    seed: int = 0
    init: str = "prior"
    mu0: float = 0.0
    kappa0: float = 2.0
    x0: float = 0.0
    sigma0_2: float = 0.5
    increments: bool = True
    static: bool = False
    gauss_variant: str = "verbatim"
    gkbf_denominator: str = "consistent"
    gvm_scheme: str = "heun"
    quad_points: int = 512
    record_every: int = 1
    jobs: int = 1
    chunk: int = 250
    output_dir: str | None = None
    traces: int = 0
    plot: bool = False

    def __post_init__(self):
        filters = tuple(self.filters)
        if not filters:
            raise DomainError("at least one filter is required")
        object.__setattr__(self, "filters", filters)
        allowed = LINEAR_FILTERS if self.linear else CIRCULAR_FILTERS
        for f in filters:
            kind, _ = parse_filter(f)
            if kind not in allowed:
                raise DomainError(f"filter {f} does not apply to this model")
        if int(self.runs) != self.runs or self.runs < 1:
            raise DomainError("runs must be a positive integer")
        if not self.T >= self.model.dt * (1 - 1e-12):
            raise DomainError("T must be at least one time step")
        if self.init not in INITS:
            raise DomainError(f"init must be one of {INITS}")
        if not self.kappa0 >= 0 or not self.sigma0_2 >= 0:
            raise DomainError("initial concentration and variance must be non-negative")
        if self.gauss_variant not in GAUSS_VARIANTS:
            raise DomainError(f"gauss_variant must be one of {GAUSS_VARIANTS}")
        if self.gkbf_denominator not in DENOMINATORS:
            raise DomainError(f"gkbf_denominator must be one of {DENOMINATORS}")
        for name in ("record_every", "jobs", "chunk"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer")
        if self.traces < 0:
            raise DomainError("traces must be non-negative")

    @property
    def linear(self):
        return isinstance(self.model, LinearModelParams)

    @property
    def n_steps(self):
        return int(round(self.T / self.model.dt))

    def record_index(self):
        n = self.n_steps
        return np.unique(np.append(np.arange(0, n + 1, self.record_every), n))

    def resolved(self):
        """Flat ``{key: value}`` description of every setting, model included."""
        out = {"model": "linear" if self.linear else "circular"}
        for f in dataclasses.fields(self.model):
            out[f.name] = getattr(self.model, f.name)
        for f in dataclasses.fields(self):
            if f.name != "model":
                v = getattr(self, f.name)
                out[f.name] = ",".join(v) if f.name == "filters" else v
        out["backend"] = _backend.BACKEND
        return out


@dataclass
class FilterStats:
    """Per-filter aggregates on the recorded time grid."""

    r_mean: np.ndarray | None = None
    r_hat: np.ndarray | None = None
    var_mean: np.ndarray | None = None
    mse: np.ndarray | None = None
    seconds: float = 0.0
    clamped: int = 0
    resamples: int = 0


@dataclass
class RunSummary:
    times: np.ndarray
    filters: dict
    n_runs: int
    failed: dict = field(default_factory=dict)
    stream_digest: str = ""
    config: dict = field(default_factory=dict)

    @property
    def incomplete(self):
        return bool(self.failed)

    def final(self, name, stat="r_mean"):
        return float(getattr(self.filters[name], stat)[-1])


def empirical_precision(mu_by_run, phi_by_run):
    """Resultant length of the errors ``mu - phi`` across runs (axis 0).

    >>> float(empirical_precision([0.1, 0.2], [0.1, 0.2]))
    1.0
    """
    mu = np.asarray(mu_by_run, dtype=float)
    phi = np.asarray(phi_by_run, dtype=float)
    if mu.shape != phi.shape:
        raise DomainError("mu and phi shapes differ")
    if mu.shape[0] < 1:
        raise DomainError("need at least one run")
    err = mu - phi
    r = np.hypot(np.cos(err).mean(axis=0), np.sin(err).mean(axis=0))
    return np.minimum(r, 1.0)


def _initial_state(config, run):
    """True initial state and the filters' initial (mu, kappa)."""
    rng = stream(config.seed, run, "init")
    if config.init == "prior":
        phi0 = float(vm_sample(config.mu0, config.kappa0, rng))
        return phi0, config.mu0, config.kappa0
    if config.init == "truth":
        return config.mu0, config.mu0, config.kappa0
    phi0 = float(rng.uniform(0.0, TWO_PI))
    return phi0, 0.0, 0.0


def _pf_init(config, mu0, kappa0):
    if config.init == "uniform":
        return ("uniform",)
    return ("von_mises", mu0, kappa0)


def _checksum(*arrays):
    c = 0
    for a in arrays:
        if a is not None:
            c = zlib.crc32(np.ascontiguousarray(a).tobytes(), c)
    return c


def _run_chunk(config, start, stop):
    """Simulate and filter runs ``start..stop-1``; returns per-run arrays."""
    if config.linear:
        return _run_linear_chunk(config, start, stop)
    params = config.model
    idx = config.record_index()
    R = stop - start
    dU, Z, phi_rec, mu0s, kappa0s, checks = [], [], [], [], [], []
    records = []
    for run in range(start, stop):
        phi0, m0, k0 = _initial_state(config, run)
        rec = simulate_circular(params, config.T, stream(config.seed, run, "sim"), phi0=phi0,
                                increments=config.increments, static=config.static)
        records.append(rec)
        dU.append(rec.dU[1:])
        Z.append(rec.z[1:] if rec.z is not None else None)
        phi_rec.append(rec.phi[idx])
        mu0s.append(m0)
        kappa0s.append(k0)
        checks.append(_checksum(rec.dU, rec.z))
    dU = np.array(dU)
    Z = np.array(Z) if params.kappa_z is not None else None
    out = {"phi": np.array(phi_rec), "checksums": checks, "failed": {}, "filters": {}}
    for name in config.filters:
        kind, arg = parse_filter(name)
        t0 = time.perf_counter()
        mu = np.full((R, idx.size), np.nan)
        r = np.full((R, idx.size), np.nan)
        extra = 0
        failed = []
        if kind in ("circkf", "vm_increment", "gauss_adf"):
            try:
                m, k, clamped = filter_batch(kind, mu0s, kappa0s, dU, Z, params,
                                             variant=config.gauss_variant)
                mu[:], r[:] = m[:, idx], bessel_ratio(k[:, idx])
                extra = int(clamped.sum())
            except NumericalError:
                for j in range(R):
                    try:
                        m, k, clamped = filter_batch(
                            kind, mu0s[j:j + 1], kappa0s[j:j + 1], dU[j:j + 1],
                            None if Z is None else Z[j:j + 1], params, variant=config.gauss_variant)
                        mu[j], r[j] = m[0, idx], bessel_ratio(k[0, idx])
                        extra += int(clamped.sum())
                    except NumericalError as exc:
                        failed.append((start + j, str(exc)))
        elif kind == "pf":
            n_part = arg if arg is not None else default_particles(params)
            kern = _backend.get()
            gain = params.gain
            sd = math.sqrt(params.dt / params.total_precision)
            alpha = params.alpha() if Z is not None else 0.0
            for j in range(R):
                run = start + j
                rng = stream(config.seed, run, "pf", name)
                init = _pf_init(config, mu0s[j], kappa0s[j])
                ens = pf_init(n_part, init, rng)
                angles, logw = ens.angles.copy(), ens.logw.copy()
                try:
                    mu[j], r[j], res = kern.pf_run(angles, logw, dU[j], None if Z is None else Z[j],
                                                   gain, sd, alpha, rng, idx)
                    extra += int(res)
                except NumericalError as exc:
                    failed.append((run, str(exc)))
        else:  # gvm(K)
            for j in range(R):
                theta0 = GvmNaturalParams.from_von_mises(mu0s[j], kappa0s[j], K=arg)
                try:
                    path = run_gvm(theta0, dU[j], params, None if Z is None else Z[j],
                                   config.quad_points, scheme=config.gvm_scheme)
                except NumericalError as exc:
                    failed.append((start + j, str(exc)))
                    continue
                for c, v in enumerate(path[idx]):
                    th = GvmNaturalParams.from_vector(v)
                    mu[j, c] = th.to_von_mises()[0]
                    r[j, c] = _gvm_resultant(th, config.quad_points)
        for j in range(R):
            if _checksum(records[j].dU, records[j].z) != checks[j]:
                raise RuntimeError("observation stream modified by a filter")
        out["filters"][name] = {"mu": mu, "r": r, "seconds": time.perf_counter() - t0,
                                "extra": extra}
        for run, msg in failed:
            out["failed"].setdefault(run, []).append(f"{name}: {msg}")
    return out


def _gvm_resultant(theta, quad_points):
    m = gvm_moments(theta, quad_points)
    return float(math.hypot(m.eta_cos[0], m.eta_sin[0]))


def _run_linear_chunk(config, start, stop):
    params = config.model
    idx = config.record_index()
    dU, x_rec, checks = [], [], []
    for run in range(start, stop):
        rec = simulate_linear(params, config.x0, config.T, stream(config.seed, run, "sim"),
                              sigma0_2=config.sigma0_2)
        dU.append(rec.dU[1:])
        x_rec.append(rec.phi[idx])
        checks.append(_checksum(rec.dU))
    dU = np.array(dU)
    out = {"phi": np.array(x_rec), "checksums": checks, "failed": {}, "filters": {}}
    for name in config.filters:
        t0 = time.perf_counter()
        mu, s2 = gkbf_batch(np.full(len(dU), config.x0), config.sigma0_2, dU, params,
                            config.gkbf_denominator)
        out["filters"][name] = {"mu": mu[:, idx], "var": s2[idx],
                                "seconds": time.perf_counter() - t0, "extra": 0}
    return out


def _chunks(config):
    return [(s, min(s + config.chunk, config.runs)) for s in range(0, config.runs, config.chunk)]


def _run_chunk_args(args):
    return _run_chunk(*args)


def run_monte_carlo(config):
    """Simulate ``config.runs`` trajectories, filter each, aggregate statistics.

    Returns
    -------
    RunSummary
        ``filters[name]`` holds ``r_mean`` and ``r_hat`` (circular) or
        ``var_mean`` and ``mse`` (linear) on the recorded grid.  Runs in which
        any filter failed are excluded from every filter and listed in
        ``failed``.
    """
    tasks = [(config, s, e) for s, e in _chunks(config)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            parts = list(pool.map(_run_chunk_args, tasks))
    else:
        parts = [_run_chunk(*t) for t in tasks]
    idx = config.record_index()
    times = config.model.dt * idx
    failed = {}
    for p in parts:
        failed.update(p["failed"])
    phi = np.concatenate([p["phi"] for p in parts])
    keep = np.ones(config.runs, dtype=bool)
    keep[list(failed)] = False
    digest = hashlib.sha256(
        b"".join(c.to_bytes(4, "little") for p in parts for c in p["checksums"])
    ).hexdigest()
    stats = {}
    for name in config.filters:
        seconds = sum(p["filters"][name]["seconds"] for p in parts)
        extra = sum(p["filters"][name]["extra"] for p in parts)
        mu = np.concatenate([p["filters"][name]["mu"] for p in parts])[keep]
        if config.linear:
            var = parts[0]["filters"][name]["var"]
            mse = ((mu - phi[keep]) ** 2).mean(axis=0)
            stats[name] = FilterStats(var_mean=var, mse=mse, seconds=seconds)
        else:
            r = np.concatenate([p["filters"][name]["r"] for p in parts])[keep]
            st = FilterStats(r_mean=r.mean(axis=0), r_hat=empirical_precision(mu, phi[keep]),
                             seconds=seconds)
            if parse_filter(name)[0] == "pf":
                st.resamples = extra
            else:
                st.clamped = extra
            stats[name] = st
    summary = RunSummary(times, stats, int(keep.sum()), failed, digest, config.resolved())
    if config.output_dir:
        write_outputs(summary, config)
    return summary


def _header(fh, config, extra=None):
    meta = dict(config) if isinstance(config, dict) else config.resolved()
    if extra:
        meta.update(extra)
    for key, value in meta.items():
        fh.write(f"# {key} = {value}\n")


def write_outputs(summary, config, timing=None):
    """Write ``summary.csv`` (and traces, timing, plot when configured)."""
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    extra = {"n_runs": summary.n_runs, "failed_runs": len(summary.failed),
             "stream_digest": summary.stream_digest}
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        _header(fh, config, extra)
        w = csv.writer(fh)
        if config.linear:
            w.writerow(["t", "filter", "sigma2", "mse", "n_runs"])
            for name, st in summary.filters.items():
                for t, v, e in zip(summary.times, st.var_mean, st.mse):
                    w.writerow([f"{t:.10g}", name, f"{v:.17g}", f"{e:.17g}", summary.n_runs])
        else:
            w.writerow(["t", "filter", "r_mean", "r_hat", "n_runs"])
            for name, st in summary.filters.items():
                for t, a, b in zip(summary.times, st.r_mean, st.r_hat):
                    w.writerow([f"{t:.10g}", name, f"{a:.17g}", f"{b:.17g}", summary.n_runs])
    if timing is None:
        timing = {name: st.seconds for name, st in summary.filters.items()}
    write_timing(os.path.join(out, "timing.csv"), timing, config)
    if config.traces:
        _write_traces(config)
    if config.plot and not config.linear:
        plot_summary(summary, os.path.join(out, "summary.svg"))


def write_timing(path, timing, config):
    with open(path, "w", newline="") as fh:
        _header(fh, config)
        w = csv.writer(fh)
        w.writerow(["filter", "seconds"])
        for name, sec in timing.items():
            w.writerow([name, f"{sec:.6g}"])


def _write_traces(config):
    tdir = os.path.join(config.output_dir, "traces")
    os.makedirs(tdir, exist_ok=True)
    n = min(config.traces, config.runs)
    part = _run_chunk(config, 0, n)
    times = config.model.dt * config.record_index()
    for k in range(n):
        with open(os.path.join(tdir, f"run_{k}.csv"), "w", newline="") as fh:
            _header(fh, config, {"run": k})
            w = csv.writer(fh)
            cols = ["t", "x" if config.linear else "phi"]
            for name in config.filters:
                cols += [f"{name}_mu", f"{name}_sigma2" if config.linear else f"{name}_r"]
            w.writerow(cols)
            for c, t in enumerate(times):
                row = [f"{t:.10g}", f"{part['phi'][k, c]:.17g}"]
                for name in config.filters:
                    f = part["filters"][name]
                    second = f["var"][c] if config.linear else f["r"][k, c]
                    row += [f"{f['mu'][k, c]:.17g}", f"{second:.17g}"]
                w.writerow(row)


def plot_summary(summary, path):
    """Static SVG of r_mean (solid) and r_hat (dashed) per filter."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, st in summary.filters.items():
        line, = ax.plot(summary.times, st.r_mean, label=f"{name} r")
        ax.plot(summary.times, st.r_hat, "--", color=line.get_color(), label=f"{name} r_hat")
    ax.set_xlabel("t")
    ax.set_ylabel("precision")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


SWEEP_PARAMETERS = ("kappa_u", "kappa_z", "dt")


def sweep(config, parameter, values):
    """One ``run_monte_carlo`` per value, each with its own derived seed.

    Returns a list of ``(value, RunSummary)`` in the order of ``values``.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise DomainError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    values = list(values)
    if not values:
        raise DomainError("sweep needs at least one value")
    if config.linear:
        raise DomainError("sweeps apply to circular models")
    results = []
    for i, v in enumerate(values):
        model = dataclasses.replace(config.model, **{parameter: float(v)})
        out = None
        if config.output_dir:
            out = os.path.join(config.output_dir, f"{parameter}_{i}")
        cfg = dataclasses.replace(config, model=model, seed=derive_seed(config.seed, "sweep", parameter, i),
                                  output_dir=out)
        results.append((v, run_monte_carlo(cfg)))
    if config.output_dir:
        write_sweep(results, parameter, config)
    return results


def write_sweep(results, parameter, config):
    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, "sweep.csv"), "w", newline="") as fh:
        _header(fh, config, {"sweep": parameter})
        w = csv.writer(fh)
        w.writerow([parameter, "filter", "r_mean_T", "r_hat_T", "n_runs"])
        for v, s in results:
            for name, st in s.filters.items():
                w.writerow([v, name, f"{st.r_mean[-1]:.17g}", f"{st.r_hat[-1]:.17g}", s.n_runs])
    if config.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [float(v) for v, _ in results]
        for name in config.filters:
            line, = ax.plot(xs, [s.filters[name].r_mean[-1] for _, s in results], "o-", label=f"{name} r")
            ax.plot(xs, [s.filters[name].r_hat[-1] for _, s in results], "s--", color=line.get_color(),
                    label=f"{name} r_hat")
        ax.set_xscale("log")
        ax.set_xlabel(parameter)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(os.path.join(config.output_dir, "sweep.svg"), format="svg")
        plt.close(fig)


def timing_report(config, repeats=5):
    """Median wall-clock seconds of each filter on one shared run.

    Adds ``"circkf:pf"`` (PF time over circKF time) when both are configured.
    """
    one = dataclasses.replace(config, runs=1, chunk=1, output_dir=None, traces=0)
    times = {}
    for name in config.filters:
        solo = dataclasses.replace(one, filters=(name,))
        samples = []
        for _ in range(repeats):
            part = _run_chunk(solo, 0, 1)
            samples.append(part["filters"][name]["seconds"])
        times[name] = statistics.median(samples)
    kf = [n for n in config.filters if parse_filter(n)[0] == "circkf"]
    pf = [n for n in config.filters if parse_filter(n)[0] == "pf"]
    if kf and pf:
        times["circkf:pf"] = times[pf[0]] / times[kf[0]]
    return times
