"""Sequential importance resampling particle filter for the circular model.

Particles move through the proposal that already conditions on the
increment, ``N(phi + g dU, dt / (kappa_phi + kappa_u)) mod 2 pi`` with
``g = kappa_u / (kappa_phi + kappa_u)``, so only direct observations change
the weights.  Weights live in log space; systematic resampling is triggered
when the effective sample size ``1 / sum(w^2)`` drops below N/2.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import DomainError
from .rng import as_generator
from .special import TWO_PI, circular_moment, kappa_from_r, vm_sample, wrap

R_CAP = 1.0 - 1e-12


@dataclass(frozen=True)
class ParticleEnsemble:
    angles: np.ndarray
    logw: np.ndarray

    def __post_init__(self):
        angles = np.array(self.angles, dtype=float).ravel()
        logw = np.array(self.logw, dtype=float).ravel()
        if angles.size < 1 or angles.shape != logw.shape:
            raise DomainError("need at least one particle and one log-weight per particle")
        total = np.exp(logw).sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"weights sum to {total}, not 1")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "logw", logw)

    @property
    def n(self):
        return self.angles.size

    @property
    def weights(self):
        return np.exp(self.logw)

    @property
    def ess(self):
        w = self.weights
        return 1.0 / float(np.dot(w, w))

    def to_csv(self, path, header=None):
        with open(path, "w", newline="") as fh:
            for key, value in (header or {}).items():
                fh.write(f"# {key} = {value}\n")
            w = csv.writer(fh)
            w.writerow(["angle", "weight"])
            for a, wt in zip(self.angles, self.weights):
                w.writerow([f"{a:.17g}", f"{wt:.17g}"])


class PfEstimate(NamedTuple):
    mu: float
    r: float
    kappa: float
    capped: bool


def default_particles(params):
    """1000 particles with direct observations, 10000 without."""
    return 1000 if params.kappa_z is not None else 10000


def parse_init(init):
    """Normalize an initializer to ``("uniform",)``, ``("von_mises", mu, kappa)`` or ``("point", phi)``.

    Accepts those tuples or the strings ``"uniform"``, ``"von_mises(mu,kappa)"``
    and ``"point(phi)"``.
    """
    if isinstance(init, str):
        text = init.replace(" ", "")
        name, _, rest = text.partition("(")
        args = tuple(float(v) for v in rest.rstrip(")").split(",") if v) if rest else ()
        init = (name, *args)
    name, *args = init
    arity = {"uniform": 0, "von_mises": 2, "point": 1}
    if name not in arity or len(args) != arity[name]:
        raise DomainError(f"bad initializer {init!r}; expected uniform, von_mises(mu,kappa) or point(phi)")
    if name == "von_mises" and not args[1] >= 0:
        raise DomainError("von_mises initializer needs kappa >= 0")
    return (name, *args)


def pf_init(n, init, rng):
    """Equally weighted ensemble of ``n`` particles."""
    if int(n) != n or n < 1:
        raise DomainError("need at least one particle")
    n = int(n)
    name, *args = parse_init(init)
    rng = as_generator(rng)
    if name == "uniform":
        angles = rng.uniform(0.0, TWO_PI, n)
        angles[angles >= TWO_PI] = 0.0
    elif name == "von_mises":
        angles = np.atleast_1d(vm_sample(args[0], args[1], rng, size=n))
    else:
        angles = np.full(n, wrap(args[0]))
    return ParticleEnsemble(angles, np.full(n, -math.log(n)))


def _proposal(params):
    return params.gain, math.sqrt(params.dt / params.total_precision)


def pf_step(ens, dU, z, params, rng, backend=None):
    """Propagate, reweight with ``z`` (None or NaN when absent), maybe resample."""
    if not math.isfinite(dU):
        raise DomainError("non-finite increment observation")
    angles = ens.angles.copy()
    logw = ens.logw.copy()
    gain, sd = _proposal(params)
    zarr = None
    alpha = 0.0
    if z is not None and math.isfinite(z):
        zarr = np.array([float(z)])
        alpha = params.alpha()
    _backend.get(backend).pf_run(
        angles, logw, np.array([float(dU)]), zarr, gain, sd, alpha, as_generator(rng),
        np.empty(0, dtype=np.int64),
    )
    return ParticleEnsemble(angles, logw)


def pf_estimate(ens):
    """Weighted first circular moment and the matching concentration."""
    r, mu = circular_moment(ens.angles, ens.weights)
    if r >= R_CAP:
        return PfEstimate(mu, r, kappa_from_r(R_CAP), True)
    return PfEstimate(mu, r, kappa_from_r(r), False)


@dataclass
class PfTrace:
    times: np.ndarray
    mu: np.ndarray
    r: np.ndarray
    resamples: int


def run_pf(record, params, n_particles=None, init=("uniform",), rng=None, *,
           record_every=1, backend=None):
    """Particle filter over a ``TrajectoryRecord``.

    Moments are stored every ``record_every`` steps and at the final step.
    """
    if rng is None:
        raise DomainError("an explicit seed or Generator is required")
    rng = as_generator(rng)
    n = record.n_steps
    N = default_particles(params) if n_particles is None else n_particles
    ens = pf_init(N, init, rng)
    idx = np.unique(np.append(np.arange(0, n + 1, int(record_every)), n))
    gain, sd = _proposal(params)
    z = None
    alpha = 0.0
    if record.z is not None and params.kappa_z is not None:
        z = record.z[1:]
        alpha = params.alpha()
    angles = ens.angles.copy()
    logw = ens.logw.copy()
    mu, r, resamples = _backend.get(backend).pf_run(
        angles, logw, record.dU[1:], z, gain, sd, alpha, rng, idx,
    )
    return PfTrace(record.times[idx], mu, r, int(resamples))
