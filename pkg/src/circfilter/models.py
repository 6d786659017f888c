"""Generative simulators (Euler-Maruyama) for the circular and linear models."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import as_generator
from .special import vm_sample, wrap, xi_inv

ALPHA_MODES = ("ideal", "sqrt", "sqrt_unscaled", "linear")


def observation_concentration(kappa_z, delta, mode="ideal"):
    """Concentration of one direct observation covering ``delta`` time units.

    ``ideal`` keeps the Fisher information rate at ``kappa_z`` for every
    ``delta``; ``sqrt`` and ``linear`` are its small- and large-argument
    limits, ``sqrt(2 y)`` and ``y``.  ``sqrt_unscaled`` is ``sqrt(y)``.
    """
    if delta <= 0:
        raise DomainError("observation interval must be positive")
    if kappa_z is None:
        return 0.0
    y = float(kappa_z) * float(delta)
    if y < 0:
        raise DomainError("kappa_z must be non-negative")
    if mode == "ideal":
        return xi_inv(y)
    if mode == "sqrt":
        return math.sqrt(2.0 * y)
    if mode == "sqrt_unscaled":
        return math.sqrt(y)
    if mode == "linear":
        return y
    raise DomainError(f"unknown alpha mode {mode!r}; expected one of {ALPHA_MODES}")


@dataclass(frozen=True)
class CircularModelParams:
    """Precisions of the circular diffusion and its two observation channels.

    ``kappa_z = None`` means no direct observations.  ``alpha_mode`` selects
    how the per-observation concentration is derived from ``kappa_z``.
    """

    kappa_phi: float
    kappa_u: float
    kappa_z: float | None = None
    dt: float = 0.01
    obs_stride: int = 1
    alpha_mode: str = "ideal"

    def __post_init__(self):
        if not (math.isfinite(self.kappa_phi) and self.kappa_phi > 0):
            raise DomainError("kappa_phi must be positive")
        if not (math.isfinite(self.kappa_u) and self.kappa_u >= 0):
            raise DomainError("kappa_u must be non-negative")
        if self.kappa_z is not None and not (math.isfinite(self.kappa_z) and self.kappa_z >= 0):
            raise DomainError("kappa_z must be non-negative")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError("dt must be positive")
        if int(self.obs_stride) != self.obs_stride or self.obs_stride < 1:
            raise DomainError("obs_stride must be a positive integer")
        if self.alpha_mode not in ALPHA_MODES:
            raise DomainError(f"alpha_mode must be one of {ALPHA_MODES}")

    @property
    def total_precision(self):
        return self.kappa_phi + self.kappa_u

    @property
    def gain(self):
        """Weight of an increment observation in the mean update."""
        return self.kappa_u / (self.kappa_phi + self.kappa_u)

    @property
    def obs_interval(self):
        return self.obs_stride * self.dt

    def alpha(self):
        return observation_concentration(self.kappa_z, self.obs_interval, self.alpha_mode)


@dataclass(frozen=True)
class LinearModelParams:
    a: float
    c: float
    sigma_x2: float
    sigma_u2: float
    dt: float = 0.01

    def __post_init__(self):
        if not self.sigma_x2 > 0:
            raise DomainError("sigma_x2 must be positive")
        if not self.sigma_u2 >= 0:
            raise DomainError("sigma_u2 must be non-negative")
        if self.c == 0:
            raise DomainError("c must be non-zero")
        if not self.dt > 0:
            raise DomainError("dt must be positive")

    @property
    def sigma_u_tilde2(self):
        """Total noise variance rate of the increment channel, c^2 sx^2 + su^2."""
        return self.c * self.c * self.sigma_x2 + self.sigma_u2


@dataclass
class TrajectoryRecord:
    """Hidden path and observations on a regular grid.

    ``dU[k]`` and ``z[k]`` belong to the step ending at ``times[k]``; index 0
    holds NaN in both.  ``z`` is NaN wherever no direct observation was made.
    """

    times: np.ndarray
    phi: np.ndarray
    dU: np.ndarray
    z: np.ndarray | None = None
    circular: bool = True
    meta: dict = field(default_factory=dict)
    phi_unwrapped: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("phi", "dU"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"{name} length does not match the time grid")
        if self.z is not None and len(self.z) != n:
            raise DomainError("z length does not match the time grid")

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def to_csv(self, path, header=None):
        meta = dict(self.meta)
        if header:
            meta.update(header)
        with open(path, "w", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key} = {value}\n")
            w = csv.writer(fh)
            w.writerow(["t", "phi", "dU", "z"])
            z = self.z if self.z is not None else np.full(len(self.times), np.nan)
            for t, p, du, zz in zip(self.times, self.phi, self.dU, z):
                w.writerow([_fmt(t), _fmt(p), _fmt(du), _fmt(zz)])

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].partition("=")
                    meta[key.strip()] = value.strip()
                else:
                    lines.append(line)
            reader = csv.reader(lines)
            head = next(reader)
            if head[:4] != ["t", "phi", "dU", "z"]:
                raise DomainError(f"{path}: expected columns t,phi,dU,z, got {head}")
            for row in reader:
                if row:
                    rows.append([float(v) if v != "" else np.nan for v in row[:4]])
        arr = np.array(rows, dtype=float).reshape(-1, 4)
        z = arr[:, 3] if np.isfinite(arr[:, 3]).any() else None
        circular = meta.get("model", "circular") != "linear"
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], z, circular=circular, meta=meta)


def _fmt(v):
    return "" if not np.isfinite(v) else f"{v:.17g}"


def _n_steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or T < dt * (1 - 1e-12):
        raise DomainError("T must be at least one time step")
    return n


def simulate_circular(params, T, seed, *, phi0=0.0, increments=True, static=False):
    """Simulate a wrapped Brownian motion with increment and direct observations.

    Parameters
    ----------
    params : CircularModelParams
    T : float
        Duration; the grid has ``round(T/dt) + 1`` points.
    seed : int or numpy.random.Generator
    phi0 : float
        Initial angle.
    increments : bool
        Whether the increment channel is observed.  When False ``dU`` is zero
        (and carries no weight in the filters only if ``kappa_u == 0``).
    static : bool
        Hold the hidden state fixed at ``phi0`` (used for time-step studies).
    """
    rng = as_generator(seed)
    dt = params.dt
    n = _n_steps(T, dt)
    if increments and params.kappa_u == 0:
        raise DomainError("kappa_u = 0 means infinitely noisy increments; pass increments=False")
    step_noise = rng.standard_normal(n)
    obs_noise = rng.standard_normal(n)
    if static:
        steps = np.zeros(n)
    else:
        steps = math.sqrt(dt / params.kappa_phi) * step_noise
    unwrapped = float(phi0) + np.concatenate(([0.0], np.cumsum(steps)))
    dU = np.full(n + 1, np.nan)
    if increments:
        dU[1:] = steps + math.sqrt(dt / params.kappa_u) * obs_noise
    else:
        dU[1:] = 0.0
    z = None
    if params.kappa_z is not None:
        z = np.full(n + 1, np.nan)
        idx = np.arange(params.obs_stride, n + 1, params.obs_stride)
        alpha = params.alpha()
        if idx.size:
            z[idx] = wrap(unwrapped[idx] + vm_sample(0.0, alpha, rng, size=idx.size))
    times = dt * np.arange(n + 1)
    meta = {
        "model": "circular",
        "kappa_phi": params.kappa_phi,
        "kappa_u": params.kappa_u,
        "kappa_z": "" if params.kappa_z is None else params.kappa_z,
        "dt": dt,
        "obs_stride": params.obs_stride,
        "alpha_mode": params.alpha_mode,
    }
    return TrajectoryRecord(times, wrap(unwrapped), dU, z, True, meta, unwrapped)


def simulate_linear(params, x0, T, seed, *, sigma0_2=0.0):
    """Euler-Maruyama path of dX = aX dt + sx dW with dU = c dX + su dV.

    ``X_0 = x0 + sqrt(sigma0_2) * N(0, 1)``.
    """
    rng = as_generator(seed)
    dt = params.dt
    n = _n_steps(T, dt)
    init_noise = rng.standard_normal()
    state_noise = rng.standard_normal(n)
    obs_noise = rng.standard_normal(n)
    x = np.empty(n + 1)
    x[0] = x0 + math.sqrt(sigma0_2) * init_noise
    sx = math.sqrt(params.sigma_x2 * dt)
    for k in range(n):
        x[k + 1] = x[k] + params.a * x[k] * dt + sx * state_noise[k]
    dU = np.full(n + 1, np.nan)
    dU[1:] = params.c * np.diff(x) + math.sqrt(params.sigma_u2 * dt) * obs_noise
    meta = {
        "model": "linear",
        "a": params.a,
        "c": params.c,
        "sigma_x2": params.sigma_x2,
        "sigma_u2": params.sigma_u2,
        "dt": dt,
    }
    return TrajectoryRecord(dt * np.arange(n + 1), x, dU, None, False, meta)


def sample_direct_obs(phi, kappa_z, delta, mode, rng):
    """One direct angular observation of ``phi`` covering ``delta`` time units."""
    alpha = observation_concentration(kappa_z, delta, mode)
    return wrap(float(phi) + vm_sample(0.0, alpha, rng))
