"""Closed-form circular filters with increment and direct angular observations.

The von Mises filter keeps the posterior in the family VM(mu, kappa).  Between
direct observations the mean follows the increments with gain
``kappa_u / (kappa_phi + kappa_u)`` and the concentration decays as

    dkappa = -script_F(kappa) dt / (2 (kappa_phi + kappa_u)).

A direct observation ``z`` with concentration ``alpha`` is absorbed exactly by
adding ``alpha (cos z, sin z)`` to the natural parameters
``kappa (cos mu, sin mu)``.  The circular Kalman filter (``circkf_step``)
composes the two.  The Gaussian assumed-density filter shares the mean
channel but evolves ``kappa = 1/sigma^2`` with a Gaussian law.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainError, NumericalError
from .special import TWO_PI, bessel_ratio, script_F, wrap

KAPPA_FLOOR = 1e-8
GAUSS_VARIANTS = ("verbatim", "derived")
FILTER_KINDS = ("circkf", "vm_increment", "gauss_adf")

_LAWS = {
    ("vm", None): 0,
    ("gauss", "verbatim"): 1,
    ("gauss", "derived"): 2,
}


@dataclass(frozen=True)
class VonMisesBelief:
    """Posterior VM(mu, kappa); ``mu`` is wrapped on construction."""

    mu: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise DomainError(f"kappa must be finite and non-negative, got {self.kappa}")
        object.__setattr__(self, "mu", wrap(float(self.mu)))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def theta(self):
        """Natural parameters kappa (cos mu, sin mu)."""
        return np.array([self.kappa * math.cos(self.mu), self.kappa * math.sin(self.mu)])

    @property
    def r(self):
        return bessel_ratio(self.kappa)

    @classmethod
    def from_theta(cls, theta):
        x, y = float(theta[0]), float(theta[1])
        kappa = math.hypot(x, y)
        return cls(math.atan2(y, x) if kappa > 0 else 0.0, kappa)


@dataclass(frozen=True)
class GaussAdfBelief:
    """Gaussian belief on the line mapped to the circle, ``kappa = 1/sigma^2``.

    ``clamped`` is set once ``kappa`` has been held at the floor.
    """

    mu: float
    kappa: float
    clamped: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError(f"kappa must be finite and positive, got {self.kappa}")
        object.__setattr__(self, "mu", wrap(float(self.mu)))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def r(self):
        return bessel_ratio(self.kappa)


def _check_dU(dU):
    if not math.isfinite(dU):
        raise NumericalError(f"non-finite increment observation {dU}")


def _absorb(mu, kappa, z, alpha):
    x = kappa * math.cos(mu) + alpha * math.cos(z)
    y = kappa * math.sin(mu) + alpha * math.sin(z)
    return wrap(math.atan2(y, x)), math.hypot(x, y)


def vm_increment_step(belief, dU, params, kappa_floor=KAPPA_FLOOR):
    """One Euler step of the increment-only von Mises filter."""
    _check_dU(dU)
    mu = wrap(belief.mu + params.gain * dU)
    k = belief.kappa
    k = k - script_F(max(k, kappa_floor)) * params.dt / (2.0 * params.total_precision)
    return VonMisesBelief(mu, max(k, kappa_floor))


def vm_direct_update(belief, z, alpha):
    """Exact conjugate update with an observation ``z ~ VM(phi, alpha)``.

    >>> b = vm_direct_update(VonMisesBelief(0.0, 1.0), math.pi / 2, 1.0)
    >>> round(b.mu, 12), round(b.kappa, 12)
    (0.785398163397, 1.414213562373)
    """
    if not alpha >= 0:
        raise DomainError("alpha must be non-negative")
    if alpha == 0:
        return belief
    mu, kappa = _absorb(belief.mu, belief.kappa, float(z), alpha)
    return VonMisesBelief(mu, kappa)


def circkf_step(belief, dU, z, params, kappa_floor=KAPPA_FLOOR):
    """Prediction with the increment ``dU`` followed by the update with ``z``.

    ``z`` may be None (or NaN) when no direct observation falls on this step;
    its concentration is ``params.alpha()``.
    """
    pred = vm_increment_step(belief, dU, params, kappa_floor)
    if z is None or not math.isfinite(z):
        return pred
    post = vm_direct_update(pred, z, params.alpha())
    if post.kappa < kappa_floor:
        return VonMisesBelief(post.mu, kappa_floor)
    return post


def gauss_adf_step(belief, dU, z, params, variant="verbatim", kappa_floor=KAPPA_FLOOR):
    """One step of the Gaussian assumed-density filter.

    ``variant="verbatim"`` uses ``dkappa = -dt / (s kappa^2)`` and
    ``variant="derived"`` uses ``dkappa = -kappa^2 dt / s``, the image of the
    Kalman-Bucy variance law under ``kappa = 1/sigma^2``; ``s`` is
    ``kappa_phi + kappa_u``.  Direct observations are absorbed as in
    ``circkf_step``.
    """
    if variant not in GAUSS_VARIANTS:
        raise DomainError(f"variant must be one of {GAUSS_VARIANTS}")
    _check_dU(dU)
    mu = wrap(belief.mu + params.gain * dU)
    k = belief.kappa
    rate = params.dt / params.total_precision
    k = k - rate / (k * k) if variant == "verbatim" else k - rate * k * k
    clamped = belief.clamped
    if k < kappa_floor:
        k = kappa_floor
        clamped = True
    if z is not None and math.isfinite(z):
        alpha = params.alpha()
        if alpha > 0:
            mu, k = _absorb(mu, k, float(z), alpha)
            k = max(k, kappa_floor)
    return GaussAdfBelief(mu, k, clamped)


@dataclass
class FilterTrace:
    """Filter output on the trajectory grid; ``r = F(kappa)``."""

    times: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    clamped: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def r(self):
        return bessel_ratio(self.kappa)

    def to_csv(self, path, header=None):
        meta = dict(self.meta)
        if header:
            meta.update(header)
        with open(path, "w", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key} = {value}\n")
            w = csv.writer(fh)
            w.writerow(["t", "mu", "kappa", "r"])
            for row in zip(self.times, self.mu, self.kappa, self.r):
                w.writerow([f"{v:.17g}" for v in row])


def filter_batch(kind, mu0, kappa0, dU, z, params, *, variant="verbatim",
                 kappa_floor=KAPPA_FLOOR, backend=None):
    """Run one closed-form filter over R trajectories at once.

    Parameters
    ----------
    kind : {"circkf", "vm_increment", "gauss_adf"}
    mu0, kappa0 : array_like, shape (R,)
    dU : ndarray, shape (R, n)
        Increments for steps 1..n.
    z : ndarray, shape (R, n) or None
        Direct observations, NaN where absent.  Ignored by ``vm_increment``.
    params : CircularModelParams
    variant : {"verbatim", "derived"}
        Concentration law of ``gauss_adf``.

    Returns
    -------
    mu, kappa : ndarray, shape (R, n + 1)
    clamped : ndarray, shape (R,)
        Steps at which the concentration was held at ``kappa_floor``.
    """
    if kind not in FILTER_KINDS:
        raise DomainError(f"unknown filter {kind!r}; expected one of {FILTER_KINDS}")
    if kind == "gauss_adf":
        if variant not in GAUSS_VARIANTS:
            raise DomainError(f"variant must be one of {GAUSS_VARIANTS}")
        law = _LAWS[("gauss", variant)]
    else:
        law = _LAWS[("vm", None)]
    dU = np.atleast_2d(np.asarray(dU, dtype=float))
    if not np.isfinite(dU).all():
        raise NumericalError("non-finite increment observation")
    R = dU.shape[0]
    mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), (R,))
    kappa0 = np.broadcast_to(np.asarray(kappa0, dtype=float), (R,))
    if kind == "vm_increment" or params.kappa_z is None:
        z, alpha = None, 0.0
    else:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape != dU.shape:
            raise DomainError("z and dU shapes differ")
        alpha = params.alpha()
    kern = _backend.get(backend)
    mu, kappa, clamped = kern.vm_filter_batch(
        np.mod(mu0, TWO_PI), kappa0, dU, z, alpha, params.gain,
        params.total_precision, params.dt, law, kappa_floor,
    )
    if not np.isfinite(kappa).all():
        raise NumericalError("concentration became non-finite")
    return mu, kappa, clamped


def run_filter(kind, record, params, belief0, *, variant="verbatim", backend=None):
    """Filter one ``TrajectoryRecord``; returns a ``FilterTrace``."""
    dU = record.dU[1:][None, :]
    z = None if record.z is None else record.z[1:][None, :]
    mu, kappa, clamped = filter_batch(
        kind, [belief0.mu], [belief0.kappa], dU, z, params,
        variant=variant, backend=backend,
    )
    meta = {"filter": kind, "mu0": belief0.mu, "kappa0": belief0.kappa}
    if kind == "gauss_adf":
        meta["variant"] = variant
    return FilterTrace(record.times.copy(), mu[0], kappa[0], int(clamped[0]), meta)
