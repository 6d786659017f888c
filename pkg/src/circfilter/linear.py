"""Gaussian projection filters for linear models with observed state increments.

Model: ``dX = A X dt + dW_x`` and ``dU = C dX + dW_u`` with noise covariance
rates ``Sigma_x`` and ``Sigma_u``.  The increment noise is correlated with the
state noise, so the innovation covariance rate is
``Sigma_u_tilde = C Sigma_x C^T + Sigma_u``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError

DENOMINATORS = ("consistent", "verbatim")


@dataclass(frozen=True)
class GaussianBelief:
    mu: float
    sigma2: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DomainError(f"sigma2 must be finite and positive, got {self.sigma2}")


def _innovation_variance(params, denominator):
    if denominator == "consistent":
        return params.sigma_u_tilde2
    if denominator == "verbatim":
        return params.c * params.sigma_x2 + params.sigma_u2
    raise DomainError(f"denominator must be one of {DENOMINATORS}")


def gkbf_gain(sigma2, params, denominator="consistent"):
    """Weight of the innovation ``dU - a c mu dt`` in the mean update."""
    s2 = _innovation_variance(params, denominator)
    return params.c * (params.a * sigma2 + params.sigma_x2) / s2


def gkbf_variance_rate(sigma2, params, denominator="consistent"):
    """Right-hand side of the (path-independent) variance ODE."""
    s2 = _innovation_variance(params, denominator)
    a, c, sx2 = params.a, params.c, params.sigma_x2
    return 2.0 * a * sigma2 + sx2 - c * c * (a * sigma2 + sx2) ** 2 / s2


def gkbf_step(belief, dU, params, denominator="consistent"):
    """One Euler step of the generalized Kalman-Bucy filter.

    ``denominator="verbatim"`` replaces ``c^2 sx^2 + su^2`` by
    ``c sx^2 + su^2``; the two agree when ``c = 1``.
    """
    if not math.isfinite(dU):
        raise NumericalError(f"non-finite increment observation {dU}")
    dt = params.dt
    a, c = params.a, params.c
    k = gkbf_gain(belief.sigma2, params, denominator)
    mu = belief.mu + a * belief.mu * dt + k * (dU - a * c * belief.mu * dt)
    sigma2 = belief.sigma2 + gkbf_variance_rate(belief.sigma2, params, denominator) * dt
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise NumericalError(f"variance left the positive reals: {sigma2}")
    return GaussianBelief(mu, sigma2)


def gkbf_batch(mu0, sigma0_2, dU, params, denominator="consistent"):
    """Run the filter over R increment paths of n steps.

    Returns ``mu`` of shape (R, n + 1) and the shared variance path of shape
    (n + 1,); the variance does not depend on the observations.
    """
    dU = np.atleast_2d(np.asarray(dU, dtype=float))
    R, n = dU.shape
    dt, a, c = params.dt, params.a, params.c
    sigma2 = np.empty(n + 1)
    sigma2[0] = sigma0_2
    for i in range(n):
        sigma2[i + 1] = sigma2[i] + gkbf_variance_rate(sigma2[i], params, denominator) * dt
    if not (np.isfinite(sigma2).all() and (sigma2 > 0).all()):
        raise NumericalError("variance left the positive reals")
    mu = np.empty((R, n + 1))
    mu[:, 0] = mu0
    m = mu[:, 0].copy()
    for i in range(n):
        k = gkbf_gain(sigma2[i], params, denominator)
        m = m + a * m * dt + k * (dU[:, i] - a * c * m * dt)
        mu[:, i + 1] = m
    return mu, sigma2


@dataclass(frozen=True)
class DiagGaussianBelief:
    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        s = np.array(self.sigma2, dtype=float).ravel()
        if mu.shape != s.shape:
            raise DomainError("mu and sigma2 lengths differ")
        if not (np.isfinite(s).all() and (s > 0).all()):
            raise DomainError("all sigma2 entries must be finite and positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", s)


@dataclass(frozen=True)
class MultiLinearParams:
    A: np.ndarray
    C: np.ndarray
    Sigma_x: np.ndarray
    Sigma_u: np.ndarray
    dt: float = 0.01

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Sx = np.atleast_2d(np.asarray(self.Sigma_x, dtype=float))
        Su = np.atleast_2d(np.asarray(self.Sigma_u, dtype=float))
        N = A.shape[0]
        M = C.shape[0]
        if A.shape != (N, N) or C.shape != (M, N) or Sx.shape != (N, N) or Su.shape != (M, M):
            raise DomainError(
                f"inconsistent shapes A{A.shape} C{C.shape} Sigma_x{Sx.shape} Sigma_u{Su.shape}"
            )
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        for name, value in (("A", A), ("C", C), ("Sigma_x", Sx), ("Sigma_u", Su)):
            object.__setattr__(self, name, value)
        st = self.Sigma_u_tilde
        if np.linalg.cond(st) > 1e12:
            raise DomainError("C Sigma_x C^T + Sigma_u is singular")

    @property
    def Sigma_u_tilde(self):
        return self.C @ self.Sigma_x @ self.C.T + self.Sigma_u

    @classmethod
    def from_scalar(cls, params):
        return cls([[params.a]], [[params.c]], [[params.sigma_x2]], [[params.sigma_u2]], params.dt)


def diag_gauss_step(belief, dU, params, verbatim=False):
    """One Euler step of the diagonal-covariance Gaussian projection filter.

    With ``P = diag(sigma2)`` and ``M = C^T Sigma_u_tilde^{-1} C``:

        dmu = A mu dt + (Sigma_x + P A^T) C^T Sigma_u_tilde^{-1} (dU - C A mu dt)
        dsigma2_i = [2 s_i (A - Sigma_x M A)_ii - s_i^2 (A^T M A)_ii
                     + (Sigma_x - Sigma_x M Sigma_x)_ii] dt

    which is the diagonal of the full Riccati equation evaluated at a
    diagonal ``P``.  ``verbatim=True`` instead uses ``P A`` in the gain and a
    factor 2 on the quartic term.
    """
    A, C, Sx = params.A, params.C, params.Sigma_x
    N, M = A.shape[0], C.shape[0]
    dU = np.atleast_1d(np.asarray(dU, dtype=float))
    if belief.mu.shape != (N,) or dU.shape != (M,):
        raise DomainError(f"expected mu of length {N} and dU of length {M}")
    if not np.isfinite(dU).all():
        raise NumericalError("non-finite increment observation")
    dt = params.dt
    s = belief.sigma2
    st = params.Sigma_u_tilde
    CA = C @ A
    # Sigma_u_tilde^{-1} applied by solves only
    innov = dU - CA @ belief.mu * dt
    cross = Sx + (s[:, None] * A if verbatim else s[:, None] * A.T)
    mu = belief.mu + A @ belief.mu * dt + cross @ (C.T @ np.linalg.solve(st, innov))
    MA = C.T @ np.linalg.solve(st, CA)
    MSx = C.T @ np.linalg.solve(st, C @ Sx)
    quartic = 2.0 if verbatim else 1.0
    rate = (
        2.0 * s * np.diag(A - Sx @ MA)
        - quartic * s * s * np.diag(A.T @ MA)
        + np.diag(Sx - Sx @ MSx)
    )
    sigma2 = s + rate * dt
    if not (np.isfinite(sigma2).all() and (sigma2 > 0).all()):
        raise NumericalError(f"variance left the positive reals: {sigma2}")
    return DiagGaussianBelief(mu, sigma2)


@dataclass
class LinearTrace:
    times: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, header=None):
        mu = np.asarray(self.mu).reshape(len(self.times), -1)
        s = np.asarray(self.sigma2).reshape(len(self.times), -1)
        meta = dict(self.meta)
        if header:
            meta.update(header)
        with open(path, "w", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key} = {value}\n")
            w = csv.writer(fh)
            if mu.shape[1] == 1:
                w.writerow(["t", "mu", "sigma2"])
            else:
                w.writerow(["t"] + [f"mu{i}" for i in range(mu.shape[1])]
                           + [f"sigma2_{i}" for i in range(s.shape[1])])
            for t, m, v in zip(self.times, mu, s):
                w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in m] + [f"{x:.17g}" for x in v])


def run_gkbf(record, params, belief0, denominator="consistent"):
    """Filter a linear ``TrajectoryRecord``; returns a ``LinearTrace``."""
    mu, sigma2 = gkbf_batch(belief0.mu, belief0.sigma2, record.dU[1:], params, denominator)
    meta = {"filter": "gkbf", "mu0": belief0.mu, "sigma0_2": belief0.sigma2,
            "denominator": denominator}
    return LinearTrace(record.times.copy(), mu[0], sigma2, meta)
