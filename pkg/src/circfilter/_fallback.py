"""Pure numpy implementations of the hot loops.

Mirrors ``_kernels.pyx`` operation for operation: the same random draws in
the same order, the same update formulas.  Deterministic filters are
vectorized across runs; the particle filter runs one trajectory at a time.
"""
import math

import numpy as np

from .errors import DegeneracyError
from .special import TWO_PI, bessel_ratio, script_F

NAME = "python"

LAW_VON_MISES = 0
LAW_GAUSS_VERBATIM = 1
LAW_GAUSS_DERIVED = 2


def bessel_ratio_array(x):
    return bessel_ratio(np.asarray(x, dtype=float))


def script_F_array(x):
    return script_F(np.asarray(x, dtype=float))


def _wrap(a):
    out = np.mod(a, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def vm_filter_batch(mu0, kappa0, dU, z, alpha, gain, total_precision, dt, law, kappa_floor):
    """Run R independent von Mises-type filters over n steps.

    ``dU`` and ``z`` have shape (R, n); NaN in ``z`` marks a missing direct
    observation.  Returns ``(mu, kappa, clamped)`` with traces of shape
    (R, n + 1) and the number of floor clamps per run.
    """
    dU = np.asarray(dU, dtype=float)
    R, n = dU.shape
    mu = np.empty((R, n + 1))
    kappa = np.empty((R, n + 1))
    clamped = np.zeros(R, dtype=np.int64)
    m = np.array(mu0, dtype=float, copy=True).reshape(R)
    k = np.maximum(np.array(kappa0, dtype=float).reshape(R), kappa_floor)
    mu[:, 0] = m
    kappa[:, 0] = k
    have_z = z is not None and alpha > 0
    if have_z:
        z = np.asarray(z, dtype=float)
    decay_vm = dt / (2.0 * total_precision)
    decay_g = dt / total_precision
    for i in range(n):
        m = _wrap(m + gain * dU[:, i])
        if law == LAW_VON_MISES:
            k = k - script_F(k) * decay_vm
        elif law == LAW_GAUSS_VERBATIM:
            k = k - decay_g / (k * k)
        else:
            k = k - decay_g * (k * k)
        low = k < kappa_floor
        if low.any():
            clamped += low
            k = np.where(low, kappa_floor, k)
        if have_z:
            zi = z[:, i]
            obs = np.isfinite(zi)
            if obs.any():
                zo = np.where(obs, zi, 0.0)
                x = k * np.cos(m) + alpha * np.cos(zo)
                y = k * np.sin(m) + alpha * np.sin(zo)
                k = np.where(obs, np.hypot(x, y), k)
                m = np.where(obs, _wrap(np.arctan2(y, x)), m)
                k = np.maximum(k, kappa_floor)
        mu[:, i + 1] = m
        kappa[:, i + 1] = k
    return mu, kappa, clamped


def _systematic_indices(w, u):
    n = w.size
    cum = np.cumsum(w)
    cum[-1] = 1.0
    positions = (u + np.arange(n)) / n
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, n - 1)


def _moment(angles, logw):
    w = np.exp(logw)
    c = float(np.dot(w, np.cos(angles)))
    s = float(np.dot(w, np.sin(angles)))
    r = math.hypot(c, s)
    if r < 1e-14:
        return 0.0, 0.0
    mu = math.atan2(s, c) % TWO_PI
    return (0.0 if mu >= TWO_PI else mu), min(r, 1.0)


def pf_run(angles, logw, dU, z, gain, sd, alpha, rng, record):
    """Propagate a particle ensemble over ``len(dU)`` steps in place.

    ``record`` lists the step indices (0..n) at which the weighted first
    circular moment is stored.  Returns ``(mu, r, n_resamples)``.
    """
    n = len(dU)
    N = angles.size
    record = np.asarray(record, dtype=np.int64)
    mu_out = np.empty(record.size)
    r_out = np.empty(record.size)
    ri = 0
    if ri < record.size and record[ri] == 0:
        mu_out[ri], r_out[ri] = _moment(angles, logw)
        ri += 1
    resamples = 0
    log_n = math.log(N)
    for k in range(1, n + 1):
        step = gain * dU[k - 1]
        noise = rng.standard_normal(N)
        angles[:] = _wrap(angles + step + sd * noise)
        if z is not None and alpha > 0 and math.isfinite(z[k - 1]):
            logw += alpha * np.cos(z[k - 1] - angles)
            top = logw.max()
            if not math.isfinite(top):
                raise DegeneracyError(f"non-finite log-weights at step {k}")
            w = np.exp(logw - top)
            total = w.sum()
            logw -= top + math.log(total)
            w /= total
            ess = 1.0 / float(np.dot(w, w))
            if ess < 0.5 * N:
                idx = _systematic_indices(w, rng.random())
                angles[:] = angles[idx]
                logw[:] = -log_n
                resamples += 1
        while ri < record.size and record[ri] == k:
            mu_out[ri], r_out[ri] = _moment(angles, logw)
            ri += 1
    return mu_out, r_out, resamples
