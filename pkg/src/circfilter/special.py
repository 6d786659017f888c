"""Bessel ratios, information scaling and circular primitives.

All functions accept Python floats or numpy arrays.  Scalars go through a
pure-Python path (the step functions call these once per time step); arrays
are evaluated elementwise with numpy.  Both paths implement the same
branches:

* ``kappa < 15``: power series of I0 and I1 (all terms positive, so the
  ratio keeps full relative precision),
* ``kappa >= 15``: asymptotic expansion of I1/I0 in 1/kappa, truncated at
  its smallest term.
"""
import math

import numpy as np

from ._asymptotic import DENOM_COEFFS, RATIO_COEFFS
from .errors import DomainError

TWO_PI = 2.0 * math.pi
SERIES_CUTOFF = 15.0
DENOM_ASYMPTOTIC_CUTOFF = 50.0
# Best-Fisher loses digits in s - w beyond this; the von Mises law is then
# Gaussian to O(1/kappa).
VM_GAUSSIAN_CUTOFF = 1e7
_ZERO_RESULTANT = 1e-14

__all__ = [
    "bessel_ratio",
    "script_F",
    "xi",
    "xi_inv",
    "wrap",
    "vm_sample",
    "circular_moment",
    "kappa_from_r",
]


def _is_scalar(x):
    return isinstance(x, (int, float, np.floating, np.integer)) or (
        isinstance(x, np.ndarray) and x.ndim == 0
    )


def _check_nonneg(x, name, strict=False):
    if _is_scalar(x):
        x = float(x)
        if not math.isfinite(x) or x < 0 or (strict and x == 0):
            bound = "> 0" if strict else ">= 0"
            raise DomainError(f"{name} must be finite and {bound}, got {x!r}")
        return x
    x = np.asarray(x, dtype=float)
    bad = ~np.isfinite(x) | (x <= 0 if strict else x < 0)
    if bad.any():
        bound = "> 0" if strict else ">= 0"
        raise DomainError(f"{name} must be finite and {bound}; offending value {x[bad].flat[0]!r}")
    return x


# -- scalar kernels ----------------------------------------------------------

def _ratio_series_scalar(x):
    q = 0.25 * x * x
    t0 = t1 = s0 = s1 = 1.0
    k = 1
    while True:
        t0 *= q / (k * k)
        t1 *= q / (k * (k + 1))
        s0 += t0
        s1 += t1
        if t0 < 1e-17 * s0:
            break
        k += 1
    return 0.5 * x * s1 / s0


def _asymptotic_scalar(coeffs, x, start):
    u = 1.0 / x
    p = u**start
    s = coeffs[start] * p
    prev = math.inf
    for k in range(start + 1, len(coeffs)):
        p *= u
        t = coeffs[k] * p
        if abs(t) >= abs(prev):
            break
        s += t
        prev = t
        if abs(t) < 1e-17 * abs(s):
            break
    return s


def _ratio_scalar(x):
    if x == 0.0:
        return 0.0
    if x < SERIES_CUTOFF:
        return _ratio_series_scalar(x)
    return _asymptotic_scalar(RATIO_COEFFS, x, 0)


def _denom_scalar(x, f):
    """1 - F/x - F^2 without cancellation for large x."""
    if x > DENOM_ASYMPTOTIC_CUTOFF:
        return _asymptotic_scalar(DENOM_COEFFS, x, 2)
    return 1.0 - f / x - f * f


# -- array kernels -----------------------------------------------------------

def _ratio_series_array(x):
    q = 0.25 * x * x
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    s0 = np.ones_like(x)
    s1 = np.ones_like(x)
    k = 1
    while True:
        t0 = t0 * (q / (k * k))
        t1 = t1 * (q / (k * (k + 1)))
        s0 = s0 + t0
        s1 = s1 + t1
        if np.all(t0 < 1e-17 * s0):
            break
        k += 1
    return 0.5 * x * s1 / s0


def _asymptotic_array(coeffs, x, start):
    u = 1.0 / x
    p = u**start
    s = coeffs[start] * p
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(start + 1, len(coeffs)):
        p = p * u
        t = coeffs[k] * p
        active &= np.abs(t) < np.abs(prev)
        if not active.any():
            break
        s = np.where(active, s + t, s)
        prev = np.where(active, t, prev)
        active &= np.abs(t) >= 1e-17 * np.abs(s)
    return s


def _ratio_array(x):
    out = np.zeros_like(x)
    small = (x > 0) & (x < SERIES_CUTOFF)
    large = x >= SERIES_CUTOFF
    if small.any():
        out[small] = _ratio_series_array(x[small])
    if large.any():
        out[large] = _asymptotic_array(RATIO_COEFFS, x[large], 0)
    return out


def _denom_array(x, f):
    out = 1.0 - f / x - f * f
    big = x > DENOM_ASYMPTOTIC_CUTOFF
    if big.any():
        out[big] = _asymptotic_array(DENOM_COEFFS, x[big], 2)
    return out


# -- public API --------------------------------------------------------------

def bessel_ratio(kappa):
    """Ratio I1(kappa)/I0(kappa), the mean resultant length of a von Mises law.

    Relative accuracy is about 1e-14 over the whole half line; the function
    never evaluates I0 or I1 themselves, so it does not overflow.

    Raises
    ------
    DomainError
        If ``kappa`` is negative or not finite.
    """
    x = _check_nonneg(kappa, "kappa")
    if isinstance(x, float):
        return _ratio_scalar(x)
    return _ratio_array(x)


def script_F(kappa):
    """Precision-decay function F / (1 - F/kappa - F^2), strictly positive.

    Behaves like ``kappa`` as kappa -> 0 and like ``2 kappa^2`` as kappa grows.
    The denominator (the derivative of the Bessel ratio) is taken from its own
    asymptotic series above kappa = 50, where direct subtraction cancels.
    """
    x = _check_nonneg(kappa, "kappa", strict=True)
    if isinstance(x, float):
        f = _ratio_scalar(x)
        return f / _denom_scalar(x, f)
    f = _ratio_array(x)
    return f / _denom_array(x, f)


def bessel_ratio_derivative(kappa):
    """d/dkappa of I1/I0, i.e. ``1 - F/kappa - F^2`` (1/2 at kappa = 0)."""
    x = _check_nonneg(kappa, "kappa")
    if isinstance(x, float):
        if x == 0.0:
            return 0.5
        return _denom_scalar(x, _ratio_scalar(x))
    out = np.full_like(x, 0.5)
    pos = x > 0
    if pos.any():
        xp = x[pos]
        out[pos] = _denom_array(xp, _ratio_array(xp))
    return out


def xi(x):
    """Information-scaling map ``x * I1(x)/I0(x)``."""
    v = _check_nonneg(x, "x")
    if isinstance(v, float):
        return v * _ratio_scalar(v)
    return v * _ratio_array(v)


def _xi_inv_scalar(y):
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, y + 1.0  # xi(y + 1) >= y for all y >= 0
    while hi * _ratio_scalar(hi) < y:
        hi *= 2.0
    x = math.sqrt(2.0 * y) if y < 1.0 else y + 0.5
    x = min(max(x, lo), hi)
    tol = 1e-14 * max(1.0, y)
    for _ in range(200):
        f = _ratio_scalar(x)
        resid = x * f - y
        if abs(resid) <= tol:
            return x
        if resid > 0:
            hi = x
        else:
            lo = x
        slope = x * (1.0 - f * f)
        step = resid / slope if slope > 0 else math.inf
        nxt = x - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            return x
        x = nxt
    return x


def xi_inv(y):
    """Inverse of :func:`xi`, solved by bracketed Newton iteration.

    Behaves like ``sqrt(2 y)`` for small ``y`` and like ``y + 1/2`` for large
    ``y``.  The residual satisfies ``|xi(x) - y| <= 1e-12 max(1, y)``.
    """
    v = _check_nonneg(y, "y")
    if isinstance(v, float):
        return _xi_inv_scalar(v)
    return np.vectorize(_xi_inv_scalar, otypes=[float])(v)


def wrap(phi):
    """Map angles to ``[0, 2 pi)``."""
    if _is_scalar(phi):
        phi = float(phi)
        if not math.isfinite(phi):
            raise DomainError(f"cannot wrap non-finite angle {phi!r}")
        out = phi % TWO_PI
        return 0.0 if out >= TWO_PI else out
    a = np.asarray(phi, dtype=float)
    if not np.isfinite(a).all():
        raise DomainError("cannot wrap non-finite angles")
    out = np.mod(a, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def _best_fisher_s(kappa):
    # rho = (tau - sqrt(2 tau)) / (2 kappa), rewritten without cancellation
    root = math.sqrt(1.0 + 4.0 * kappa * kappa)
    tau = 1.0 + root
    rho = 2.0 * kappa * tau / ((root + 1.0) * (tau + math.sqrt(2.0 * tau)))
    return (1.0 + rho * rho) / (2.0 * rho)


def vm_sample(mu, kappa, rng, size=None):
    """Draw from the von Mises law by Best and Fisher's rejection scheme.

    ``kappa == 0`` gives the uniform law; above ``VM_GAUSSIAN_CUTOFF`` the
    wrapped Gaussian with variance ``1/kappa`` is used instead.
    """
    kappa = _check_nonneg(kappa, "kappa")
    if not isinstance(kappa, float):
        raise DomainError("vm_sample takes a scalar concentration")
    mu = float(mu)
    n = 1 if size is None else int(np.prod(size))
    if kappa == 0.0:
        out = TWO_PI * rng.random(n)
    elif kappa > VM_GAUSSIAN_CUTOFF:
        out = wrap(mu + rng.standard_normal(n) / math.sqrt(kappa))
    else:
        s = _best_fisher_s(kappa)
        out = np.empty(n)
        todo = np.arange(n)
        while todo.size:
            m = todo.size
            u1 = rng.random(m)
            u2 = rng.random(m)
            u3 = rng.random(m)
            z = np.cos(math.pi * u1)
            w = (1.0 + s * z) / (s + z)
            c = kappa * (s - w)
            with np.errstate(divide="ignore"):
                ok = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
            theta = np.sign(u3[ok] - 0.5) * np.arccos(np.clip(w[ok], -1.0, 1.0))
            out[todo[ok]] = theta
            todo = todo[~ok]
        out = wrap(mu + out)
    if size is None:
        return float(out[0])
    return out.reshape(size)


def circular_moment(angles, weights=None):
    """Modulus and argument of the (weighted) first circular moment.

    Returns ``(r, mu)``.  When the resultant vanishes (``r < 1e-14``) the
    direction is undefined and ``(0.0, 0.0)`` is returned.
    """
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise DomainError("circular_moment needs at least one angle")
    if weights is None:
        w = np.full(a.shape, 1.0 / a.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != a.shape:
            raise DomainError("angles and weights differ in shape")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be non-negative and sum to one")
    c = float(np.dot(w.ravel(), np.cos(a).ravel()))
    s = float(np.dot(w.ravel(), np.sin(a).ravel()))
    r = math.hypot(c, s)
    if r < _ZERO_RESULTANT:
        return 0.0, 0.0
    return min(r, 1.0), wrap(math.atan2(s, c))


def _kappa_from_r_scalar(r):
    if r == 0.0:
        return 0.0
    k = r * (2.0 - r * r) / (1.0 - r * r)
    lo, hi = 0.0, max(2.0 * k, 1.0)
    while _ratio_scalar(hi) < r:
        hi *= 2.0
    k = min(k, hi)
    for _ in range(200):
        f = _ratio_scalar(k)
        resid = f - r
        if abs(resid) <= 1e-15:
            return k
        if resid > 0:
            hi = k
        else:
            lo = k
        nxt = k - resid / _denom_scalar(k, f)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == k:
            return k
        k = nxt
    return k


def kappa_from_r(r):
    """Concentration whose mean resultant length is ``r`` (inverse Bessel ratio)."""
    if _is_scalar(r):
        r = float(r)
        if not (math.isfinite(r) and 0.0 <= r < 1.0):
            raise DomainError(f"r must lie in [0, 1), got {r!r}")
        return _kappa_from_r_scalar(r)
    a = np.asarray(r, dtype=float)
    if not (np.isfinite(a) & (a >= 0) & (a < 1)).all():
        raise DomainError("r must lie in [0, 1)")
    return np.vectorize(_kappa_from_r_scalar, otypes=[float])(a)
