# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Same contract as ``_fallback``; see that module."""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport atan2, cos, exp, fabs, fmod, hypot, isfinite, log, sin, INFINITY
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal, random_standard_uniform

from ._asymptotic import DENOM_COEFFS, RATIO_COEFFS
from .errors import DegeneracyError

cnp.import_array()

NAME = "compiled"

LAW_VON_MISES = 0
LAW_GAUSS_VERBATIM = 1
LAW_GAUSS_DERIVED = 2

DEF N_COEFFS = 40
cdef double TWO_PI = 6.283185307179586
cdef double SERIES_CUTOFF = 15.0
cdef double DENOM_CUTOFF = 50.0
cdef double ratio_c[N_COEFFS]
cdef double denom_c[N_COEFFS]

for _i in range(N_COEFFS):
    ratio_c[_i] = RATIO_COEFFS[_i]
    denom_c[_i] = DENOM_COEFFS[_i]


cdef inline double _asymptotic(const double* coeffs, double x, int start) noexcept nogil:
    cdef double u = 1.0 / x
    cdef double p = 1.0
    cdef double s, t, prev = INFINITY
    cdef int k
    for k in range(start):
        p *= u
    s = coeffs[start] * p
    for k in range(start + 1, N_COEFFS):
        p *= u
        t = coeffs[k] * p
        if fabs(t) >= fabs(prev):
            break
        s += t
        prev = t
        if fabs(t) < 1e-17 * fabs(s):
            break
    return s


cdef inline double _ratio(double x) noexcept nogil:
    cdef double q, t0, t1, s0, s1
    cdef int k
    if x == 0.0:
        return 0.0
    if x < SERIES_CUTOFF:
        q = 0.25 * x * x
        t0 = 1.0
        t1 = 1.0
        s0 = 1.0
        s1 = 1.0
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
    return _asymptotic(ratio_c, x, 0)


cdef inline double _script_F(double x) noexcept nogil:
    cdef double f = _ratio(x)
    if x > DENOM_CUTOFF:
        return f / _asymptotic(denom_c, x, 2)
    return f / (1.0 - f / x - f * f)


cdef inline double _wrap(double a) noexcept nogil:
    # a - 2pi is exact on [2pi, 4pi) (Sterbenz), so the fast paths agree with fmod
    cdef double m
    if 0.0 <= a < TWO_PI:
        return a
    if TWO_PI <= a < 2.0 * TWO_PI:
        m = a - TWO_PI
    elif -TWO_PI < a < 0.0:
        m = a + TWO_PI
    else:
        m = fmod(a, TWO_PI)
        if m < 0.0:
            m += TWO_PI
    if m >= TWO_PI:
        m = 0.0
    return m


def bessel_ratio_array(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = _ratio(xv[i])
    return out.reshape(np.shape(x))


def script_F_array(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = _script_F(xv[i])
    return out.reshape(np.shape(x))


def vm_filter_batch(mu0, kappa0, dU, z, double alpha, double gain,
                    double total_precision, double dt, int law, double kappa_floor):
    cdef const double[:, ::1] du = np.ascontiguousarray(dU, dtype=np.float64)
    cdef Py_ssize_t R = du.shape[0], n = du.shape[1]
    cdef bint have_z = z is not None and alpha > 0
    cdef const double[:, ::1] zv = np.ascontiguousarray(z if have_z else np.empty((R, 0)), dtype=np.float64)
    cdef const double[::1] m0 = np.ascontiguousarray(mu0, dtype=np.float64).reshape(R)
    cdef const double[::1] k0 = np.ascontiguousarray(kappa0, dtype=np.float64).reshape(R)
    mu_arr = np.empty((R, n + 1))
    kappa_arr = np.empty((R, n + 1))
    clamped_arr = np.zeros(R, dtype=np.int64)
    cdef double[:, ::1] mu = mu_arr
    cdef double[:, ::1] kappa = kappa_arr
    cdef long long[::1] clamped = clamped_arr
    cdef double decay_vm = dt / (2.0 * total_precision)
    cdef double decay_g = dt / total_precision
    cdef double m, k, zi, x, y
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(R):
            m = m0[r]
            k = k0[r]
            if k < kappa_floor:
                k = kappa_floor
            mu[r, 0] = m
            kappa[r, 0] = k
            for i in range(n):
                m = _wrap(m + gain * du[r, i])
                if law == 0:
                    k = k - _script_F(k) * decay_vm
                elif law == 1:
                    k = k - decay_g / (k * k)
                else:
                    k = k - decay_g * (k * k)
                if k < kappa_floor:
                    clamped[r] += 1
                    k = kappa_floor
                if have_z:
                    zi = zv[r, i]
                    if isfinite(zi):
                        x = k * cos(m) + alpha * cos(zi)
                        y = k * sin(m) + alpha * sin(zi)
                        k = hypot(x, y)
                        m = _wrap(atan2(y, x))
                        if k < kappa_floor:
                            k = kappa_floor
                mu[r, i + 1] = m
                kappa[r, i + 1] = k
    return mu_arr, kappa_arr, clamped_arr


cdef inline void _moment(double[::1] angles, double[::1] logw, double* mu, double* r) noexcept nogil:
    cdef Py_ssize_t j
    cdef double w, c = 0.0, s = 0.0, rr, mm
    for j in range(angles.shape[0]):
        w = exp(logw[j])
        c += w * cos(angles[j])
        s += w * sin(angles[j])
    rr = hypot(c, s)
    if rr < 1e-14:
        mu[0] = 0.0
        r[0] = 0.0
        return
    mm = fmod(atan2(s, c), TWO_PI)
    if mm < 0.0:
        mm += TWO_PI
    if mm >= TWO_PI:
        mm = 0.0
    mu[0] = mm
    r[0] = rr if rr < 1.0 else 1.0


def pf_run(double[::1] angles, double[::1] logw, dU, z, double gain, double sd,
           double alpha, rng, record):
    cdef const double[::1] du = np.ascontiguousarray(dU, dtype=np.float64)
    cdef Py_ssize_t n = du.shape[0], N = angles.shape[0]
    cdef bint have_z = z is not None and alpha > 0
    cdef const double[::1] zv = np.ascontiguousarray(z if have_z else np.empty(0), dtype=np.float64)
    cdef const long long[::1] rec = np.ascontiguousarray(record, dtype=np.int64)
    cdef Py_ssize_t n_rec = rec.shape[0]
    mu_arr = np.empty(n_rec)
    r_arr = np.empty(n_rec)
    cdef double[::1] mu_out = mu_arr
    cdef double[::1] r_out = r_arr
    w_arr = np.empty(N)
    cum_arr = np.empty(N)
    tmp_arr = np.empty(N)
    cdef double[::1] w = w_arr
    cdef double[::1] cum = cum_arr
    cdef double[::1] tmp = tmp_arr

    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    cdef bitgen_t* bitgen = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef Py_ssize_t ri = 0, k, j, i
    cdef long resamples = 0
    cdef double step, a, top, total, ess, u, pos, log_n = log(<double> N), zk, norm
    cdef bint degenerate = False
    cdef Py_ssize_t bad_step = 0

    with rng.bit_generator.lock, nogil:
        if ri < n_rec and rec[ri] == 0:
            _moment(angles, logw, &mu_out[ri], &r_out[ri])
            ri += 1
        for k in range(1, n + 1):
            step = gain * du[k - 1]
            for j in range(N):
                a = angles[j] + step
                a = a + sd * random_standard_normal(bitgen)
                angles[j] = _wrap(a)
            if have_z and isfinite(zv[k - 1]):
                zk = zv[k - 1]
                top = -INFINITY
                for j in range(N):
                    logw[j] += alpha * cos(zk - angles[j])
                    if logw[j] > top:
                        top = logw[j]
                if not isfinite(top):
                    degenerate = True
                    bad_step = k
                    break
                total = 0.0
                for j in range(N):
                    w[j] = exp(logw[j] - top)
                    total += w[j]
                norm = top + log(total)
                ess = 0.0
                for j in range(N):
                    logw[j] -= norm
                    w[j] /= total
                    ess += w[j] * w[j]
                ess = 1.0 / ess
                if ess < 0.5 * N:
                    u = random_standard_uniform(bitgen)
                    total = 0.0
                    for j in range(N):
                        total += w[j]
                        cum[j] = total
                    cum[N - 1] = 1.0
                    i = 0
                    for j in range(N):
                        pos = (u + j) / N
                        while i < N - 1 and cum[i] <= pos:
                            i += 1
                        tmp[j] = angles[i]
                    for j in range(N):
                        angles[j] = tmp[j]
                        logw[j] = -log_n
                    resamples += 1
            while ri < n_rec and rec[ri] == k:
                _moment(angles, logw, &mu_out[ri], &r_out[ri])
                ri += 1
    if degenerate:
        raise DegeneracyError(f"non-finite log-weights at step {bad_step}")
    return mu_arr, r_arr, resamples
