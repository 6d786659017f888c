"""Exact rational coefficients for the large-argument Bessel expansions.

Both the numpy and the compiled implementations read these tables, so the two
code paths truncate the same series.
"""
from fractions import Fraction
from math import factorial

N_TERMS = 40


def _hankel_coefficients(nu, n):
    # I_nu(x) e^{-x} sqrt(2 pi x) ~ sum_k (-1)^k a_k(nu) x^{-k}
    out = []
    for k in range(n):
        p = Fraction(1)
        for j in range(1, k + 1):
            p *= 4 * nu * nu - (2 * j - 1) ** 2
        out.append((-1) ** k * p / (factorial(k) * 8**k))
    return out


def _series_div(p, q):
    r = []
    for n in range(len(p)):
        s = p[n] - sum(r[i] * q[n - i] for i in range(n))
        r.append(s / q[0])
    return r


def _series_mul(p, q):
    return [sum(p[i] * q[n - i] for i in range(n + 1)) for n in range(len(p))]


def _build(n=N_TERMS):
    s0 = _hankel_coefficients(0, n)
    s1 = _hankel_coefficients(1, n)
    ratio = _series_div(s1, s0)
    u = [Fraction(0), Fraction(1)] + [Fraction(0)] * (n - 2)
    u_ratio = _series_mul(u, ratio)
    ratio_sq = _series_mul(ratio, ratio)
    # 1 - F/x - F^2; the u^0 and u^1 coefficients vanish identically
    denom = [(1 if k == 0 else 0) - u_ratio[k] - ratio_sq[k] for k in range(n)]
    return ratio, denom


_RATIO, _DENOM = _build()

#: F(x) ~ sum_k RATIO_COEFFS[k] x^{-k}
RATIO_COEFFS = tuple(float(c) for c in _RATIO)
#: 1 - F(x)/x - F(x)^2 ~ sum_k DENOM_COEFFS[k] x^{-k}, DENOM_COEFFS[0:2] == 0
DENOM_COEFFS = tuple(float(c) for c in _DENOM)
