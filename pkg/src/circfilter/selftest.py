"""Fast oracle checks that need nothing beyond numpy."""
from __future__ import annotations

import math
import time

import numpy as np

from .circular import VonMisesBelief, filter_batch, vm_direct_update
from .expfam import GvmNaturalParams, run_gvm
from .linear import GaussianBelief, gkbf_step, gkbf_variance_rate
from .models import CircularModelParams, LinearModelParams, simulate_circular
from .rng import stream
from .special import TWO_PI, bessel_ratio, xi, xi_inv


def _vm_density(grid, mu, kappa):
    # normalized with the exp(-kappa) scaling so large kappa stays finite
    e = np.exp(kappa * (np.cos(grid - mu) - 1.0))
    return e / (e.sum() * TWO_PI / grid.size)


def conjugacy(cases=100, points=1 << 14, seed=1):
    """Largest density gap between the grid posterior and the parametric update."""
    rng = stream(seed, "selftest", "conjugacy")
    grid = TWO_PI * np.arange(points) / points
    worst = 0.0
    for _ in range(cases):
        mu, z = rng.uniform(0, TWO_PI, 2)
        kappa, alpha = rng.uniform(0, 20, 2)
        post = _vm_density(grid, mu, kappa) * _vm_density(grid, z, alpha)
        post /= post.sum() * TWO_PI / points
        b = vm_direct_update(VonMisesBelief(mu, kappa), z, alpha)
        worst = max(worst, float(np.abs(post - _vm_density(grid, b.mu, b.kappa)).max()))
    return worst


def xi_round_trip():
    ys = np.logspace(-8, 6, 400)
    return max(abs(xi(xi_inv(y)) - y) / max(1.0, y) for y in ys)


def k1_reduction(seed=12345, scheme="heun"):
    """Max |dmu| and |dkappa|/kappa between the K=1 engine and the closed form."""
    p = CircularModelParams(1.0, 10.0, dt=1e-3)
    rec = simulate_circular(p, 1.0, stream(seed, "k1"))
    path = run_gvm(GvmNaturalParams.from_von_mises(0.3, 2.0), rec.dU[1:], p, quad_points=128,
                   scheme=scheme)
    mu, kappa, _ = filter_batch("vm_increment", [0.3], [2.0], rec.dU[1:][None, :], None, p)
    gm = np.array([GvmNaturalParams.from_vector(v).to_von_mises() for v in path])
    dmu = np.abs((gm[:, 0] - mu[0] + math.pi) % TWO_PI - math.pi).max()
    dk = np.abs(gm[:, 1] / kappa[0] - 1.0).max()
    return float(dmu), float(dk)


def gkbf_steady_state():
    """Algebraic residual after integrating to t=20 and the gap to the bisected root."""
    p = LinearModelParams(-1.0, 1.0, 1.0, 1.0, dt=0.01)
    lo, hi = 1e-12, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gkbf_variance_rate(mid, p) > 0:
            lo = mid
        else:
            hi = mid
    b = GaussianBelief(0.0, 1.0)
    for _ in range(2000):
        b = gkbf_step(b, 0.0, p)
    return abs(gkbf_variance_rate(b.sigma2, p)), abs(b.sigma2 - 0.5 * (lo + hi))


def run(out=print):
    """Run every check, print one line each, return True when all pass."""
    checks = [
        ("conjugacy grid", lambda: conjugacy(), lambda v: v <= 1e-8, "max density error {:.3g}"),
        ("xi round trip", xi_round_trip, lambda v: v <= 1e-12, "max rel error {:.3g}"),
        ("bessel ratio", lambda: abs(bessel_ratio(2.0) - 0.697774657964008),
         lambda v: v <= 1e-14, "error at 2 {:.3g}"),
        ("K=1 reduction", k1_reduction, lambda v: v[0] <= 1e-3 and v[1] <= 1e-3,
         "dmu {0[0]:.3g}, dkappa/kappa {0[1]:.3g}"),
        ("gKBF steady state", gkbf_steady_state, lambda v: v[0] <= 1e-6 and v[1] <= 1e-6,
         "residual {0[0]:.3g}, root gap {0[1]:.3g}"),
    ]
    ok = True
    for name, fn, test, fmt in checks:
        t0 = time.perf_counter()
        value = fn()
        passed = bool(test(value))
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {fmt.format(value)} ({time.perf_counter() - t0:.2f} s)")
    return ok
