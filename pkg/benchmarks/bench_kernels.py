"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Both backends see identical inputs and, for the particle filter, identical
random streams; the script checks that outputs agree before timing them.
"""
import argparse
import statistics
import time

import numpy as np

from circfilter import CircularModelParams, simulate_circular
from circfilter import _backend
from circfilter._fallback import LAW_VON_MISES
from circfilter.particle import pf_init
from circfilter.rng import stream


def _median_time(fn, repeats):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_closed_form(kern, params, dU, z, law):
    R = dU.shape[0]
    mu0 = np.zeros(R)
    kappa0 = np.full(R, 2.0)
    return lambda: kern.vm_filter_batch(mu0, kappa0, dU, z, params.alpha(), params.gain,
                                        params.total_precision, params.dt, law, 1e-8)


def bench_pf(kern, params, dU, z, n):
    gain = params.gain
    sd = (params.dt / params.total_precision) ** 0.5
    record = np.arange(0, dU.size + 1, 100)

    def run():
        rng = stream(1, "bench")
        ens = pf_init(n, ("von_mises", 0.0, 2.0), rng)
        return kern.pf_run(ens.angles.copy(), ens.logw.copy(), dU, z, gain, sd, params.alpha(), rng, record)

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--runs", type=int, default=500, help="trajectories for the closed-form filters")
    ap.add_argument("--particles", type=int, default=1000)
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . --no-build-isolation")
    params = CircularModelParams(1.0, 1.0, 10.0)
    recs = [simulate_circular(params, 10.0, stream(0, i)) for i in range(args.runs)]
    dU = np.stack([r.dU[1:] for r in recs])
    z = np.stack([r.z[1:] for r in recs])
    fast, slow = _backend.get("compiled"), _backend.get("python")
    law = LAW_VON_MISES

    a = bench_closed_form(fast, params, dU, z, law)()
    b = bench_closed_form(slow, params, dU, z, law)()
    assert np.allclose(a[1], b[1], rtol=1e-12), "closed-form backends disagree"
    a = bench_pf(fast, params, dU[0], z[0], args.particles)()
    b = bench_pf(slow, params, dU[0], z[0], args.particles)()
    assert a[2] == b[2] and np.allclose(a[1], b[1], atol=1e-12), "particle backends disagree"

    steps = dU.shape[1]
    rows = []
    for label, make, work in (
        (f"circKF, {args.runs} runs x {steps} steps",
         lambda k: bench_closed_form(k, params, dU, z, law), args.runs * steps),
        (f"PF N={args.particles}, {steps} steps",
         lambda k: bench_pf(k, params, dU[0], z[0], args.particles), args.particles * steps),
    ):
        tf = _median_time(make(fast), args.repeats)
        ts = _median_time(make(slow), args.repeats)
        rows.append((label, tf, ts, work))
    print(f"{'workload':36s} {'compiled':>10s} {'numpy':>10s} {'speedup':>8s} {'ns/unit (c)':>12s}")
    for label, tf, ts, work in rows:
        print(f"{label:36s} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f} {1e9 * tf / work:12.1f}")


if __name__ == "__main__":
    main()
