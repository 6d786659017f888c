import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circfilter import (
    CircularModelParams,
    DegeneracyError,
    DomainError,
    ParticleEnsemble,
    VonMisesBelief,
    pf_estimate,
    pf_init,
    pf_step,
    run_filter,
    run_pf,
    simulate_circular,
)
from circfilter import _backend
from circfilter.particle import default_particles, parse_init
from circfilter.rng import stream
from circfilter.special import bessel_ratio, circular_moment

TWO_PI = 2 * math.pi
BACKENDS = ["python"] + (["compiled"] if _backend.compiled is not None else [])


def test_point_init():
    ens = pf_init(3, "point(0)", 1)
    assert (ens.angles == 0).all() and np.allclose(ens.weights, 1 / 3)


def test_uniform_init_has_small_resultant():
    r, _ = circular_moment(pf_init(100_000, "uniform", stream(1, "u")).angles)
    assert r < 0.02


def test_von_mises_init_moment():
    r, mu = circular_moment(pf_init(1_000_000, ("von_mises", 1.0, 5.0), stream(1, "v")).angles)
    assert abs(r - bessel_ratio(5.0)) <= 0.005 and abs(mu - 1.0) <= 0.01


def test_init_errors_and_parsing():
    with pytest.raises(DomainError):
        pf_init(0, "uniform", 1)
    with pytest.raises(DomainError):
        parse_init("gauss(1)")
    with pytest.raises(DomainError):
        parse_init(("von_mises", 0.0, -1.0))
    assert parse_init("von_mises(1, 2.5)") == ("von_mises", 1.0, 2.5)
    assert parse_init("uniform") == ("uniform",)


def test_default_particle_counts():
    assert default_particles(CircularModelParams(1.0, 1.0)) == 10_000
    assert default_particles(CircularModelParams(1.0, 1.0, 1.0)) == 1000


def test_ensemble_validation_and_ess():
    with pytest.raises(DomainError):
        ParticleEnsemble([0.0, 1.0], np.log([0.5, 0.6]))
    ens = ParticleEnsemble([0.0, 1.0, 2.0, 3.0], np.log([0.4, 0.4, 0.1, 0.1]))
    assert ens.ess == pytest.approx(1 / 0.34)


@pytest.mark.parametrize("backend", BACKENDS)
def test_no_observation_leaves_weights(backend):
    ens = ParticleEnsemble(np.linspace(0, 6, 50), np.log(np.linspace(1, 2, 50) / np.linspace(1, 2, 50).sum()))
    out = pf_step(ens, 0.1, None, CircularModelParams(1.0, 10.0), stream(2), backend=backend)
    assert np.array_equal(out.logw, ens.logw)


def test_precise_increments_move_particles_rigidly():
    ens = pf_init(1000, "uniform", stream(3))
    out = pf_step(ens, 0.25, None, CircularModelParams(1.0, 1e12), stream(4))
    d = (out.angles - ens.angles - 0.25 + math.pi) % TWO_PI - math.pi
    assert np.abs(d).max() < 1e-5


def test_one_step_matches_wrapped_normal_moments():
    p = CircularModelParams(1.0, 10.0, dt=0.01)
    dU = 0.05
    est = pf_estimate(pf_step(pf_init(1_000_000, "point(0)", 1), dU, None, p, stream(5)))
    ref = pf_estimate(pf_step(pf_init(1_000_000, "point(0)", 1), dU, None, p, stream(6)))
    var = p.dt / p.total_precision
    assert abs(est.mu - p.gain * dU) <= 1e-3 and abs(est.r - math.exp(-var / 2)) <= 1e-3
    assert abs(est.mu - ref.mu) <= 1e-3 and abs(est.r - ref.r) <= 1e-3


def test_one_step_with_observation_matches_grid_posterior():
    p = CircularModelParams(1.0, 10.0, 50.0, dt=0.01)
    dU, z = 0.05, 0.3
    est = pf_estimate(pf_step(pf_init(1_000_000, "point(0)", 1), dU, z, p, stream(7)))
    grid = TWO_PI * np.arange(1 << 16) / (1 << 16)
    var = p.dt / p.total_precision
    d = (grid - p.gain * dU + math.pi) % TWO_PI - math.pi
    post = np.exp(-d * d / (2 * var) + p.alpha() * np.cos(z - grid))
    post /= post.sum()
    r, mu = circular_moment(grid, post)
    assert abs(est.mu - mu) <= 2e-3 and abs(est.r - r) <= 1e-3


def test_resampling_resets_ess():
    p = CircularModelParams(1.0, 1.0, 1e4, dt=0.01)
    ens = pf_init(2000, "uniform", stream(8))
    out = pf_step(ens, 0.0, 1.0, p, stream(9))
    assert out.ess == pytest.approx(2000)
    assert np.allclose(out.weights, 1 / 2000)


def test_weights_normalized_without_resampling():
    p = CircularModelParams(1.0, 1.0, 1.0, dt=0.01)
    out = pf_step(pf_init(500, "uniform", stream(8)), 0.0, 1.0, p, stream(9))
    assert out.ess < 500 and out.ess >= 250
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_degenerate_weights_raise(backend):
    kern = _backend.get(backend)
    angles = np.zeros(4)
    logw = np.full(4, -math.log(4))
    with pytest.raises(DegeneracyError):
        kern.pf_run(angles, logw, np.array([0.0]), np.array([1.0]), 0.5, 0.1, math.inf,
                    stream(1), np.empty(0, dtype=np.int64))


def test_estimate_edge_cases():
    est = pf_estimate(pf_init(5, "point(1)", 1))
    assert est.capped and est.r == pytest.approx(1.0)
    est = pf_estimate(ParticleEnsemble([0.0, math.pi], np.log([0.5, 0.5])))
    assert est.r == 0.0 and est.kappa == 0.0 and not est.capped


def test_estimate_recovers_concentration():
    est = pf_estimate(pf_init(1_000_000, ("von_mises", 1.0, 5.0), stream(10)))
    assert abs(est.mu - 1.0) <= 0.01 and est.kappa == pytest.approx(5.0, rel=0.03)


def test_run_is_deterministic():
    p = CircularModelParams(1.0, 1.0, 10.0)
    rec = simulate_circular(p, 1.0, 11)
    a = run_pf(rec, p, 300, "uniform", 5)
    b = run_pf(rec, p, 300, "uniform", 5)
    assert np.array_equal(a.mu, b.mu) and np.array_equal(a.r, b.r) and a.resamples == b.resamples
    with pytest.raises(DomainError):
        run_pf(rec, p, 300, "uniform", None)


@pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")
def test_backends_draw_identical_streams():
    p = CircularModelParams(1.0, 1.0, 10.0)
    rec = simulate_circular(p, 2.0, 12)
    a = run_pf(rec, p, 500, ("von_mises", 0.0, 2.0), 13, backend="compiled")
    b = run_pf(rec, p, 500, ("von_mises", 0.0, 2.0), 13, backend="python")
    assert a.resamples == b.resamples
    assert np.allclose(a.mu, b.mu, atol=1e-12) and np.allclose(a.r, b.r, atol=1e-12)


def test_record_every_keeps_final_step():
    p = CircularModelParams(1.0, 1.0)
    rec = simulate_circular(p, 0.1, 1)
    tr = run_pf(rec, p, 100, "uniform", 2, record_every=3)
    assert list(np.round(tr.times / p.dt).astype(int)) == [0, 3, 6, 9, 10]


def test_particle_filter_tracks_circkf():
    p = CircularModelParams(1.0, 1.0, 10.0)
    gaps = []
    for run in range(40):
        rec = simulate_circular(p, 10.0, stream(14, run))
        pf = run_pf(rec, p, 1000, ("von_mises", 0.0, 2.0), stream(14, run, "pf"), record_every=10)
        kf = run_filter("circkf", rec, p, VonMisesBelief(0.0, 2.0))
        gaps.append(pf.r.mean() - bessel_ratio(kf.kappa[::10]).mean())
    assert abs(np.mean(gaps)) <= 0.05


def test_ensemble_csv(tmp_path):
    ens = pf_init(4, "uniform", 1)
    ens.to_csv(tmp_path / "e.csv", header={"seed": 1})
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[:2] == ["# seed = 1", "angle,weight"] and len(lines) == 6


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.floats(-0.5, 0.5), st.floats(0.0, TWO_PI), st.floats(0.1, 1e3))
def test_step_keeps_invariants(n, dU, z, kz):
    p = CircularModelParams(1.0, 2.0, kz)
    out = pf_step(pf_init(n, "uniform", stream(n)), dU, z, p, stream(n, "s"))
    assert abs(out.weights.sum() - 1.0) <= 1e-9
    assert 1.0 - 1e-9 <= out.ess <= n + 1e-9
    assert ((out.angles >= 0) & (out.angles < TWO_PI)).all()
