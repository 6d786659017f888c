import csv
import math

import numpy as np
import pytest

from circfilter import (
    CircularModelParams,
    DomainError,
    ExperimentConfig,
    LinearModelParams,
    NumericalError,
    empirical_precision,
    run_monte_carlo,
    sweep,
    timing_report,
)
from circfilter import experiments
from circfilter.experiments import parse_filter
from circfilter.rng import stream
from circfilter.special import bessel_ratio, vm_sample

SMALL = CircularModelParams(1.0, 1.0, 10.0)


def _cfg(**kw):
    base = dict(model=SMALL, filters=("circkf", "gauss_adf", "pf(200)"), runs=24, T=1.0, seed=3,
                chunk=10, record_every=10)
    base.update(kw)
    return ExperimentConfig(**base)


def _rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


def test_empirical_precision_examples():
    assert float(empirical_precision([0.3, 1.0], [0.3, 1.0])) == 1.0
    err = stream(1, "u").uniform(0, 2 * math.pi, 100_000)
    assert float(empirical_precision(err, np.zeros_like(err))) < 0.02
    err = vm_sample(0.0, 3.0, stream(1, "v"), size=100_000)
    assert float(empirical_precision(err, np.zeros_like(err))) == pytest.approx(bessel_ratio(3.0), abs=0.01)
    with pytest.raises(DomainError):
        empirical_precision([], [])


def test_parse_filter():
    assert parse_filter("pf(1000)") == ("pf", 1000)
    assert parse_filter("gvm(2)") == ("gvm", 2)
    assert parse_filter("circkf") == ("circkf", None)
    for bad in ("gvm", "circkf(3)", "ekf"):
        with pytest.raises(DomainError):
            parse_filter(bad)


def test_config_validation():
    with pytest.raises(DomainError):
        _cfg(filters=("gkbf",))
    with pytest.raises(DomainError):
        ExperimentConfig(LinearModelParams(-1.0, 1.0, 1.0, 1.0), filters=("circkf",))
    with pytest.raises(DomainError):
        _cfg(runs=0)
    with pytest.raises(DomainError):
        _cfg(init="random")
    with pytest.raises(DomainError):
        _cfg(filters=())


def test_summary_shape_and_range():
    s = run_monte_carlo(_cfg())
    assert s.n_runs == 24 and not s.incomplete
    assert np.allclose(s.times, np.arange(0, 1.01, 0.1))
    for st in s.filters.values():
        assert st.r_mean.shape == s.times.shape
        assert ((st.r_mean >= 0) & (st.r_mean <= 1) & (st.r_hat >= 0) & (st.r_hat <= 1)).all()


def test_seed_determinism_and_sensitivity():
    a, b = run_monte_carlo(_cfg()), run_monte_carlo(_cfg())
    c = run_monte_carlo(_cfg(seed=4))
    assert a.stream_digest == b.stream_digest != c.stream_digest
    for name in a.filters:
        assert np.array_equal(a.filters[name].r_mean, b.filters[name].r_mean)
        assert np.array_equal(a.filters[name].r_hat, b.filters[name].r_hat)


def test_chunking_and_workers_do_not_change_results():
    a = run_monte_carlo(_cfg(chunk=24))
    b = run_monte_carlo(_cfg(chunk=5))
    c = run_monte_carlo(_cfg(chunk=7, jobs=2))
    for other in (b, c):
        assert other.stream_digest == a.stream_digest
        for name in a.filters:
            assert np.array_equal(a.filters[name].r_mean, other.filters[name].r_mean)
            assert np.array_equal(a.filters[name].r_hat, other.filters[name].r_hat)


def test_filters_share_the_observation_stream():
    # adding a filter must not change the simulated observations
    a = run_monte_carlo(_cfg(filters=("circkf",)))
    b = run_monte_carlo(_cfg(filters=("circkf", "pf(50)", "gvm(1)")))
    assert a.stream_digest == b.stream_digest
    assert np.array_equal(a.filters["circkf"].r_hat, b.filters["circkf"].r_hat)


def test_gvm_filter_in_harness_tracks_circkf():
    # the closed-form filter is an Euler scheme, so agreement is O(dt) here
    s = run_monte_carlo(_cfg(filters=("circkf", "gvm(1)"), runs=4, quad_points=128, gvm_scheme="rk4"))
    assert np.allclose(s.filters["circkf"].r_mean, s.filters["gvm(1)"].r_mean, atol=3e-3)


def test_failed_runs_are_excluded(monkeypatch):
    real = experiments.run_gvm
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise NumericalError("forced")
        return real(*args, **kwargs)

    monkeypatch.setattr(experiments, "run_gvm", flaky)
    s = run_monte_carlo(_cfg(filters=("circkf", "gvm(1)"), runs=4, chunk=4, quad_points=64))
    assert s.incomplete and list(s.failed) == [1] and s.n_runs == 3
    assert "forced" in s.failed[1][0]


def test_initializers():
    for init in ("prior", "truth", "uniform"):
        s = run_monte_carlo(_cfg(init=init, filters=("circkf",)))
        r0 = s.filters["circkf"].r_mean[0]
        if init == "uniform":
            assert r0 == pytest.approx(0.0, abs=1e-8)
        else:
            assert r0 == pytest.approx(bessel_ratio(2.0))
    truth = run_monte_carlo(_cfg(init="truth", filters=("circkf",)))
    assert truth.filters["circkf"].r_hat[0] == pytest.approx(1.0)


def test_linear_summary():
    cfg = ExperimentConfig(LinearModelParams(-1.0, 1.0, 1.0, 1.0), ("gkbf",), runs=400, T=1.0, seed=1)
    s = run_monte_carlo(cfg)
    st = s.filters["gkbf"]
    assert st.var_mean[0] == 0.5
    assert st.mse[-1] == pytest.approx(st.var_mean[-1], rel=0.2)


def test_outputs_and_headers(tmp_path):
    cfg = _cfg(output_dir=str(tmp_path), traces=2, plot=True)
    run_monte_carlo(cfg)
    for name in ("summary.csv", "timing.csv", "traces/run_0.csv", "traces/run_1.csv"):
        text = (tmp_path / name).read_text()
        assert text.startswith("# model = circular")
        assert "# seed = 3" in text and "# kappa_u = 1.0" in text
    rows = _rows(tmp_path / "summary.csv")
    assert rows[0] == ["t", "filter", "r_mean", "r_hat", "n_runs"]
    assert len(rows) == 1 + 3 * 11
    trace = _rows(tmp_path / "traces/run_0.csv")
    assert trace[0][:4] == ["t", "phi", "circkf_mu", "circkf_r"] and len(trace) == 12
    assert (tmp_path / "summary.svg").read_text().lstrip().startswith("<?xml")


def test_sweep_outputs_and_seeds(tmp_path):
    cfg = _cfg(filters=("circkf",), output_dir=str(tmp_path))
    res = sweep(cfg, "kappa_z", [1.0, 10.0])
    assert [v for v, _ in res] == [1.0, 10.0]
    assert res[0][1].stream_digest != res[1][1].stream_digest
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0] == ["kappa_z", "filter", "r_mean_T", "r_hat_T", "n_runs"] and len(rows) == 3
    assert (tmp_path / "kappa_z_0" / "summary.csv").exists()
    with pytest.raises(DomainError):
        sweep(cfg, "kappa_phi", [1.0])
    with pytest.raises(DomainError):
        sweep(cfg, "kappa_z", [])


def test_direct_observation_sweep_is_monotone():
    cfg = ExperimentConfig(CircularModelParams(1.0, 1.0, 1.0), ("circkf",), runs=300, T=5.0, seed=9,
                           record_every=100)
    finals = [s.final("circkf", "r_hat") for _, s in sweep(cfg, "kappa_z", [0.1, 1.0, 10.0, 100.0])]
    assert all(b >= a - 0.01 for a, b in zip(finals, finals[1:]))


def test_timing_relations():
    cfg = ExperimentConfig(CircularModelParams(1.0, 1.0, 10.0), ("circkf", "pf(1000)", "pf(10000)"),
                           T=2.0, seed=1)
    t = timing_report(cfg, repeats=3)
    assert t["circkf:pf"] >= 5
    assert t["pf(10000)"] >= 5 * t["pf(1000)"]
    again = timing_report(cfg, repeats=3)
    assert again["pf(1000)"] == pytest.approx(t["pf(1000)"], rel=0.5)
