import math

import numpy as np
import pytest

import rugbayes as rb


def small_season(seed=3):
    return rb.simulate({"nteams": 4, "nrounds": 6, "seed": seed})


def test_simulate_and_features():
    sim = small_season()
    f = sim["features"]
    assert f.ngames == 12
    assert f.nteams == 4
    assert f.nweeks == 6
    assert f.scale == 10.0
    assert sim["truth"]["config"]["seed"] == 3
    assert len(rb.parameter_names(f, "I")) == 3 + 2 + 4 + 24


def test_gradient_matches_finite_differences():
    f = small_season()["features"]
    rng = np.random.default_rng(0)
    theta = rng.uniform(-1, 1, len(rb.parameter_names(f, "III")))
    lp, grad = rb.log_posterior(f, theta.tolist(), "III")
    h = 1e-5
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        fd = (rb.log_posterior(f, up.tolist(), "III")[0] - rb.log_posterior(f, down.tolist(), "III")[0]) / (2 * h)
        assert abs(fd - grad[i]) / max(1.0, abs(fd)) < 1e-6


def test_fit_summary_and_ppc():
    f = small_season()["features"]
    fit = rb.fit(f, model="I", iters=400, warmup=200, seed=5)
    assert fit.draws.shape == (4, 200, len(fit.names))
    assert fit.names[:3] == ["b_home", "b_prev", "b_effort"]
    again = rb.fit(f, model="I", iters=400, warmup=200, seed=5, threads=1)
    assert np.array_equal(fit.draws, again.draws)
    rows = {r["param"]: r for r in fit.summary()}
    assert set(rows) == {"b_home", "b_prev", "b_effort", "nu", "sigma_y"}
    assert rows["sigma_y"]["q025"] <= rows["sigma_y"]["q500"] <= rows["sigma_y"]["q975"]
    assert fit.param("nu").shape == (4, 200)
    ppc = fit.ppc(seed=2, alpha=0.5)
    assert ppc["replications"].shape == (800, 12)
    assert all(0.0 <= p <= 1.0 for p in ppc["pvalues"])
    assert len(ppc["flags"]) == 12


def test_diagnostics_and_luck():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 1000))
    assert 0.99 <= rb.split_rhat(x) <= 1.02
    assert 3000 < rb.effective_sample_size(x) < 5000
    assert rb.split_rhat(np.ones((4, 100))) is None
    d = rb.luck_decomposition(0.03798835, 0.01563645, 22)
    assert math.isclose(d["var_luck"], 0.01136364, abs_tol=1e-8)
    assert math.isclose(d["var_ability"], 0.01098826, abs_tol=1e-8)


def test_errors_are_typed():
    with pytest.raises(rb.InputError):
        rb.load_features("/nonexistent/matches.csv", "/nonexistent/prev.csv")
    with pytest.raises(ValueError):
        rb.simulate({"nteams": 5})
    f = small_season()["features"]
    with pytest.raises(rb.InputError):
        rb.fit(f, iters=100, warmup=150)
