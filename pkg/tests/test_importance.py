"""Importance-sampling log Z estimation: exactness on an identity flow,
per-sample seeding, curve/SD bookkeeping, invalid-weight handling."""

import numpy as np
import pytest
from scipy.special import logsumexp

from verletflow import IntegratorConfig, VerletFlow
from verletflow.densities import UnnormalizedDensity, standard_normal
from verletflow.importance import (
    SD_BATCHES,
    benchmark,
    draw_source,
    estimate_logZ,
    log_mean_exp,
    log_weight,
    log_weights,
)


@pytest.fixture
def normal_target():
    """Unnormalized standard normal on q with known offset log 5."""
    return UnnormalizedDensity(standard_normal(2), logZ_true=np.log(5.0))


def test_log_mean_exp_matches_direct(rng):
    x = rng.standard_normal(100)
    assert np.isclose(log_mean_exp(x), np.log(np.mean(np.exp(x))), atol=1e-12)
    # stability: huge values must not overflow
    assert np.isclose(log_mean_exp(x + 1000), log_mean_exp(x) + 1000, atol=1e-9)


def test_draw_source_is_batch_independent():
    q, p = draw_source(2, 3, 10, seed=4)
    assert q.shape == (10, 2) and p.shape == (10, 3)
    q2, p2 = draw_source(2, 3, 4, seed=4)
    assert np.array_equal(q[:4], q2)
    assert np.array_equal(p[:4], p2)


def test_identity_flow_weights_are_exact(identity_flow, normal_target):
    # identity map, target = source on q up to the injected constant:
    # every log-weight equals logZ_true exactly
    lw = log_weights(
        identity_flow, normal_target, 50, IntegratorConfig(steps=5, seed=0)
    )
    assert np.allclose(lw, np.log(5.0), atol=1e-12)


def test_log_weights_worker_count_invariance(identity_flow, normal_target):
    cfg = IntegratorConfig(steps=5, seed=3)
    lw1 = log_weights(identity_flow, normal_target, 20, cfg, workers=1)
    lw3 = log_weights(identity_flow, normal_target, 20, cfg, workers=3)
    assert np.array_equal(lw1, lw3)


def test_log_weights_all_methods_agree_on_identity(identity_flow, normal_target):
    vals = {}
    for method in ("taylor-verlet", "rk4-exact", "rk4-hutchinson"):
        cfg = IntegratorConfig(steps=5, seed=1, method=method)
        vals[method] = log_weights(identity_flow, normal_target, 10, cfg)
    for lw in vals.values():
        assert np.allclose(lw, np.log(5.0), atol=1e-10)


def test_single_sample_weight(identity_flow, normal_target):
    w = log_weight(identity_flow, normal_target, 123, IntegratorConfig(steps=5))
    assert np.isclose(w, np.log(5.0), atol=1e-12)


def test_estimate_logz_curve_layout(identity_flow, normal_target):
    rep = estimate_logZ(
        identity_flow, normal_target, 1000, IntegratorConfig(steps=5, seed=0)
    )
    assert [m for m, _, _ in rep.logZ_curve] == [10, 100, 1000]
    assert np.isclose(rep.logZ, np.log(5.0), atol=1e-12)
    assert rep.sd < 1e-12  # constant weights
    assert rep.invalid_count == 0 and not rep.unreliable
    assert rep.method == "taylor-verlet"
    assert rep.wall_seconds > 0


def test_estimate_logz_sd_is_chunked_std(small_flow):
    target = UnnormalizedDensity(standard_normal(2), logZ_true=0.0)
    cfg = IntegratorConfig(steps=10, seed=2)
    rep = estimate_logZ(small_flow, target, 200, cfg)
    lw = rep.log_weights
    chunks = np.array_split(lw, SD_BATCHES)
    sub = [logsumexp(c) - np.log(c.size) for c in chunks]
    assert np.isclose(rep.sd, np.std(sub, ddof=1), atol=1e-12)
    assert np.isclose(rep.logZ, logsumexp(lw) - np.log(lw.size), atol=1e-12)


def test_estimate_logz_converges_on_random_flow(small_flow):
    # a fixed random flow is still a valid proposal for the normal target
    target = UnnormalizedDensity(standard_normal(2), logZ_true=0.0)
    rep = estimate_logZ(small_flow, target, 4000, IntegratorConfig(steps=25, seed=0))
    assert abs(rep.logZ) < max(3 * rep.sd, 0.1)


def test_invalid_weights_are_nan_and_counted(normal_target):
    # order-2 flow with a huge k=2 coefficient: most trajectories blow up
    flow = VerletFlow.create(2, 2, order=2, hidden=[2], seed=0).zero_()
    flow.q_nets[2].net.biases[-1][:] = 200.0
    rep = estimate_logZ(
        flow, normal_target, 40, IntegratorConfig(steps=3, seed=0)
    )
    assert rep.invalid_count > 0
    assert np.isnan(rep.log_weights).sum() == rep.invalid_count
    assert rep.unreliable
    # the estimate itself uses only the valid weights
    finite = rep.log_weights[np.isfinite(rep.log_weights)]
    if finite.size:
        assert np.isclose(rep.logZ, logsumexp(finite) - np.log(finite.size))


def test_estimate_rejects_tiny_n(identity_flow, normal_target):
    with pytest.raises(ValueError):
        estimate_logZ(identity_flow, normal_target, 1, IntegratorConfig(steps=2))


def test_benchmark_runs_and_dedupes(identity_flow, normal_target):
    cfg = IntegratorConfig(steps=5, seed=0)
    with pytest.warns(UserWarning):
        reports = benchmark(
            identity_flow, normal_target, 20,
            ["taylor-verlet", "rk4-exact", "taylor-verlet"], cfg,
        )
    assert set(reports) == {"taylor-verlet", "rk4-exact"}
    for rep in reports.values():
        assert np.isclose(rep.logZ, np.log(5.0), atol=1e-10)
    with pytest.raises(ValueError):
        benchmark(identity_flow, normal_target, 20, ["taylor-verlet"], cfg)
