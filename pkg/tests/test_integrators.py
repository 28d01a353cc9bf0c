"""Taylor-Verlet and RK4 integration: analytic oracles, exact inversion,
cross-method agreement, and probe/seed plumbing."""

import numpy as np
import pytest

import verletflow.integrators as integ
from verletflow.flow import PhaseState, VerletFlow
from verletflow.integrators import (
    IntegrationError,
    IntegratorConfig,
    hutchinson_trace,
    integrate,
    rademacher_probes,
    rk4_integrate,
    verlet_integrate,
)


def linear_q_flow(s1):
    """Order-1 flow whose q-field is diag(s1)*q and whose p-field is zero.

    Built by zeroing every net and setting the q-side k=1 output bias, so
    the coefficient is constant in (p, t).
    """
    flow = VerletFlow.create(len(s1), len(s1), order=1, hidden=[4], seed=0).zero_()
    flow.q_nets[1].net.biases[-1][:] = np.asarray(s1, dtype=np.float64)
    return flow


# -- config validation -------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(steps=0)
    with pytest.raises(ValueError):
        IntegratorConfig(t0=0.5, t1=0.5)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk4-hutchinson", hutchinson_probes=0)
    assert IntegratorConfig(t0=1.0, t1=0.0, steps=4).tau == -0.25


def test_integrate_dispatch_checks_method(small_flow, rng):
    state = PhaseState(q=rng.standard_normal(2), p=rng.standard_normal(2), t=0.0)
    with pytest.raises(ValueError):
        verlet_integrate(small_flow, state, IntegratorConfig(method="rk4-exact"))
    with pytest.raises(ValueError):
        rk4_integrate(small_flow, state, IntegratorConfig(method="taylor-verlet"))
    with pytest.raises(ValueError):
        verlet_integrate(
            small_flow, state.with_(t=0.5), IntegratorConfig(t0=0.0, t1=1.0)
        )


# -- identity flow -----------------------------------------------------------


def test_identity_flow_is_noop(identity_flow, rng):
    q = rng.standard_normal(2)
    p = rng.standard_normal(2)
    state = PhaseState(q=q, p=p, t=0.0)
    for method in ("taylor-verlet", "rk4-exact", "rk4-hutchinson"):
        res = integrate(identity_flow, state, IntegratorConfig(steps=10, method=method))
        assert np.allclose(res.state.q, q, atol=1e-15)
        assert np.allclose(res.state.p, p, atol=1e-15)
        assert abs(float(np.asarray(res.dlogp))) < 1e-14


# -- analytic linear flow ----------------------------------------------------


@pytest.mark.parametrize("steps", [1, 10, 100])
def test_linear_flow_matches_closed_form(steps, rng):
    s1 = np.array([0.4, -0.7])
    flow = linear_q_flow(s1)
    q0 = rng.standard_normal(2)
    p0 = rng.standard_normal(2)
    res = verlet_integrate(
        flow, PhaseState(q=q0, p=p0, t=0.0), IntegratorConfig(steps=steps)
    )
    # each step scales q by exp(tau*s1) exactly, so any step count composes
    # to exp((t1-t0)*s1); dlogp = -(t1-t0)*sum(s1)
    assert np.allclose(res.state.q, np.exp(s1) * q0, atol=1e-10)
    assert np.allclose(res.state.p, p0, atol=1e-15)
    assert abs(float(res.dlogp) - (-(s1.sum()))) < 1e-10


def test_linear_flow_partial_interval():
    s1 = np.array([0.2, 0.3])
    flow = linear_q_flow(s1)
    q0 = np.array([1.0, -2.0])
    res = verlet_integrate(
        flow,
        PhaseState(q=q0, p=q0, t=0.25),
        IntegratorConfig(t0=0.25, t1=0.75, steps=7),
    )
    assert np.allclose(res.state.q, np.exp(0.5 * s1) * q0, atol=1e-12)
    assert abs(float(res.dlogp) + 0.5 * s1.sum()) < 1e-12


# -- exact inversion ---------------------------------------------------------


def test_forward_reverse_roundtrip(small_flow, rng):
    q = rng.standard_normal((6, 2))
    p = rng.standard_normal((6, 2))
    fwd = verlet_integrate(
        small_flow, PhaseState(q=q, p=p, t=0.0), IntegratorConfig(steps=37)
    )
    back = verlet_integrate(
        small_flow,
        fwd.state.with_(dlogp=fwd.dlogp),
        IntegratorConfig(t0=1.0, t1=0.0, steps=37),
    )
    assert np.abs(back.state.q - q).max() < 1e-10
    assert np.abs(back.state.p - p).max() < 1e-10
    assert np.abs(np.asarray(back.dlogp)).max() < 1e-10


def test_roundtrip_higher_order(rng):
    flow = VerletFlow.create(2, 2, order=2, hidden=[6], seed=11)
    # scale down the k=2 coefficients so trajectories avoid the singular set
    for side in ("q", "p"):
        flow.nets(side)[2].net.weights[-1] *= 0.05
    q = rng.uniform(0.5, 1.5, size=2)
    p = rng.uniform(0.5, 1.5, size=2)
    fwd = verlet_integrate(
        flow, PhaseState(q=q, p=p, t=0.0), IntegratorConfig(steps=50)
    )
    back = verlet_integrate(
        flow,
        fwd.state.with_(dlogp=fwd.dlogp),
        IntegratorConfig(t0=1.0, t1=0.0, steps=50),
    )
    assert np.abs(back.state.q - q).max() < 1e-9
    assert abs(float(back.dlogp)) < 1e-9


# -- cross-method agreement --------------------------------------------------


def test_rk4_agrees_with_verlet_in_small_step_limit(small_flow, rng):
    q = rng.standard_normal(2)
    p = rng.standard_normal(2)
    state = PhaseState(q=q, p=p, t=0.0)
    rv = verlet_integrate(small_flow, state, IntegratorConfig(steps=400))
    rr = rk4_integrate(
        small_flow, state, IntegratorConfig(steps=400, method="rk4-exact")
    )
    assert np.abs(rv.state.q - rr.state.q).max() < 1e-3
    assert np.abs(rv.state.p - rr.state.p).max() < 1e-3
    assert abs(float(rv.dlogp) - float(rr.dlogp)) < 1e-3


def test_hutchinson_and_exact_share_trajectories(small_flow, rng):
    state = PhaseState(
        q=rng.standard_normal((3, 2)), p=rng.standard_normal((3, 2)), t=0.0
    )
    re = rk4_integrate(
        small_flow, state, IntegratorConfig(steps=20, method="rk4-exact", seed=9)
    )
    rh = rk4_integrate(
        small_flow, state, IntegratorConfig(steps=20, method="rk4-hutchinson", seed=9)
    )
    assert np.array_equal(re.state.q, rh.state.q)
    assert np.array_equal(re.state.p, rh.state.p)
    assert not np.array_equal(np.asarray(re.dlogp), np.asarray(rh.dlogp))


def test_hutchinson_unbiased_over_probes(small_flow, rng):
    # averaging the one-probe estimates over many seeds approaches exact
    state = PhaseState(q=rng.standard_normal(2), p=rng.standard_normal(2), t=0.0)
    exact = float(
        rk4_integrate(
            small_flow, state, IntegratorConfig(steps=10, method="rk4-exact")
        ).dlogp
    )
    ests = [
        float(
            rk4_integrate(
                small_flow,
                state,
                IntegratorConfig(steps=10, method="rk4-hutchinson", seed=s),
            ).dlogp
        )
        for s in range(200)
    ]
    spread = np.std(ests)
    assert abs(np.mean(ests) - exact) < 4 * spread / np.sqrt(len(ests)) + 1e-6


# -- counters and bookkeeping ------------------------------------------------


def test_field_evaluation_counters(small_flow, rng):
    state = PhaseState(q=rng.standard_normal(2), p=rng.standard_normal(2), t=0.0)
    rv = verlet_integrate(small_flow, state, IntegratorConfig(steps=8))
    # order-1 flow: (order+1) coefficients x 2 sides per step
    assert rv.field_evaluations == 8 * 2 * 2
    assert rv.step_count == 8
    rr = rk4_integrate(small_flow, state, IntegratorConfig(steps=8, method="rk4-exact"))
    assert rr.field_evaluations == 4 * 8
    assert rv.wall_time > 0 and rr.wall_time > 0


def test_singularity_becomes_integration_error():
    flow = VerletFlow.create(1, 1, order=2, hidden=[2], seed=0).zero_()
    flow.q_nets[2].net.biases[-1][:] = 50.0  # guaranteed base sign flip
    with pytest.raises(IntegrationError) as exc:
        verlet_integrate(
            flow, PhaseState(q=[1.0], p=[1.0], t=0.0), IntegratorConfig(steps=1)
        )
    assert exc.value.step == 0


# -- probes ------------------------------------------------------------------


def test_rademacher_probes_per_sample_split():
    bank = rademacher_probes(3, range(5), probes=2, dim=4)
    assert bank.shape == (5, 2, 4)
    assert set(np.unique(bank)) <= {-1, 1}
    # sample identity, not position, determines the probes
    shifted = rademacher_probes(3, range(2, 7), probes=2, dim=4)
    assert np.array_equal(bank[2:], shifted[:3])
    assert not np.array_equal(bank, rademacher_probes(4, range(5), 2, 4))


def test_hutchinson_trace_utility(rng):
    a = rng.standard_normal((6, 6))
    est = np.mean(
        [
            hutchinson_trace(lambda v: a @ v, 6, probes=1,
                             rng=np.random.default_rng(s))
            for s in range(3000)
        ]
    )
    assert abs(est - np.trace(a)) < 0.15
    with pytest.raises(ValueError):
        hutchinson_trace(lambda v: v, 3, probes=0, rng=rng)


def test_more_probes_reduce_variance(small_flow, rng):
    state = PhaseState(q=rng.standard_normal(2), p=rng.standard_normal(2), t=0.0)
    exact = float(
        rk4_integrate(
            small_flow, state, IntegratorConfig(steps=10, method="rk4-exact")
        ).dlogp
    )

    def spread(probes):
        vals = [
            float(
                rk4_integrate(
                    small_flow,
                    state,
                    IntegratorConfig(
                        steps=10, method="rk4-hutchinson",
                        hutchinson_probes=probes, seed=s,
                    ),
                ).dlogp
            )
            for s in range(60)
        ]
        return np.sqrt(np.mean((np.array(vals) - exact) ** 2))

    assert spread(8) < spread(1)
