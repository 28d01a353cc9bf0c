"""Integration of Verlet flows.

Two families:

* the Taylor-Verlet integrator, a composition of the closed-form split
  updates with exact per-step log-det accumulation (invertible, so reverse
  integration applies the exact inverse sub-updates); and
* a fixed-step RK4 baseline that integrates the continuous change of
  variables, with the trace of the field Jacobian computed either exactly
  via reverse-mode autodiff or estimated with Hutchinson probes.

Both operate on vector states or on batches ``(n, d)``; the Taylor-Verlet
path also runs on autodiff Vars so training can differentiate through it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import operators as ops
from .autodiff import Tape, Var
from .flow import PhaseState, VerletFlow, apply_coefficient

TAYLOR_VERLET = "taylor-verlet"
RK4_EXACT = "rk4-exact"
RK4_HUTCHINSON = "rk4-hutchinson"

METHODS = (TAYLOR_VERLET, RK4_EXACT, RK4_HUTCHINSON)


class IntegrationError(RuntimeError):
    """Numeric or singularity failure, annotated with the failing step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DivergenceError(IntegrationError):
    """The trajectory produced non-finite values: the field itself (not a
    singular draw) is pathological, so callers should treat the current
    parameters as diverged rather than retry other samples."""


@dataclass
class IntegratorConfig:
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 100
    method: str = TAYLOR_VERLET
    hutchinson_probes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.t0 == self.t1:
            raise ValueError("t0 and t1 must differ")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.hutchinson_probes < 1:
            raise ValueError("hutchinson_probes must be positive")

    @property
    def tau(self):
        return (self.t1 - self.t0) / self.steps


@dataclass
class IntegrationResult:
    state: PhaseState
    dlogp: object
    wall_time: float
    step_count: int
    field_evaluations: int


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Taylor-Verlet


def _coeff(flow, side, k, opposite, t, tape_params=None):
    net = flow.nets(side)[k]
    if isinstance(opposite, Var):
        params = tape_params.get((side, k)) if tape_params else None
        return net.taped(opposite, t, params=params)
    return net(_value(opposite), t)


def _forward_substeps(flow, q, p, t, tau, dlogp, counters, tape_params=None):
    """One Taylor-Verlet step at frozen time t: k ascending, q before p."""
    for k in range(flow.order + 1):
        for side in ("q", "p"):
            x, opp = (q, p) if side == "q" else (p, q)
            coeff = _coeff(flow, side, k, opp, t, tape_params)
            counters["field_evaluations"] += 1
            form = flow.nets(side)[k].form
            step = ops.OperatorStep(side, k, tau, coeff, form)
            x, logdet = ops.apply_step(step, x)
            dlogp = ad.sub(dlogp, logdet)
            if side == "q":
                q = x
            else:
                p = x
    return q, p, dlogp


def _reverse_substeps(flow, q, p, t, tau, dlogp, counters, tape_params=None):
    """Exact inverse of ``_forward_substeps``: p before q, k descending.

    ``tau`` is the duration of the forward step being undone; coefficients
    are re-evaluated from the current values, which equal the ones the
    forward pass saw because a same-side step never moves the opposite side.
    """
    for k in range(flow.order, -1, -1):
        for side in ("p", "q"):
            x, opp = (q, p) if side == "q" else (p, q)
            coeff = _coeff(flow, side, k, opp, t, tape_params)
            counters["field_evaluations"] += 1
            form = flow.nets(side)[k].form
            step = ops.OperatorStep(side, k, tau, coeff, form)
            x, logdet = ops.invert_step(step, x)
            dlogp = ad.sub(dlogp, logdet)
            if side == "q":
                q = x
            else:
                p = x
    return q, p, dlogp


def verlet_integrate(flow: VerletFlow, state: PhaseState, cfg: IntegratorConfig,
                     tape_params=None):
    """Taylor-Verlet integration from cfg.t0 to cfg.t1.

    ``t1 < t0`` runs the exact inverse of the forward integrator that maps
    t1 up to t0.  ``tape_params`` optionally maps (side, k) to taped MLP
    parameters so gradients reach the flow parameters.
    """
    if cfg.method != TAYLOR_VERLET:
        raise ValueError(f"verlet_integrate got method {cfg.method!r}")
    if abs(state.t - cfg.t0) > 1e-12:
        raise ValueError(f"state.t={state.t} != cfg.t0={cfg.t0}")
    start = time.perf_counter()
    tau = cfg.tau
    q, p, dlogp, t = state.q, state.p, state.dlogp, cfg.t0
    counters = {"field_evaluations": 0}
    forward = cfg.t1 > cfg.t0
    for i in range(cfg.steps):
        try:
            if forward:
                q, p, dlogp = _forward_substeps(
                    flow, q, p, t, tau, dlogp, counters, tape_params
                )
                t = cfg.t0 + (i + 1) * tau
            else:
                # undo the forward step that ran at frozen time t + tau
                t_step = cfg.t0 + (i + 1) * tau
                q, p, dlogp = _reverse_substeps(
                    flow, q, p, t_step, -tau, dlogp, counters, tape_params
                )
                t = t_step
        except ops.SingularityError as err:
            raise IntegrationError(f"step {i}: {err}", step=i) from err
    try:
        final = PhaseState(q=q, p=p, t=cfg.t1, dlogp=dlogp)
    except ValueError as err:
        raise DivergenceError(
            f"non-finite state after {cfg.steps} steps: {err}", step=cfg.steps - 1
        ) from err
    return IntegrationResult(
        state=final,
        dlogp=dlogp,
        wall_time=time.perf_counter() - start,
        step_count=cfg.steps,
        field_evaluations=counters["field_evaluations"],
    )


# ---------------------------------------------------------------------------
# RK4 baseline with trace integration


def hutchinson_trace(matvec, dim, probes, rng):
    """Mean over Rademacher probes of eps . (J eps); unbiased for tr J."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    total = 0.0
    for _ in range(probes):
        eps = rng.integers(0, 2, size=dim) * 2.0 - 1.0
        total += float(eps @ np.asarray(matvec(eps)))
    return total / probes


def _exact_trace(flow, q, p, t):
    """Per-sample trace of the field Jacobian restricted to (q, p)."""
    tape = Tape()
    qv, pv = tape.var(q), tape.var(p)
    fq, fp = flow.eval_field_taped(qv, pv, t)
    batch = q.ndim == 2
    trace = np.zeros(q.shape[0]) if batch else 0.0
    for out, leaf in ((fq, qv), (fp, pv)):
        d = out.value.shape[-1]
        for i in range(d):
            seed = np.zeros_like(out.value)
            seed[..., i] = 1.0
            g = ad.grad(out, seed, [leaf])[0]
            trace = trace + g[..., i]
    return trace


def rademacher_probes(seed, sample_indices, probes, dim):
    """Per-sample Rademacher probe bank, split from (seed, sample-index) so
    estimates are independent of batching and worker count.

    Each sample's probes are drawn once and held fixed for every field
    evaluation along its trajectory, so the integrated trace estimate stays
    unbiased while the estimation error is coherent within a trajectory.

    Returns int8 array of shape (n, probes, dim) with entries +/-1.
    """
    out = np.empty((len(sample_indices), probes, dim), dtype=np.int8)
    for row, idx in enumerate(sample_indices):
        rng = np.random.default_rng((seed, 0x48, idx))
        out[row] = rng.integers(0, 2, size=(probes, dim), dtype=np.int8) * 2 - 1
    return out


def _hutchinson_trace_field(flow, q, p, t, eps_bank):
    """Rademacher estimate of the restricted Jacobian trace, batched.

    ``eps_bank`` holds the per-sample probes: (n, probes, d) for a batch or
    (probes, d) for a single state.
    """
    tape = Tape()
    qv, pv = tape.var(q), tape.var(p)
    fq, fp = flow.eval_field_taped(qv, pv, t)
    batch = q.ndim == 2
    est = np.zeros(q.shape[0]) if batch else 0.0
    dq = q.shape[-1]
    probes = eps_bank.shape[-2]
    for j in range(probes):
        eps = eps_bank[..., j, :].astype(np.float64)
        eq, ep = eps[..., :dq], eps[..., dq:]
        gq, gp = ad.grad(fq, eq, [qv, pv])
        gq2, gp2 = ad.grad(fp, ep, [qv, pv])
        vjp_q = gq + gq2
        vjp_p = gp + gp2
        est = est + (vjp_q * eq).sum(axis=-1) + (vjp_p * ep).sum(axis=-1)
    return est / probes


def rk4_integrate(flow: VerletFlow, state: PhaseState, cfg: IntegratorConfig,
                  hutchinson_eps=None):
    """Classic RK4 on (q, p, l) with dl/dt = -tr J of the field.

    ``hutchinson_eps`` optionally supplies the probe bank (as produced by
    ``rademacher_probes``); otherwise it is built from cfg.seed with
    per-sample splitting at offset zero.
    """
    if cfg.method not in (RK4_EXACT, RK4_HUTCHINSON):
        raise ValueError(f"rk4_integrate got method {cfg.method!r}")
    if abs(state.t - cfg.t0) > 1e-12:
        raise ValueError(f"state.t={state.t} != cfg.t0={cfg.t0}")
    start = time.perf_counter()
    tau = cfg.tau
    q = _value(state.q).copy()
    p = _value(state.p).copy()
    batch = q.ndim == 2
    ell = np.zeros(q.shape[0]) if batch else 0.0
    if cfg.method == RK4_HUTCHINSON and hutchinson_eps is None:
        n = q.shape[0] if batch else 1
        hutchinson_eps = rademacher_probes(
            cfg.seed, range(n), cfg.hutchinson_probes,
            q.shape[-1] + p.shape[-1],
        )
    counters = 0

    def deriv(qq, pp, t):
        nonlocal counters
        st = PhaseState(q=qq, p=pp, t=min(max(t, 0.0), 1.0))
        fq, fp = flow.eval_field(st)
        if cfg.method == RK4_EXACT:
            tr = _exact_trace(flow, qq, pp, st.t)
        else:
            bank = hutchinson_eps if batch else hutchinson_eps[0]
            tr = _hutchinson_trace_field(flow, qq, pp, st.t, bank)
        counters += 1
        return fq, fp, -tr

    t = cfg.t0
    for i in range(cfg.steps):
        k1 = deriv(q, p, t)
        k2 = deriv(q + 0.5 * tau * k1[0], p + 0.5 * tau * k1[1], t + 0.5 * tau)
        k3 = deriv(q + 0.5 * tau * k2[0], p + 0.5 * tau * k2[1], t + 0.5 * tau)
        k4 = deriv(q + tau * k3[0], p + tau * k3[1], t + tau)
        q = q + tau / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + tau / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        ell = ell + tau / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise IntegrationError(f"non-finite state at step {i}", step=i)
        t = cfg.t0 + (i + 1) * tau
    final = PhaseState(q=q, p=p, t=cfg.t1, dlogp=ell)
    return IntegrationResult(
        state=final,
        dlogp=ell,
        wall_time=time.perf_counter() - start,
        step_count=cfg.steps,
        field_evaluations=counters,
    )


def integrate(flow, state, cfg, hutchinson_eps=None):
    """Dispatch on cfg.method."""
    if cfg.method == TAYLOR_VERLET:
        return verlet_integrate(flow, state, cfg)
    return rk4_integrate(flow, state, cfg, hutchinson_eps=hutchinson_eps)
