"""Importance-sampling estimation of the partition constant.

The flow is the proposal: samples are drawn from the augmented standard
normal, pushed forward to t=1, and scored.  The importance weight is
pi_hat_aug(x) / pi_theta(x), whose mean under the proposal is Z; the
augmented target pi_hat_aug(q, p) = pi_hat(q) * N(p; 0, I) integrates to
the same Z as the unaugmented pi_hat.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .densities import UnnormalizedDensity, standard_normal_logpdf
from .flow import PhaseState, VerletFlow
from .integrators import (
    RK4_HUTCHINSON,
    TAYLOR_VERLET,
    IntegrationError,
    IntegratorConfig,
    integrate,
    rademacher_probes,
)

SD_BATCHES = 10


@dataclass
class WeightReport:
    log_weights: np.ndarray
    logZ_curve: list  # (m, logZ estimate at m, SD over sub-batches)
    method: str
    wall_seconds: float
    seed: int
    invalid_count: int = 0
    unreliable: bool = False

    @property
    def logZ(self):
        return self.logZ_curve[-1][1]

    @property
    def sd(self):
        return self.logZ_curve[-1][2]


def log_mean_exp(logs):
    """Stable log of the mean of exponentials (max subtracted first)."""
    logs = np.asarray(logs, dtype=np.float64)
    return float(logsumexp(logs) - np.log(logs.size))


def draw_source(d_q, d_p, n, seed):
    """n augmented-source draws, seeded per sample from (seed, index) so the
    stream is independent of batching and worker count."""
    children = np.random.SeedSequence(seed).spawn(n)
    x = np.empty((n, d_q + d_p))
    for i, child in enumerate(children):
        x[i] = np.random.default_rng(child).standard_normal(d_q + d_p)
    return x[:, :d_q], x[:, d_q:]


def _chunk_log_weights(flow, target, cfg, n_total, lo, hi):
    """Log-weights for sample indices [lo, hi) of an n_total-sample run."""
    children = np.random.SeedSequence(cfg.seed).spawn(n_total)[lo:hi]
    m = hi - lo
    x = np.empty((m, flow.d_q + flow.d_p))
    for i, child in enumerate(children):
        x[i] = np.random.default_rng(child).standard_normal(x.shape[1])
    q0, p0 = x[:, : flow.d_q], x[:, flow.d_q :]
    logpi0 = standard_normal_logpdf(x)
    eps = None
    if cfg.method == RK4_HUTCHINSON:
        eps = rademacher_probes(
            cfg.seed, range(lo, hi), cfg.hutchinson_probes,
            flow.d_q + flow.d_p,
        )
    try:
        res = integrate(flow, PhaseState(q=q0, p=p0, t=cfg.t0), cfg,
                        hutchinson_eps=eps)
        q1, p1 = res.state.q, res.state.p
        lw = (
            target.log_density(q1)
            + standard_normal_logpdf(p1)
            - (logpi0 + res.dlogp)
        )
    except IntegrationError:
        # whole-chunk failure: fall back to per-sample integration so that
        # only the offending samples are excluded
        lw = np.full(m, np.nan)
        q1 = np.full_like(q0, np.nan)
        p1 = np.full_like(p0, np.nan)
        for i in range(m):
            try:
                res = integrate(
                    flow, PhaseState(q=q0[i], p=p0[i], t=cfg.t0), cfg,
                    hutchinson_eps=None if eps is None else eps[i : i + 1],
                )
            except IntegrationError:
                continue
            q1[i], p1[i] = res.state.q, res.state.p
            lw[i] = (
                target.log_density(res.state.q)
                + standard_normal_logpdf(res.state.p)
                - (logpi0[i] + res.dlogp)
            )
    return lw, q1, p1


def log_weights(flow: VerletFlow, target: UnnormalizedDensity, n, cfg,
                workers=1, return_states=False):
    """n importance log-weights.

    Draws, probes and therefore every weight are split per sample from
    (seed, sample-index), so the result is byte-identical for any worker
    count.  Integration failures mark weights invalid (NaN) rather than
    substituting values.
    """
    if workers <= 1:
        lw, q1, p1 = _chunk_log_weights(flow, target, cfg, n, 0, n)
    else:
        from concurrent.futures import ProcessPoolExecutor

        bounds = np.linspace(0, n, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    _chunk_log_weights,
                    [flow] * workers, [target] * workers, [cfg] * workers,
                    [n] * workers, bounds[:-1], bounds[1:],
                )
            )
        lw = np.concatenate([part[0] for part in parts])
        q1 = np.concatenate([part[1] for part in parts])
        p1 = np.concatenate([part[2] for part in parts])
    if return_states:
        return lw, (q1, p1)
    return lw


def log_weight(flow, target, sample_seed, cfg):
    """Single-sample log importance weight (draw, push forward, score)."""
    from dataclasses import replace

    lw = log_weights(flow, target, 1, replace(cfg, seed=sample_seed))
    return float(lw[0])


def _curve_points(n):
    pts = []
    m = 10
    while m < n:
        pts.append(m)
        m *= 10
    pts.append(n)
    return pts


def estimate_logZ(flow, target, n, cfg, method=None, workers=1):
    """Running log Z curve from n log-weights.

    The SD at each sample count m is the standard deviation of the
    sub-estimates from ``SD_BATCHES`` equal contiguous chunks of the first
    m weights; per-sample seeding makes the chunks independent batches.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if method is not None:
        from dataclasses import replace

        cfg = replace(cfg, method=method)
    start = time.perf_counter()
    lw = log_weights(flow, target, n, cfg, workers=workers)
    wall = time.perf_counter() - start
    valid = np.isfinite(lw)
    invalid = int(n - valid.sum())
    curve = []
    for m in _curve_points(n):
        head = lw[:m][np.isfinite(lw[:m])]
        if head.size == 0:
            curve.append((m, np.nan, np.nan))
            continue
        est = log_mean_exp(head)
        if head.size >= SD_BATCHES:
            chunks = np.array_split(head, SD_BATCHES)
            sub = [log_mean_exp(c) for c in chunks]
            sd = float(np.std(sub, ddof=1))
        else:
            sd = float("nan")
        curve.append((m, est, sd))
    return WeightReport(
        log_weights=lw,
        logZ_curve=curve,
        method=cfg.method,
        wall_seconds=wall,
        seed=cfg.seed,
        invalid_count=invalid,
        unreliable=invalid > 0.01 * n,
    )


def benchmark(flow, target, n, methods, cfg):
    """Per-method wall time and log Z curve on identical seeds."""
    deduped = list(dict.fromkeys(methods))
    if len(deduped) < len(methods):
        warnings.warn("duplicate methods removed from benchmark")
    if len(deduped) < 2:
        raise ValueError("benchmark needs at least 2 distinct methods")
    return {m: estimate_logZ(flow, target, n, cfg, method=m) for m in deduped}
