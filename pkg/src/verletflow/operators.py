"""Closed-form split updates for one Taylor term, their inverses, and their
exact log-determinants.

Each operator acts on one side (q or p) with the coefficient realized at the
current opposite variable and time, which a same-side step never touches, so
forward steps are exactly invertible by re-evaluating the coefficient.

All functions accept plain arrays (vector or batch) or autodiff Vars; the
log-det is returned per sample (a scalar for vector inputs, shape ``(n,)``
for batches).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var

SINGULARITY_MARGIN = 1e-12


class SingularityError(RuntimeError):
    """A k>=2 step hit the singular set; the step is rejected, never clamped."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class UnsupportedModeError(RuntimeError):
    """Dense k=1 steps are inference-only."""


@dataclass
class OperatorStep:
    """One realized split update: side, order, duration and coefficient."""

    side: str
    order: int
    tau: float
    coeff: np.ndarray
    form: str = "diagonal"  # order-1 only


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _zeros_like_logdet(x):
    v = _value(x)
    return np.zeros(v.shape[:-1])


# ---------------------------------------------------------------------------
# order 0: translation


def apply_order0(x, s0, tau):
    """x + tau * s0; log-det is exactly zero."""
    return x + tau * s0, _zeros_like_logdet(x)


def invert_order0(x, s0, tau):
    return x - tau * s0, _zeros_like_logdet(x)


# ---------------------------------------------------------------------------
# order 1: elementwise (or dense) exponential scaling


def apply_order1(x, s1, tau, form="diagonal"):
    """exp(tau*s1) applied to x; log-det = tr(tau*s1).

    Diagonal form scales elementwise.  Dense form applies a true matrix
    exponential (scaling-and-squaring) and is inference-only.
    """
    if form == "dense":
        if isinstance(x, Var) or isinstance(s1, Var):
            raise UnsupportedModeError("dense k=1 steps cannot be taped")
        xv, sv = _value(x), _value(s1)
        d = xv.shape[-1]
        mats = sv.reshape(sv.shape[:-1] + (d, d))
        em = expm(tau * mats)
        y = np.einsum("...ij,...j->...i", em, xv)
        logdet = tau * np.trace(mats, axis1=-2, axis2=-1)
        return y, logdet
    scale = ad.exp(ad.mul(tau, s1))
    return ad.mul(scale, x), ad.mul(tau, ad.sum_last(s1))


def invert_order1(x, s1, tau, form="diagonal"):
    y, logdet = apply_order1(x, s1, -tau, form=form)
    return y, logdet


# ---------------------------------------------------------------------------
# sparse higher orders: componentwise ODE dx/dt = s * x^k, k >= 2
#
# The closed form is x' = (x^(1-k) + tau*(1-k)*s)^(1/(1-k)) componentwise.
# Because the base equals x'^(1-k), the tabulated log-det
#   sum_i [k/(1-k)] log|base_i| - k log|x_i|
# collapses to  k * sum_i (log|x'_i| - log|x_i|),  which is what we compute.
# The base must keep the sign of x^(1-k) throughout the step (a sign flip
# means the trajectory blew up); for k >= 3 the base is always positive and
# the output keeps the sign of x, since the odd-power ODE preserves sign.


def _orderk_transform(x, sk, k, tau):
    xv, sv = _value(x), _value(sk)
    small = np.abs(xv) <= SINGULARITY_MARGIN
    if np.any(small):
        comp = int(np.argwhere(small)[0][-1])
        raise SingularityError(
            f"zero coordinate in order-{k} step (component {comp})", component=comp
        )
    sgn = np.sign(xv)
    base0 = xv ** (1 - k)  # sign of x for even k, positive for odd k
    base1 = base0 + tau * (1 - k) * sv
    bad = (np.sign(base1) != np.sign(base0)) | (np.abs(base1) <= SINGULARITY_MARGIN)
    if np.any(bad):
        comp = int(np.argwhere(bad)[0][-1])
        raise SingularityError(
            f"order-{k} step base crosses zero (component {comp})", component=comp
        )
    # |base| via constant sign factors so the expression stays differentiable
    sgn_b = np.sign(base1)
    base = ad.add(ad.mul(sgn_b, ad.powc(x, 1 - k)), ad.mul(sgn_b * tau * (1 - k), sk))
    y = ad.mul(sgn, ad.powc(base, 1.0 / (1 - k)))
    logdet = float(k) * ad.sub(
        ad.sum_last(ad.log(ad.mul(sgn, y))), ad.sum_last(ad.log(ad.mul(sgn, x)))
    )
    return y, logdet


def apply_orderk(x, sk, k, tau):
    """Closed-form sparse higher-order update with exact per-sample log-det."""
    if k < 2:
        raise ValueError(f"apply_orderk needs k >= 2, got {k}")
    return _orderk_transform(x, sk, k, tau)


def invert_orderk(x, sk, k, tau):
    """Inverse closed form: the power chain reversed (duration negated)."""
    if k < 2:
        raise ValueError(f"invert_orderk needs k >= 2, got {k}")
    return _orderk_transform(x, sk, k, -tau)


# ---------------------------------------------------------------------------
# step dispatch


def apply_step(step: OperatorStep, x):
    if step.order == 0:
        return apply_order0(x, step.coeff, step.tau)
    if step.order == 1:
        return apply_order1(x, step.coeff, step.tau, form=step.form)
    return apply_orderk(x, step.coeff, step.order, step.tau)


def invert_step(step: OperatorStep, x):
    """Exact inverse of ``apply_step`` with the same realized coefficient.

    The returned log-det is the inverse map's own log-det, i.e. the negated
    forward contribution.
    """
    if step.order == 0:
        return invert_order0(x, step.coeff, step.tau)
    if step.order == 1:
        return invert_order1(x, step.coeff, step.tau, form=step.form)
    return invert_orderk(x, step.coeff, step.order, step.tau)


# ---------------------------------------------------------------------------
# dense matrix exponential (inference-only k=1 support)


def expm(a):
    """Matrix exponential by scaling-and-squaring with a degree-8 series.

    Scales by powers of two until the 1-norm is below 0.5, runs a truncated
    Taylor series, then squares back.  Supports stacked matrices ``(..., d, d)``.
    """
    a = np.asarray(a, dtype=np.float64)
    norm = np.abs(a).sum(axis=-2).max(axis=-1)
    max_norm = float(np.max(norm)) if norm.size else 0.0
    squarings = 0
    while max_norm > 0.5:
        max_norm /= 2.0
        squarings += 1
    b = a / (2.0 ** squarings)
    d = a.shape[-1]
    result = np.broadcast_to(np.eye(d), a.shape).copy()
    term = np.broadcast_to(np.eye(d), a.shape).copy()
    for i in range(1, 9):
        term = term @ b / i
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result
