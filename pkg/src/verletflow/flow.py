"""Phase-space state and the order-N Verlet flow parameterization.

The vector field has truncated Taylor form per side: the q-component is
``sum_k s_k^q(p, t) applied to q^k`` and symmetrically for p.  Each Taylor
coefficient ``s_k`` is a small MLP of the opposite variable with the time
appended as one raw scalar feature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Mlp, Var


class OrderError(ValueError):
    pass


class NumericError(RuntimeError):
    """Non-finite value produced during evaluation."""


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p, t) in phase-time space plus the accumulated log-density
    change.  ``q``/``p`` are vectors ``(d,)`` or batches ``(n, d)``; during
    taped integration they may be autodiff Vars."""

    q: object
    p: object
    t: float
    dlogp: object = 0.0

    def __post_init__(self):
        if not isinstance(self.q, Var):
            object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        if not isinstance(self.p, Var):
            object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64))
        q, p = _value(self.q), _value(self.p)
        if q.shape[-1] < 1 or p.shape[-1] < 1:
            raise ValueError("q and p must each have dimension >= 1")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite phase-space coordinates")
        if not 0.0 <= self.t <= 1.0 + 1e-12:
            raise ValueError(f"t={self.t} outside [0, 1]")

    @property
    def d_q(self):
        return _value(self.q).shape[-1]

    @property
    def d_p(self):
        return _value(self.p).shape[-1]

    def with_(self, **kw):
        return replace(self, **kw)


def _value(x):
    return x.value if isinstance(x, Var) else x


# output forms for the k=1 coefficient
DIAGONAL = "diagonal"
DENSE = "dense"


@dataclass
class CoefficientNet:
    """One Taylor coefficient s_k for a given side.

    Output form by order: k=0 vector, k=1 diagonal (default) or dense
    matrix, k>=2 the sparse on-diagonal tensor (a vector of per-component
    coefficients).
    """

    side: str  # "q" or "p"
    order: int
    net: Mlp
    form: str = DIAGONAL  # meaningful for order 1 only

    def __post_init__(self):
        if self.side not in ("q", "p"):
            raise ValueError(f"bad side {self.side!r}")
        if self.order < 0:
            raise OrderError(f"negative order {self.order}")
        if self.order == 1 and self.form not in (DIAGONAL, DENSE):
            raise ValueError(f"bad k=1 form {self.form!r}")

    def __call__(self, opposite, t):
        """Realize the coefficient at (opposite-variable, t); plain numpy."""
        opposite = np.asarray(opposite, dtype=np.float64)
        tcol = np.full(opposite.shape[:-1] + (1,), float(t))
        return self.net(np.concatenate([opposite, tcol], axis=-1))

    def taped(self, opposite, t, params=None):
        """Same as ``__call__`` but recorded on the opposite variable's tape."""
        x = ad.concat_last(opposite, np.array([float(t)]))
        return self.net.forward(x, params=params)


class VerletFlow:
    """An order-N bundle of coefficient nets defining the split vector field."""

    def __init__(self, d_q, d_p, order, q_nets, p_nets):
        if len(q_nets) != order + 1 or len(p_nets) != order + 1:
            raise ValueError("need exactly order+1 coefficient nets per side")
        for k, (cq, cp) in enumerate(zip(q_nets, p_nets)):
            if cq.order != k or cp.order != k:
                raise ValueError("coefficient net order mismatch")
            for c, d_self, d_opp in ((cq, d_q, d_p), (cp, d_p, d_q)):
                if c.net.in_dim != d_opp + 1:
                    raise ValueError(f"net input dim {c.net.in_dim} != {d_opp}+1")
                want = d_self * d_self if (k == 1 and c.form == DENSE) else d_self
                if c.net.out_dim != want:
                    raise ValueError(f"net output dim {c.net.out_dim} != {want}")
        self.d_q = d_q
        self.d_p = d_p
        self.order = order
        self.q_nets = list(q_nets)
        self.p_nets = list(p_nets)

    @classmethod
    def create(cls, d_q, d_p, order, hidden=(64, 64, 64), seed=0, k1_form=DIAGONAL):
        """Build a flow with freshly initialized coefficient nets."""
        hidden = list(hidden)
        nets = {"q": [], "p": []}
        sub = 0
        for side, d_self, d_opp in (("q", d_q, d_p), ("p", d_p, d_q)):
            for k in range(order + 1):
                out = d_self * d_self if (k == 1 and k1_form == DENSE) else d_self
                mlp = Mlp([d_opp + 1] + hidden + [out], seed=(seed, sub))
                form = k1_form if k == 1 else DIAGONAL
                nets[side].append(CoefficientNet(side, k, mlp, form))
                sub += 1
        return cls(d_q, d_p, order, nets["q"], nets["p"])

    @property
    def k1_form(self):
        if self.order >= 1:
            return self.q_nets[1].form
        return DIAGONAL

    @property
    def hidden_sizes(self):
        return self.q_nets[0].net.layer_sizes[1:-1]

    def nets(self, side):
        return self.q_nets if side == "q" else self.p_nets

    def coefficient(self, side, k, state: PhaseState):
        """Realized coefficient value s_k^side(opposite, t)."""
        if k > self.order:
            raise OrderError(f"order {k} > flow order {self.order}")
        opp = state.p if side == "q" else state.q
        return self.nets(side)[k](_value(opp), state.t)

    def zero_(self):
        """Zero every coefficient net's output layer (identity flow)."""
        for c in self.q_nets + self.p_nets:
            c.net.zero_()
        return self

    # -- field evaluation ---------------------------------------------------

    def eval_term(self, side, k, state: PhaseState):
        """One Taylor term: s_k applied k-fold to the same-side variable."""
        coeff = self.coefficient(side, k, state)
        x = _value(state.q if side == "q" else state.p)
        return apply_coefficient(coeff, x, k, self.nets(side)[k].form)

    def eval_field(self, state: PhaseState):
        """(dq/dt, dp/dt): the per-side sums over k = 0..order."""
        out = []
        for side in ("q", "p"):
            total = self.eval_term(side, 0, state)
            for k in range(1, self.order + 1):
                total = total + self.eval_term(side, k, state)
            if not np.all(np.isfinite(total)):
                bad = [
                    k
                    for k in range(self.order + 1)
                    if not np.all(np.isfinite(self.eval_term(side, k, state)))
                ]
                raise NumericError(f"non-finite {side}-field terms at orders {bad}")
            out.append(total)
        return tuple(out)

    def eval_field_taped(self, q, p, t):
        """Field evaluation through the tape; ``q``/``p`` are Vars."""
        out = []
        for side, x, opp in (("q", q, p), ("p", p, q)):
            nets = self.nets(side)
            total = None
            for k in range(self.order + 1):
                coeff = nets[k].taped(opp, t)
                term = apply_coefficient(coeff, x, k, nets[k].form)
                total = term if total is None else total + term
            out.append(total)
        return tuple(out)

    # -- parameter plumbing -------------------------------------------------

    def _all_nets(self):
        # canonical order: q-side k ascending, then p-side k ascending
        return [c.net for c in self.q_nets] + [c.net for c in self.p_nets]

    def get_params(self):
        return np.concatenate([m.get_params() for m in self._all_nets()])

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        i = 0
        for m in self._all_nets():
            m.set_params(flat[i : i + m.num_params])
            i += m.num_params
        if i != flat.size:
            raise ValueError(f"expected {i} parameters, got {flat.size}")

    @property
    def num_params(self):
        return sum(m.num_params for m in self._all_nets())


def apply_coefficient(coeff, x, k, form=DIAGONAL):
    """Apply a realized order-k coefficient to the same-side variable.

    Works on plain arrays and on autodiff Vars alike: k=0 ignores x, k=1
    is diagonal (elementwise) or dense (matrix-vector), k>=2 is the sparse
    on-diagonal contraction, an elementwise product with x^k.
    """
    if k == 0:
        return coeff
    if k == 1:
        if form == DENSE:
            cv = _value(coeff)
            d = _value(x).shape[-1]
            if isinstance(coeff, Var) or isinstance(x, Var):
                raise NotImplementedError("dense k=1 is inference-only")
            mat = cv.reshape(cv.shape[:-1] + (d, d))
            return np.einsum("...ij,...j->...i", mat, _value(x))
        return ad.mul(coeff, x)
    return ad.mul(coeff, ad.powc(x, k))


def dense_contraction_oracle(coeff_vector, x, k):
    """Full dense-tensor contraction of an on-diagonal (k,1)-tensor.

    Independent check for the sparse fast path: builds the k-way tensor
    with ``coeff_vector`` on its hyper-diagonal and contracts it against
    k copies of ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    tensor = np.zeros((d,) * (k + 1))
    for i in range(d):
        tensor[(i,) * (k + 1)] = coeff_vector[i]
    out = tensor
    for _ in range(k):
        out = out @ x
    return out
