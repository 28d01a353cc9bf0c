"""Verlet flows: continuous normalizing flows on an augmented (q, p) space
with exact-likelihood Taylor-Verlet integrators and an importance-sampling
harness for partition-constant estimation."""

from .autodiff import Mlp, Tape, Var, backward, jacobian
from .couplings import CouplingLayer, apply_coupling, as_verlet_steps
from .densities import AugmentedDensity, Gmm, UnnormalizedDensity, default_trimodal
from .flow import CoefficientNet, PhaseState, VerletFlow
from .importance import WeightReport, benchmark, estimate_logZ, log_weights
from .integrators import (
    IntegrationResult,
    IntegratorConfig,
    hutchinson_trace,
    integrate,
    rk4_integrate,
    verlet_integrate,
)
from .operators import OperatorStep, SingularityError, apply_step, invert_step
from .persist import Config, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainReport, nll_batch, train

__version__ = "0.1.0"

__all__ = [
    "AugmentedDensity",
    "CoefficientNet",
    "Config",
    "CouplingLayer",
    "Gmm",
    "IntegrationResult",
    "IntegratorConfig",
    "Mlp",
    "OperatorStep",
    "PhaseState",
    "SingularityError",
    "Tape",
    "TrainConfig",
    "TrainReport",
    "UnnormalizedDensity",
    "Var",
    "VerletFlow",
    "WeightReport",
    "apply_coupling",
    "apply_step",
    "as_verlet_steps",
    "backward",
    "benchmark",
    "default_trimodal",
    "estimate_logZ",
    "hutchinson_trace",
    "integrate",
    "invert_step",
    "jacobian",
    "load_checkpoint",
    "log_weights",
    "nll_batch",
    "rk4_integrate",
    "save_checkpoint",
    "train",
    "verlet_integrate",
]
