"""Analytic toy densities: isotropic Gaussian mixtures, their augmented
phase-space extensions, and unnormalized variants with a known partition
constant for end-to-end checks of the importance-sampling estimator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


def standard_normal_logpdf(x):
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    return -0.5 * (x * x).sum(axis=-1) - 0.5 * d * LOG_2PI


@dataclass
class Gmm:
    """Mixture of isotropic Gaussians: (weight, mean, variance) per component."""

    weights: np.ndarray
    means: np.ndarray  # (n_components, dim)
    variances: np.ndarray  # (n_components,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()}, not 1")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")
        if not (len(self.weights) == len(self.means) == len(self.variances)):
            raise ValueError("component count mismatch")

    @property
    def dim(self):
        return self.means.shape[1]

    def log_density(self, x):
        x = np.asarray(x, dtype=np.float64)
        diff = x[..., None, :] - self.means  # (..., n_comp, dim)
        sq = (diff * diff).sum(axis=-1)
        comp_logpdf = (
            -0.5 * sq / self.variances
            - 0.5 * self.dim * (LOG_2PI + np.log(self.variances))
        )
        return logsumexp(comp_logpdf + np.log(self.weights), axis=-1)

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[idx] + np.sqrt(self.variances[idx])[:, None] * noise


def standard_normal(dim):
    """Standard normal as a one-component mixture."""
    return Gmm(np.array([1.0]), np.zeros((1, dim)), np.array([1.0]))


@dataclass
class AugmentedDensity:
    """Joint density pi(q, p) = q_density(q) * N(p; 0, I)."""

    q_density: Gmm
    d_p: int

    def log_density(self, q, p):
        return self.q_density.log_density(q) + standard_normal_logpdf(p)

    def sample(self, n, seed):
        rng = np.random.default_rng(seed)
        q = self.q_density.sample(n, rng.integers(2**63))
        p = rng.standard_normal((n, self.d_p))
        return q, p


@dataclass
class UnnormalizedDensity:
    """log pi_hat(x) = log pi_base(x) + logZ_true, with logZ_true injected
    deliberately so the partition-constant estimator has a known answer."""

    base: object  # Gmm or AugmentedDensity
    logZ_true: float = float(np.log(2.0))

    def log_density(self, *x):
        return self.base.log_density(*x) + self.logZ_true


def default_trimodal(variance=0.3):
    """The default two-dimensional trimodal target (configuration defaults,
    not values taken from any publication)."""
    return Gmm(
        weights=np.array([1.0, 1.0, 1.0]) / 3.0,
        means=np.array([[-2.5, -1.0], [2.5, -1.0], [0.0, 2.0]]),
        variances=np.array([variance, variance, variance]),
    )
