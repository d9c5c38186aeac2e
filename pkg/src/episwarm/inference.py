"""Posterior updates, entropy-regularized tilts, information gain, strength dynamics.

The plain posterior update multiplies the prior by the likelihood vector and
renormalizes. The entropy-regularized variant tilts the same update toward a
uniform reference measure:

    out(h)  propto  prior(h) * L(obs | h) * (uniform(h) / prior(h))**beta

which reduces exactly to Bayes at beta = 0 and, for beta > 0, shifts mass
toward prior-disfavoured hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch, SupportViolation
from .likelihood import LikelihoodModel, Observation
from .spaces import Belief, kl_divergence, normalize_vector


@dataclass(frozen=True)
class InferenceConfig:
    """Per-run inference knobs.

    beta: entropy-regularization weight (>= 0).
    alpha_strength: global strength regularizer in (0, 1].
    gain_cap: cap on the per-step multiplicative strength ratio (> 0).
    """

    beta: float = 0.0
    alpha_strength: float = 1.0
    gain_cap: float = 10.0

    def __post_init__(self):
        if self.beta < 0:
            raise ShapeMismatch("beta must be >= 0")
        if not 0 < self.alpha_strength <= 1:
            raise ShapeMismatch("alpha_strength must lie in (0, 1]")
        if self.gain_cap <= 0:
            raise ShapeMismatch("gain_cap must be positive")


def posterior_update(prior: Belief, model: LikelihoodModel, obs: Observation) -> Belief:
    """Bayes: out(h) = prior(h) L(obs|h) / sum_h' prior(h') L(obs|h')."""
    like = model.likelihood_vector(obs)
    return Belief(prior.space, normalize_vector(prior.probs * like))


def sequential_update(prior: Belief, model: LikelihoodModel,
                      observations: Sequence[Observation]) -> Belief:
    """Left-to-right fold of posterior_update over a nonempty observation list."""
    if len(observations) == 0:
        raise ShapeMismatch("observation list must be nonempty")
    b = prior
    for obs in observations:
        b = posterior_update(b, model, obs)
    return b


def entropy_regularized_update(prior: Belief, model: LikelihoodModel, obs: Observation,
                               beta: float) -> Belief:
    """Uniform-reference tilted posterior; beta = 0 is exactly posterior_update."""
    if beta < 0:
        raise ShapeMismatch("beta must be >= 0")
    if beta == 0.0:
        return posterior_update(prior, model, obs)
    like = model.likelihood_vector(obs)
    p = prior.probs
    if beta > 1.0 and np.any(p <= 0.0):
        # prior(h)**(1 - beta) diverges on empty support for beta > 1
        raise SupportViolation("entropy tilt with beta > 1 requires a full-support prior")
    log_k = math.log(prior.k)
    with np.errstate(divide="ignore"):
        logp = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), -np.inf)
    logw = np.log(like) + (1.0 - beta) * logp - beta * log_k
    logw -= logw.max()
    return Belief(prior.space, normalize_vector(np.exp(logw)))


def information_gain(prior: Belief, posterior: Belief) -> float:
    """KL(posterior || prior): the epistemic update magnitude, >= 0."""
    return kl_divergence(posterior, prior)


def confidence_weight(gain: float) -> float:
    """Canonical confidence map f(gain) = 1 + gain; f(0) = 1, strictly increasing."""
    if not math.isfinite(gain):
        raise NonFiniteInput(f"gain must be finite, got {gain!r}")
    if gain < 0:
        raise NonFiniteInput("gain must be nonnegative")
    return 1.0 + gain


def strength_update(strength: float, weight: float, alpha_strength: float,
                    gain_cap: float = 10.0) -> float:
    """Multiplicative strength step alpha * weight, with per-step ratio capped."""
    ratio = min(alpha_strength * weight, gain_cap)
    return strength * ratio
