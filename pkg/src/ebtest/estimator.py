"""Per-dataset empirical Bayes quantities for the spike/slab mixture weight.

Given observations x (one per coordinate, unit-variance Gaussian noise), the
mixture weight w is fitted by marginal maximum likelihood over [1/n, 1], and
the per-coordinate null probabilities come in two flavours:

* local false-discovery values ("ell values"): posterior probability of the
  null given the observation itself;
* tail-based q values: posterior probability of the null given that the
  observation is at least as extreme as the one seen.

The log-likelihood is L(w) = sum_i log((1-w) phi(x_i) + w g(x_i)) and its
derivative, the score S(w) = sum_i beta(x_i) / (1 + w beta(x_i)), is strictly
decreasing in w whenever some beta(x_i) != 0, which holds almost surely.  The
MLE is therefore located by the score sign at the interval endpoints plus a
bisection in the interior; no general-purpose optimiser is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from . import mixture

#: ell/q values are clamped into this range so downstream logs and ratios
#: never see an exact 0 or 1.
CLAMP_LO = 1e-300
CLAMP_HI = 1.0 - 1e-16

_W_TOL = 1e-10
_MAX_ITER = 200


@dataclass(frozen=True)
class WeightEstimate:
    """Result of the marginal maximum-likelihood fit of the mixture weight."""

    w_hat: float
    at_lower_boundary: bool
    at_upper_boundary: bool
    score_at_w_hat: float
    iterations: int


@dataclass(frozen=True)
class PosteriorSummaries:
    """Per-coordinate null probabilities at a common weight ``w_used``."""

    ell: np.ndarray
    q: np.ndarray
    w_used: float


def as_observations(x) -> np.ndarray:
    """Validate and return observations as a 1-d float array (n >= 1)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = np.atleast_1d(arr.squeeze())
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("observations must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations must be finite")
    return arr


def score_term(x, w: float):
    """beta(x)/(1 + w*beta(x)), evaluated as 1/(w + 1/beta(x)).

    The reciprocal form is exact where beta is finite and degrades gracefully
    to 1/w where beta overflows (|x| beyond ~38.6); the term is bounded by
    -1/(2-w) below and 1/w above.
    """
    b = mixture.beta(x)
    with np.errstate(divide="ignore"):
        return 1.0 / (w + 1.0 / b)


def log_likelihood(x, w: float) -> float:
    """Marginal log-likelihood of the mixture weight w on data x.

    Each term is assembled in log space (logaddexp of the two mixture
    branches) so that large |x_i| cannot underflow, and the sum is
    compensated, so the result does not depend on summation order.
    """
    x = as_observations(x)
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if w == 0.0:
        terms = mixture.log_phi(x)
    elif w == 1.0:
        terms = mixture.log_g(x)
    else:
        terms = np.logaddexp(
            math.log1p(-w) + mixture.log_phi(x),
            math.log(w) + mixture.log_g(x),
        )
    return math.fsum(terms)


def score(x, w: float) -> float:
    """Derivative of the log-likelihood in w; strictly decreasing a.s."""
    x = as_observations(x)
    if not 0.0 < w <= 1.0:
        raise ValueError("w must lie in (0, 1]")
    return float(np.sum(score_term(x, w)))


def estimate_w(x) -> WeightEstimate:
    """Maximise the marginal likelihood over w in [1/n, 1].

    The score is strictly decreasing, so the maximiser is the lower endpoint
    when S(1/n) <= 0, the upper endpoint when S(1) >= 0, and otherwise the
    unique interior root of S, bisected to width 1e-10.
    """
    x = as_observations(x)
    n = x.size
    b = mixture.beta(x)

    def s(w: float) -> float:
        with np.errstate(divide="ignore"):
            return float(np.sum(1.0 / (w + 1.0 / b)))

    lo = 1.0 / n
    s_lo = s(lo)
    if s_lo <= 0.0:
        return WeightEstimate(lo, True, False, s_lo, 0)
    hi = 1.0
    s_hi = s(hi)
    if s_hi >= 0.0:
        return WeightEstimate(hi, False, True, s_hi, 0)

    iterations = 0
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        iterations += 1
        if s(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _W_TOL:
            break
    w_hat = 0.5 * (lo + hi)
    return WeightEstimate(w_hat, False, False, s(w_hat), iterations)


def ell_values(x, w: float) -> np.ndarray:
    """Local fdr values ell(x_i; w) = (1-w)phi / ((1-w)phi + w g), clamped.

    Computed as a logistic transform of the log likelihood-ratio so that the
    far tail (where phi underflows) keeps its ordering.
    """
    x = as_observations(x)
    if not 0.0 < w < 1.0:
        # Degenerate endpoints are well-defined limits; allow them but note
        # that every value collapses to a clamp boundary.
        if w not in (0.0, 1.0):
            raise ValueError("w must lie in [0, 1]")
        vals = np.full(x.shape, 1.0 if w == 0.0 else 0.0)
        return np.clip(vals, CLAMP_LO, CLAMP_HI)
    u = logit(w) + mixture.log_g(x) - mixture.log_phi(x)
    return np.clip(expit(-u), CLAMP_LO, CLAMP_HI)


def q_values(x, w: float) -> np.ndarray:
    """Tail-based null probabilities q(x_i; w), clamped like the ell values.

    q(x; w) = (1-w)Phibar(|x|) / ((1-w)Phibar(|x|) + w Gbar(|x|)), with the
    Phibar/Gbar ratio formed in log space for tail stability.
    """
    x = as_observations(x)
    if not 0.0 < w < 1.0:
        if w not in (0.0, 1.0):
            raise ValueError("w must lie in [0, 1]")
        vals = np.full(x.shape, 1.0 if w == 0.0 else 0.0)
        return np.clip(vals, CLAMP_LO, CLAMP_HI)
    ax = np.abs(x)
    u = logit(w) + np.log(mixture.g_bar(ax)) - mixture.log_phi_bar(ax)
    return np.clip(expit(-u), CLAMP_LO, CLAMP_HI)


def posterior_summaries(x, w: float) -> PosteriorSummaries:
    """Bundle ell and q vectors evaluated at a common weight."""
    return PosteriorSummaries(ell=ell_values(x, w), q=q_values(x, w), w_used=float(w))
