"""Decision procedures built on ell/q values, and the posterior-FDR functional.

Three procedures share one interface:

* ``ell``: reject coordinate i when ell_i < t (plain thresholding);
* ``cl``: reject the k-hat smallest ell values, where k-hat is the largest
  count whose ranked prefix mean stays <= t (equivalently, threshold at
  lambda-hat, the largest ell-threshold keeping the posterior FDR <= t);
* ``qval``: reject when q_i < t.

The posterior FDR of a rejection set is the mean of the selected ell values
(with the usual max(1, #rejections) guard), so the ``cl`` construction makes
post_fdr(ell, reject) <= t hold deterministically on every dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimator, mixture
from .estimator import WeightEstimate

PROCEDURES = ("ell", "cl", "qval")


@dataclass(frozen=True)
class Decision:
    """One procedure's rejection set plus the threshold bookkeeping.

    ``lambda_used`` is the ell-threshold for ``ell`` and ``cl`` (for ``cl``
    it equals the (k_hat+1)-th smallest ell value, or 1 when everything is
    rejected) and the q-threshold t for ``qval``.  ``tied`` flags exact ties
    among the ell values, a zero-probability event under continuous data;
    ties are broken by original index.
    """

    reject: np.ndarray
    lambda_used: float
    k_hat: int
    w_used: float
    procedure_tag: str
    tied: bool = False


@dataclass(frozen=True)
class AnalysisResult:
    """Full per-dataset output: weight fit, ell/q vectors, all decisions."""

    n: int
    t: float
    weight: WeightEstimate
    ell: np.ndarray
    q: np.ndarray
    decisions: dict[str, Decision] = field(default_factory=dict)

    @property
    def w_hat(self) -> float:
        return self.weight.w_hat

    @property
    def lambda_hat(self) -> float:
        return self.decisions["cl"].lambda_used

    @property
    def k_hat(self) -> int:
        return self.decisions["cl"].k_hat


def _validate_level(t: float) -> float:
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError("level t must lie in (0, 1)")
    return t


def post_fdr(ell, reject) -> float:
    """Mean of the selected ell values: sum(ell_i * reject_i) / max(1, #rej).

    Uses a compensated sum so the value agrees exactly with the prefix sums
    used to construct the ``cl`` rejection set, whatever the index order.
    """
    ell = np.asarray(ell, dtype=float)
    reject = np.asarray(reject, dtype=bool)
    if ell.shape != reject.shape:
        raise ValueError("ell and reject must have equal length")
    k = int(reject.sum())
    if k == 0:
        return 0.0
    return math.fsum(ell[reject]) / k


def ell_procedure(ell, t: float, w_used: float = math.nan) -> Decision:
    """Threshold the ell values at t."""
    t = _validate_level(t)
    ell = np.asarray(ell, dtype=float)
    reject = ell < t
    return Decision(
        reject=reject,
        lambda_used=t,
        k_hat=int(reject.sum()),
        w_used=w_used,
        procedure_tag="ell",
    )


def _k_hat_sorted(ell_sorted: np.ndarray, t: float) -> int:
    """Largest k with mean of the k smallest ell values <= t (k = 0 allowed).

    Prefix means of sorted values are nondecreasing, so k is located by the
    first crossing of the running mean above t; two compensated-sum guards
    absorb any last-ulp disagreement between the cumulative sums and the
    order-independent sums used by :func:`post_fdr`.
    """
    n = ell_sorted.size
    prefix = np.cumsum(ell_sorted)
    above = np.nonzero(prefix > t * np.arange(1, n + 1))[0]
    k = int(above[0]) if above.size else n
    while k > 0 and math.fsum(ell_sorted[:k]) > t * k:
        k -= 1
    while k < n and math.fsum(ell_sorted[: k + 1]) <= t * (k + 1):
        k += 1
    return k


def cl_procedure(ell, t: float, w_used: float = math.nan) -> Decision:
    """Reject the k-hat smallest ell values (cumulative local-fdr rule).

    If even the full-vector mean stays <= t then k_hat = n and the threshold
    is reported as 1.  Ties among ell values are broken by original index
    and flagged on the decision.
    """
    t = _validate_level(t)
    ell = np.asarray(ell, dtype=float)
    n = ell.size
    order = np.argsort(ell, kind="stable")
    ell_sorted = ell[order]
    k = _k_hat_sorted(ell_sorted, t)
    reject = np.zeros(n, dtype=bool)
    reject[order[:k]] = True
    lam = float(ell_sorted[k]) if k < n else 1.0
    tied = bool(np.any(np.diff(ell_sorted) == 0.0))
    return Decision(
        reject=reject,
        lambda_used=lam,
        k_hat=k,
        w_used=w_used,
        procedure_tag="cl",
        tied=tied,
    )


def lambda_hat(ell, t: float) -> float:
    """The largest ell-threshold whose rejection set keeps post_fdr <= t.

    Equals the (k_hat+1)-th order statistic of the ell values (or 1 when
    k_hat = n); satisfies the dichotomy
    post_fdr(threshold at lam) <= t  iff  lam <= lambda_hat, and is >= t.
    """
    return cl_procedure(ell, t).lambda_used


def q_procedure(q, t: float, w_used: float = math.nan) -> Decision:
    """Threshold the q values at t."""
    t = _validate_level(t)
    q = np.asarray(q, dtype=float)
    reject = q < t
    return Decision(
        reject=reject,
        lambda_used=t,
        k_hat=int(reject.sum()),
        w_used=w_used,
        procedure_tag="qval",
    )


def q_rejections_by_tail_threshold(x, w: float, t: float) -> np.ndarray:
    """The q-value rejection set in its equivalent |x|-threshold form.

    {q(x_i; w) < t} coincides with {|x_i| > chi(r(w, t))} whenever the odds
    product r(w, t) is <= 1 (the domain of chi); the two implementations are
    checked against each other in the tests.
    """
    t = _validate_level(t)
    x = estimator.as_observations(x)
    ru = mixture.odds_product(w, t)
    if ru > 1.0:
        raise ValueError("tail-threshold form requires odds_product(w, t) <= 1")
    return np.abs(x) > mixture.chi(ru)


def analyze(x, t: float, procedures=PROCEDURES) -> AnalysisResult:
    """Run the full pipeline: fit w, evaluate ell/q, apply the procedures."""
    t = _validate_level(t)
    x = estimator.as_observations(x)
    est = estimator.estimate_w(x)
    ell = estimator.ell_values(x, est.w_hat)
    q = estimator.q_values(x, est.w_hat)
    decisions: dict[str, Decision] = {}
    for tag in procedures:
        if tag == "ell":
            decisions[tag] = ell_procedure(ell, t, w_used=est.w_hat)
        elif tag == "cl":
            decisions[tag] = cl_procedure(ell, t, w_used=est.w_hat)
        elif tag == "qval":
            decisions[tag] = q_procedure(q, t, w_used=est.w_hat)
        else:
            raise ValueError(f"unknown procedure {tag!r}")
    return AnalysisResult(
        n=x.size, t=t, weight=est, ell=ell, q=q, decisions=decisions
    )
