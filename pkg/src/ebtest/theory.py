"""Deterministic theory-side quantities for the strong-signal regime.

For a problem size (n, s_n) with signal margin v_n and target level t, this
module computes the deterministic proxies that bracket the fitted weight and
the cumulative-procedure threshold with high probability:

* ``w_minus <= w_plus`` solve the expected-score balance
      sum_{i in S0} m1(theta_i, w) = (1 +/- nu_n) (n - s_n) mtilde(w),
  where mtilde(w) = -E_0[beta(X)/(1+w beta(X))] is the null mean of the
  score term and m1(tau, w) its mean under a signal at tau.
* ``lambda_minus < lambda_plus`` solve
      (n-s) F_w(lam) (E_0[ell_w' | ell_w < lam] - t) = t s +/- slack,
  with F_w(lam) = 2 Phibar(xi(r(w, lam))) the null law of the ell values.

All integrals are adaptive quadratures with analytic truncation: the score
term is bounded by 1/w, so truncating at zeta(w) + 20 leaves a tail below
Phibar(zeta(w)+20)/w, which is negligible at the 1e-10 tolerances used here.

Desk-scale caveat: the centred slack t*s - A*s*max(nu, rho, delta) of the
lambda_minus equation can be negative at small s_n (the rates are O(1)
there), in which case the equation has no solution on the branch where the
conditional expectation exceeds t.  The solver then returns the branch
boundary (the smallest lambda at which the conditional expectation reaches
t, i.e. the rhs -> 0+ limit of the solution) and flags the outcome.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.integrate import quad
from scipy.special import expit, logit

from . import mixture
from .estimator import score_term

_QUAD_LIMIT = 400
_LAMBDA_TOL = 1e-10
_W_REL_TOL = 1e-12
_MAX_DOUBLINGS = 60


class SolverError(RuntimeError):
    """A deterministic-equation solver could not bracket or converge."""


@dataclass(frozen=True)
class ProblemRegime:
    """Problem size and constants fixing all rate sequences.

    ``alpha`` scales nu_n; ``A`` is the slack multiplier in the two
    lambda equations.  Defaults alpha = 2 and A = 4t are recorded desk
    choices (any large-enough constants work asymptotically).
    """

    n: int
    s_n: int
    v_n: float
    t: float
    alpha: float = 2.0
    A: float | None = None

    def __post_init__(self):
        if not 1 <= self.s_n < self.n:
            raise ValueError("regime requires 1 <= s_n < n")
        if not 0.0 < self.t < 1.0:
            raise ValueError("regime requires t in (0, 1)")
        if self.v_n < 0.0:
            raise ValueError("regime requires v_n >= 0")
        if self.alpha <= 0.0:
            raise ValueError("regime requires alpha > 0")
        if self.A is None:
            object.__setattr__(self, "A", 4.0 * self.t)
        if self.A <= 0.0:
            raise ValueError("regime requires A > 0")
        if self.s_n < math.log(self.n) ** 3:
            warnings.warn(
                "s_n below (log n)^3: rate-level checks may be unreliable "
                "(consistency-level behaviour is unaffected)",
                stacklevel=2,
            )

    @property
    def boundary_magnitude(self) -> float:
        """Smallest admissible signal size: sqrt(2 log(n/s_n)) + v_n."""
        return math.sqrt(2.0 * math.log(self.n / self.s_n)) + self.v_n


@dataclass(frozen=True)
class RateSequences:
    """The four rate parameters of the regime."""

    nu_n: float
    delta_n: float
    eps_n: float
    rho_n: float


@dataclass(frozen=True)
class TheoryQuantities:
    """Deterministic proxies bracketing w-hat and lambda-hat."""

    w_minus: float
    w_plus: float
    lambda_minus: float
    lambda_plus: float
    F_wm_at_lp: float
    cond_exp_plus: float
    cond_exp_minus: float
    lambda_minus_at_branch_boundary: bool = False


@dataclass(frozen=True)
class QvalueBracketReport:
    """Observed gap between 2*Gbar(chi(r(w,t))) and mtilde(w)."""

    w: float
    t: float
    m_tilde: float
    two_g_bar: float
    ratio: float            # two_g_bar / m_tilde - 1
    normalized_ratio: float  # ratio * log(1/w) / loglog(1/w)


def rate_sequences(regime: ProblemRegime) -> RateSequences:
    """nu = alpha*sqrt(log s / s), delta = 1/log(n/s), eps = delta*loglog(n/s),
    rho = exp(-v^2/9)."""
    if regime.s_n < 2:
        raise ValueError("rate sequences require s_n >= 2")
    log_ratio = math.log(regime.n / regime.s_n)
    nu = regime.alpha * math.sqrt(math.log(regime.s_n) / regime.s_n)
    delta = 1.0 / log_ratio
    eps = delta * math.log(log_ratio)
    rho = math.exp(-regime.v_n * regime.v_n / 9.0)
    return RateSequences(nu_n=nu, delta_n=delta, eps_n=eps, rho_n=rho)


def m_tilde(w: float) -> float:
    """Null mean of minus the score term: -E_0[beta(X)/(1+w beta(X))].

    Positive and increasing in w; asymptotically of order 1/zeta(w).
    """
    if not 0.0 < w < 1.0:
        raise ValueError("m_tilde requires w in (0, 1)")
    z = mixture.zeta(w)
    cut = z + 20.0

    def integrand(x):
        return -float(score_term(np.float64(x), w)) * float(mixture.phi(x))

    val, _ = quad(
        integrand, 0.0, cut, points=[min(z, cut)], limit=_QUAD_LIMIT,
        epsabs=1e-13, epsrel=1e-12,
    )
    return 2.0 * val


def m_one(tau: float, w: float) -> float:
    """Mean of the score term under a signal at tau; even in tau, <= 1/w."""
    if not 0.0 < w < 1.0:
        raise ValueError("m_one requires w in (0, 1)")
    tau = abs(float(tau))
    z = mixture.zeta(w)
    cut = z + 20.0
    lo = min(-cut, tau - 40.0)
    hi = max(cut, tau + 40.0)
    pts = sorted(p for p in (-z, 0.0, z, tau) if lo < p < hi)

    def integrand(x):
        return float(score_term(np.float64(x), w)) * float(mixture.phi(x - tau))

    val, _ = quad(
        integrand, lo, hi, points=pts, limit=_QUAD_LIMIT,
        epsabs=1e-13, epsrel=1e-12,
    )
    return val


def F_w(w: float, lam: float) -> float:
    """Null probability of {ell(X; w) < lam}: 2*Phibar(xi(r(w, lam))).

    Returns 1 when r(w, lam) >= 2, where the sub-level event is the whole
    line.
    """
    if not (0.0 < w < 1.0 and 0.0 < lam < 1.0):
        raise ValueError("F_w requires arguments in (0, 1)")
    ru = mixture.odds_product(w, lam)
    if ru >= mixture.MAX_LIKELIHOOD_RATIO:
        return 1.0
    return 2.0 * float(mixture.phi_bar(mixture.xi(ru)))


def _one_minus_cond_ell(w1: float, w2: float, lam: float) -> float:
    """1 - E_0[ell(X; w1) | ell(X; w2) < lam], computed as a positive ratio.

    The complement 1 - ell(x; w1) integrates the slab share of the posterior,
    which preserves relative accuracy when the conditional expectation is
    close to 1.
    """
    ru = mixture.odds_product(w2, lam)
    x0 = 0.0 if ru >= mixture.MAX_LIKELIHOOD_RATIO else mixture.xi(ru)
    den = 2.0 * float(mixture.phi_bar(x0))
    if den == 0.0:
        raise SolverError("conditioning event has vanishing probability")
    z1 = mixture.zeta(w1)
    hi = max(x0, z1) + 40.0
    lw1 = float(logit(w1))

    def integrand(x):
        slab_share = float(
            expit(lw1 + float(mixture.log_g(x)) - float(mixture.log_phi(x)))
        )
        return slab_share * float(mixture.phi(x))

    pts = [p for p in (z1,) if x0 < p < hi]
    val, _ = quad(
        integrand, x0, hi, points=pts, limit=_QUAD_LIMIT,
        epsabs=1e-15, epsrel=1e-11,
    )
    return 2.0 * val / den


def cond_ell_expectation(w1: float, w2: float, lam: float) -> float:
    """E_0[ell(X; w1) | ell(X; w2) < lam]; increasing in lam.

    When r(w2, lam) >= 2 the conditioning event is the whole line and the
    unconditional mean is returned.
    """
    if not (0.0 < w1 < 1.0 and 0.0 < w2 < 1.0 and 0.0 < lam < 1.0):
        raise ValueError("cond_ell_expectation requires arguments in (0, 1)")
    return 1.0 - _one_minus_cond_ell(w1, w2, lam)


def solve_w_pm(regime: ProblemRegime, theta0_support_values) -> tuple[float, float]:
    """Solve the two expected-score balance equations for (w_minus, w_plus).

    The map w -> sum_i m1(theta_i, w) - (1 +/- nu)(n-s) mtilde(w) is strictly
    decreasing; the initial bracket is [s/n, C (s/n) sqrt(log(n/s))] with C
    doubled until the sign changes.  Relative tolerance 1e-12 in w.
    """
    support = np.abs(np.asarray(theta0_support_values, dtype=float))
    if support.size != regime.s_n:
        raise ValueError("support values must have length s_n")
    if np.any(support == 0.0):
        raise ValueError("support values must be nonzero")
    nu = rate_sequences(regime).nu_n
    n, s = regime.n, regime.s_n
    values, counts = np.unique(support, return_counts=True)

    def signal_sum(w: float) -> float:
        return float(sum(c * m_one(v, w) for v, c in zip(values, counts)))

    roots = []
    for sign in (+1.0, -1.0):
        mult = 1.0 + sign * nu

        def f(w: float) -> float:
            return signal_sum(w) - mult * (n - s) * m_tilde(w)

        lo = s / n
        if f(lo) <= 0.0:
            raise SolverError(
                f"expected-score balance not positive at w = s/n = {lo:g} "
                f"(multiplier {mult:g}); support too weak for this regime"
            )
        hi = lo * math.sqrt(math.log(n / s))
        doublings = 0
        while f(hi) > 0.0:
            hi *= 2.0
            doublings += 1
            if doublings > _MAX_DOUBLINGS:
                raise SolverError(
                    f"no sign change for w bracket after {_MAX_DOUBLINGS} "
                    f"doublings (multiplier {mult:g}, hi = {hi:g})"
                )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _W_REL_TOL * mid:
                break
        roots.append(0.5 * (lo + hi))
    w_minus, w_plus = roots
    return w_minus, w_plus


def _solve_lambda_one(
    n: int, s: int, t: float, w_num: float, w_cond: float, rhs: float
) -> tuple[float, bool]:
    """Solve (n-s) F_{w_num}(lam) (E[ell_{w_cond} | ell_{w_num} < lam] - t) = rhs.

    The left side is strictly increasing (from 0) on the branch where the
    conditional expectation exceeds t; for rhs <= 0 the branch boundary is
    returned with a flag (the rhs -> 0+ limit of the solution).
    """

    def cond(lam: float) -> float:
        return 1.0 - _one_minus_cond_ell(w_cond, w_num, lam)

    def lhs(lam: float) -> float:
        return (n - s) * F_w(w_num, lam) * (cond(lam) - t)

    hi = 1.0 - 1e-12
    if rhs <= 0.0:
        # Branch boundary: smallest lambda with cond(lam) >= t.
        lo = 1e-8
        if cond(lo) >= t:
            return lo, True
        if cond(hi) < t:
            raise SolverError(
                "conditional expectation never reaches t; no branch boundary"
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cond(mid) < t:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _LAMBDA_TOL:
                break
        return 0.5 * (lo + hi), True

    lo = t
    f_lo = lhs(lo) - rhs
    doublings = 0
    while f_lo >= 0.0:
        # Root sits below t (very congested regimes); grow the bracket down.
        lo *= 0.5
        f_lo = lhs(lo) - rhs
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise SolverError("could not bracket lambda from below")
    if lhs(hi) - rhs < 0.0:
        raise SolverError(
            f"lambda equation has no solution below 1 - 1e-12 (rhs = {rhs:g})"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lhs(mid) - rhs < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _LAMBDA_TOL:
            break
    return 0.5 * (lo + hi), False


def solve_lambda_pm(
    regime: ProblemRegime, w_minus: float, w_plus: float
) -> tuple[float, float, bool]:
    """Solve for (lambda_minus, lambda_plus); returns a clamp flag for minus.

    lambda_plus balances against t*s + A*s*nu; lambda_minus against
    t*s - A*s*max(nu, rho, delta).  The returned flag is True when the minus
    slack was nonpositive and the branch boundary was returned instead.
    """
    if not w_minus <= w_plus:
        raise ValueError("solve_lambda_pm requires w_minus <= w_plus")
    rates = rate_sequences(regime)
    n, s, t = regime.n, regime.s_n, regime.t
    rhs_plus = t * s + regime.A * s * rates.nu_n
    rhs_minus = t * s - regime.A * s * max(rates.nu_n, rates.rho_n, rates.delta_n)
    lam_plus, _ = _solve_lambda_one(n, s, t, w_minus, w_plus, rhs_plus)
    lam_minus, clamped = _solve_lambda_one(n, s, t, w_plus, w_minus, rhs_minus)
    if lam_minus >= lam_plus:
        raise SolverError(
            f"lambda ordering violated: {lam_minus:g} >= {lam_plus:g}"
        )
    return lam_minus, lam_plus, clamped


def default_support(regime: ProblemRegime) -> np.ndarray:
    """s_n signals all at the class boundary magnitude."""
    return np.full(regime.s_n, regime.boundary_magnitude)


def theory_quantities(
    regime: ProblemRegime, theta0_support_values=None
) -> TheoryQuantities:
    """Solve every proxy for the regime (boundary-magnitude support default)."""
    support = (
        default_support(regime)
        if theta0_support_values is None
        else theta0_support_values
    )
    w_minus, w_plus = solve_w_pm(regime, support)
    lam_minus, lam_plus, clamped = solve_lambda_pm(regime, w_minus, w_plus)
    return TheoryQuantities(
        w_minus=w_minus,
        w_plus=w_plus,
        lambda_minus=lam_minus,
        lambda_plus=lam_plus,
        F_wm_at_lp=F_w(w_minus, lam_plus),
        cond_exp_plus=cond_ell_expectation(w_plus, w_minus, lam_plus),
        cond_exp_minus=cond_ell_expectation(w_minus, w_plus, lam_minus),
        lambda_minus_at_branch_boundary=clamped,
    )


def expected_false_positives_q(regime: ProblemRegime, w: float) -> float:
    """Expected false positives of q-thresholding at level t with weight w:
    2 (n - s) Phibar(chi(r(w, t))), valid for r(w, t) <= 1."""
    ru = mixture.odds_product(w, regime.t)
    if ru > 1.0:
        raise ValueError("expected_false_positives_q requires r(w, t) <= 1")
    return 2.0 * (regime.n - regime.s_n) * float(
        mixture.phi_bar(mixture.chi(ru))
    )


def check_qvalue_bracket(w: float, t: float) -> QvalueBracketReport:
    """Compare 2*Gbar(chi(r(w,t))) against mtilde(w) for small w.

    The gap, relative to mtilde, scales like loglog(1/w)/log(1/w); the
    report carries both the raw and the normalised ratio.
    """
    if not 0.0 < w <= 1e-2:
        raise ValueError("check_qvalue_bracket requires w in (0, 1e-2]")
    mt = m_tilde(w)
    two_gbar = 2.0 * float(mixture.g_bar(mixture.chi(mixture.odds_product(w, t))))
    ratio = two_gbar / mt - 1.0
    scale = math.log(math.log(1.0 / w)) / math.log(1.0 / w)
    return QvalueBracketReport(
        w=w, t=t, m_tilde=mt, two_g_bar=two_gbar,
        ratio=ratio, normalized_ratio=ratio / scale,
    )


def theory_report(regime: ProblemRegime, theta0_support_values=None) -> dict:
    """JSON-ready report: proxies, rates, and the bracket-check ratios."""
    rates = rate_sequences(regime)
    tq = theory_quantities(regime, theta0_support_values)
    ev_ratio = F_w(tq.w_plus, tq.lambda_plus) / tq.F_wm_at_lp - 1.0
    report = {
        "regime": asdict(regime),
        "rates": asdict(rates),
        "quantities": asdict(tq),
        "ev_ratio_minus_one": ev_ratio,
        "rate_max": max(rates.nu_n, rates.rho_n, rates.delta_n),
    }
    if tq.w_minus <= 1e-2:
        report["qvalue_bracket"] = asdict(check_qvalue_bracket(tq.w_minus, regime.t))
    return report
