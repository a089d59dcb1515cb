"""Scalar functions of the two-group Gaussian/quasi-Cauchy mixture.

The null density is the standard normal ``phi``; the alternative marginal is
the quasi-Cauchy convolution density

    g(x) = (2*pi)**-0.5 * x**-2 * (1 - exp(-x**2 / 2)),

continuous at 0 with g(0) = phi(0)/2.  This module provides the densities,
their upper-tail functions, the likelihood-ratio transforms built from them,
and numerically robust inverses of the three monotone ratios used by the
testing procedures:

    xi   = (phi/g)^{-1}        on (0, 2],  extended by xi(u) = 0 for u >= 2
    zeta = beta^{-1}(1/.)      where beta = g/phi - 1
    chi  = (Phibar/Gbar)^{-1}  on (0, 1]

Everything is pure and stateless; all functions accept scalars or arrays.

Numerical notes
---------------
* ``g`` is evaluated cancellation-free near 0 (expm1, with a Taylor branch
  below 1e-4) and ``phi_bar`` goes through the complementary error function,
  never through ``1 - cdf``.
* ``beta`` switches to a log-space ratio for |x| > 30 because phi underflows
  around |x| ~ 39; beyond |x| ~ 38.6 the ratio itself overflows to inf,
  which downstream consumers must (and do) tolerate.
* ``phi_bar`` underflows to subnormals/zero for x beyond ~38; use
  ``log_phi_bar`` when relative accuracy is needed in the far tail.
* All inversions bisect the known-monotone ratio, bracket [0, 2] with the
  upper end doubled until the sign condition holds, stopping at interval
  width 1e-13 or 200 iterations.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

#: phi(0), the maximum of the null density.
PHI0 = 1.0 / SQRT_2PI
#: g(0) = phi(0)/2, the continuity value of the slab marginal at the origin.
G0 = PHI0 / 2.0
#: (phi/g)(0) = 2, the supremum of the null/alternative likelihood ratio.
MAX_LIKELIHOOD_RATIO = 2.0

_BISECT_WIDTH = 1e-13
_BISECT_MAX_ITER = 200
_G_TAYLOR_CUTOFF = 1e-4
_BETA_LOGSPACE_CUTOFF = 30.0


def phi(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return PHI0 * np.exp(-0.5 * x * x)


def log_phi(x):
    """log of the standard normal density; exact in the far tail."""
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def phi_bar(x):
    """Upper tail of the standard normal, via erfc (no 1 - cdf subtraction)."""
    x = np.asarray(x, dtype=float)
    return ndtr(-x)


def log_phi_bar(x):
    """log of the normal upper tail; keeps relative accuracy for x up to 40+."""
    x = np.asarray(x, dtype=float)
    return log_ndtr(-x)


def g(x):
    """Quasi-Cauchy marginal density, continuous at 0.

    Uses -expm1(-x^2/2)/x^2 away from the origin and a 3-term Taylor
    expansion for |x| < 1e-4, so no precision is lost to cancellation.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < _G_TAYLOR_CUTOFF
    xs = ax[small]
    x2 = xs * xs
    out[small] = PHI0 * (0.5 - x2 / 8.0 + x2 * x2 / 48.0)
    xl = ax[~small]
    out[~small] = PHI0 * (-np.expm1(-0.5 * xl * xl)) / (xl * xl)
    if out.ndim == 0:
        return float(out)
    return out


def _log1mexp(y):
    """log(1 - exp(-y)) for y > 0, switching forms at log 2 to avoid
    cancellation on either side."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(
            y <= math.log(2.0),
            np.log(-np.expm1(-np.minimum(y, math.log(2.0)))),
            np.log1p(-np.exp(-np.maximum(y, math.log(2.0)))),
        )


def log_g(x):
    """log of the quasi-Cauchy marginal; safe for arbitrarily large |x|."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < _G_TAYLOR_CUTOFF
    xs = ax[small]
    x2 = xs * xs
    out[small] = np.log(PHI0 * (0.5 - x2 / 8.0 + x2 * x2 / 48.0))
    xl = ax[~small]
    out[~small] = _log1mexp(0.5 * xl * xl) - 2.0 * np.log(xl) - LOG_SQRT_2PI
    if out.ndim == 0:
        return float(out)
    return out


def g_bar(x):
    """Upper tail of g for x >= 0, by the closed form x*g(x) + phi_bar(x).

    Extended by symmetry (Gbar(-x) = 1 - Gbar(x)) for negative arguments.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    pos = ax * g(ax) + phi_bar(ax)
    out = np.where(x >= 0, pos, 1.0 - pos)
    if out.ndim == 0:
        return float(out)
    return out


def log_g_bar(x):
    """log of the g upper tail for x >= 0 (Gbar decays only like 1/x)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("log_g_bar requires x >= 0")
    return np.log(g_bar(x))


def log_phi_over_g(x):
    """log of the likelihood ratio (phi/g)(x); strictly decreasing in |x|."""
    return log_phi(x) - log_g(x)


def beta(x):
    """beta(x) = g(x)/phi(x) - 1; even, minimum -1/2 at 0, increasing in |x|.

    For |x| > 30 the ratio is formed in log space (phi underflows near 39);
    the result overflows to inf for |x| beyond ~38.6, which is the honest
    double-precision answer.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    big = ax > _BETA_LOGSPACE_CUTOFF
    xs = ax[~big]
    out[~big] = g(xs) / phi(xs) - 1.0
    xb = ax[big]
    with np.errstate(over="ignore"):
        out[big] = np.exp(log_g(xb) - log_phi(xb)) - 1.0
    if out.ndim == 0:
        return float(out)
    return out


def odds_product(w, t):
    """r(w, t) = [w/(1-w)] * [t/(1-t)], the product of the two odds.

    Both arguments must lie strictly inside (0, 1).
    """
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any((w <= 0.0) | (w >= 1.0)) or np.any((t <= 0.0) | (t >= 1.0)):
        raise ValueError("odds_product arguments must lie in (0, 1)")
    out = (w / (1.0 - w)) * (t / (1.0 - t))
    if out.ndim == 0:
        return float(out)
    return out


def _invert_decreasing(log_ratio, log_target):
    """Solve log_ratio(x) = log_target for x >= 0, elementwise.

    ``log_ratio`` must be strictly decreasing on [0, inf).  Bracket starts at
    [0, 2]; the upper end doubles until the ratio falls below the target.
    """
    lt = np.asarray(log_target, dtype=float)
    scalar = lt.ndim == 0
    lt = np.atleast_1d(lt)
    lo = np.zeros_like(lt)
    hi = np.full_like(lt, 2.0)
    pending = log_ratio(hi) >= lt
    doublings = 0
    while pending.any():
        hi = np.where(pending, 2.0 * hi, hi)
        pending &= log_ratio(hi) >= lt
        doublings += 1
        if doublings > _BISECT_MAX_ITER:
            raise RuntimeError("bracket expansion failed in monotone inversion")
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        go_right = log_ratio(mid) >= lt
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
        if float(np.max(hi - lo)) < _BISECT_WIDTH:
            break
    out = 0.5 * (lo + hi)
    if scalar:
        return float(out[0])
    return out


def xi(u):
    """Inverse of the likelihood ratio: the unique x >= 0 with (phi/g)(x) = u.

    Defined for u > 0; returns 0 for u >= 2 (where the ratio never reaches u,
    so the sub-level event {phi/g < u} is the whole line).
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0):
        raise ValueError("xi requires u > 0")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.zeros_like(u)
    interior = u < MAX_LIKELIHOOD_RATIO
    if interior.any():
        out[interior] = _invert_decreasing(log_phi_over_g, np.log(u[interior]))
    if scalar:
        return float(out[0])
    return out


def zeta(w):
    """The unique x >= 0 with beta(x) = 1/w, for w in (0, 1].

    Bisects beta itself (in linear space), independently of :func:`xi`; the
    identity zeta(w) = xi(w/(1+w)) is checked in the test suite.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("zeta requires w > 0")
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    target = 1.0 / w

    lo = np.zeros_like(w)
    hi = np.full_like(w, 2.0)
    pending = beta(hi) < target
    doublings = 0
    while pending.any():
        hi = np.where(pending, 2.0 * hi, hi)
        pending &= beta(hi) < target
        doublings += 1
        if doublings > _BISECT_MAX_ITER:
            raise RuntimeError("bracket expansion failed in zeta")
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        go_right = beta(mid) < target
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
        if float(np.max(hi - lo)) < _BISECT_WIDTH:
            break
    out = 0.5 * (lo + hi)
    if scalar:
        return float(out[0])
    return out


def _log_tail_ratio(x):
    return log_phi_bar(x) - np.log(g_bar(np.abs(x)))


def chi(u):
    """Inverse of the tail ratio: the unique x >= 0 with (Phibar/Gbar)(x) = u.

    Defined on (0, 1]; chi(1) = 0.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u > 1.0)):
        raise ValueError("chi requires u in (0, 1]")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.zeros_like(u)
    interior = u < 1.0
    if interior.any():
        out[interior] = _invert_decreasing(_log_tail_ratio, np.log(u[interior]))
    if scalar:
        return float(out[0])
    return out


def g_bar_inv(u):
    """Inverse of the g upper tail on (0, 1/2]; used to sample |X| from g.

    The tail decays like phi(0)/x, so the preimage of a tiny u is huge; the
    bracket expansion copes with that.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u > 0.5)):
        raise ValueError("g_bar_inv requires u in (0, 1/2]")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = _invert_decreasing(lambda x: np.log(g_bar(x)), np.log(u))
    if scalar:
        return float(out[0])
    return out
