#!/usr/bin/env python3
"""Calibration sweep behind the frozen constants in the test suite.

Asymptotic statements of the form "a(x) is of the order of b(x)" are tested
as two-sided ratio checks a/b in [c, C].  The c, C values are not free
parameters of the method: they are measured once with this script against
the quadrature/inversion oracles, frozen into the tests, and never touched
again.  Rerun with ``python scripts/calibrate_constants.py`` to reproduce
every number.
"""

import math

import numpy as np

from ebtest import mixture as mx
from ebtest import theory as th


def sweep_zeta_bracket():
    print("== zeta(w)^2 - 2log(1/w) - 2loglog(1/w) ==")
    for w in np.logspace(-10, -2, 9):
        z = mx.zeta(w)
        print(f"  w={w:.0e}  excess={z*z - 2*math.log(1/w) - 2*math.log(math.log(1/w)):.4f}")


def sweep_chi_bound():
    print("== chi(u)^2 - (2log(1/u) - loglog(1/u)) ==")
    for u in np.logspace(-10, -2, 9):
        c = mx.chi(u)
        print(f"  u={u:.0e}  excess={c*c - (2*math.log(1/u) - math.log(math.log(1/u))):.4f}")


def sweep_m_tilde_zeta():
    print("== m_tilde(w) * zeta(w) ==")
    for w in np.logspace(-10, -2, 9):
        print(f"  w={w:.0e}  product={th.m_tilde(w) * mx.zeta(w):.6f}")


def m_tilde_trapezoid(w: float, points: int = 1_000_000) -> float:
    xs = np.linspace(0.0, mx.zeta(w) + 25.0, points)
    b = mx.beta(xs)
    with np.errstate(divide="ignore"):
        integrand = -(1.0 / (w + 1.0 / b)) * np.asarray(mx.phi(xs))
    return 2.0 * float(np.trapezoid(integrand, xs))


REGIMES = [
    # (n, s_n, v_n) used across the theory tests and the acceptance ladder
    (10_000, 500, 5.0),
    (100_000, 500, 5.0),
    (1_000_000, 500, 5.0),
    (20_000, 200, 5.0),
    (100_000, 1_000, 5.0),
    (1_000_000, 1_000, 6.0),
]


def sweep_regimes(t: float = 0.1):
    print("== regime sweep (t = 0.1, alpha = 2, A = 4t) ==")
    for n, s, v in REGIMES:
        regime = th.ProblemRegime(n=n, s_n=s, v_n=v, t=t)
        rates = th.rate_sequences(regime)
        wm, wp = th.solve_w_pm(regime, th.default_support(regime))
        scale = (s / n) * math.sqrt(math.log(n / s))
        lm, lp, clamped = th.solve_lambda_pm(regime, wm, wp)
        one_minus_cond_p = 1.0 - th.cond_ell_expectation(wp, wm, lp)
        one_minus_cond_m = 1.0 - th.cond_ell_expectation(wm, wp, lm)
        ev_ratio = th.F_w(wp, lp) / th.F_w(wm, lp) - 1.0
        rate_max = max(rates.nu_n, rates.rho_n, rates.delta_n)
        print(f"  (n={n}, s={s}, v={v}):")
        print(f"    w-/scale={wm/scale:.4f}  w+/scale={wp/scale:.4f}")
        print(f"    (1-l+)/delta={(1-lp)/rates.delta_n:.4f}  "
              f"(1-l-)/delta={(1-lm)/rates.delta_n:.4f}  clamped={clamped}")
        print(f"    (1-condexp+)/eps={one_minus_cond_p/rates.eps_n:.4f}  "
              f"(1-condexp-)/eps={one_minus_cond_m/rates.eps_n:.4f}")
        print(f"    EVratio-1={ev_ratio:.5f}  /rate_max={ev_ratio/rate_max:.4f}")


def sweep_cond_expectation_scaling():
    print("== (1 - cond_exp)/((1-lam) log(1/(1-lam))), w1 = w2 = (s/n)sqrt(log(n/s)) ==")
    for n, s in [(10_000, 100), (100_000, 500), (1_000_000, 1_000)]:
        w = (s / n) * math.sqrt(math.log(n / s))
        for lam in [0.8, 0.9, 0.99, 0.999]:
            val = 1.0 - th.cond_ell_expectation(w, w, lam)
            scale = (1 - lam) * math.log(1.0 / (1 - lam))
            print(f"  (n={n}, s={s}) lam={lam}: ratio={val/scale:.4f}")


def sweep_qvalue_bracket():
    print("== q-value bracket: ratio * log(1/w)/loglog(1/w) ==")
    for t in (0.1, 0.5):
        for w in (1e-3, 1e-5, 1e-7):
            rep = th.check_qvalue_bracket(w, t)
            print(f"  w={w:.0e} t={t}: ratio={rep.ratio:.5f} "
                  f"normalized={rep.normalized_ratio:.4f}")


def main():
    sweep_zeta_bracket()
    sweep_chi_bound()
    sweep_m_tilde_zeta()
    print("== m_tilde vs 1e6-point trapezoid at w=0.1 ==")
    print(f"  quad={th.m_tilde(0.1):.12f}  trapezoid={m_tilde_trapezoid(0.1):.12f}")
    sweep_cond_expectation_scaling()
    sweep_qvalue_bracket()
    sweep_regimes()


if __name__ == "__main__":
    main()
