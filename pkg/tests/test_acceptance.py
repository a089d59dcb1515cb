"""Acceptance gate: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
print.  Monte Carlo criteria use frozen seeds; order-of-magnitude claims use
the constants frozen from scripts/calibrate_constants.py.

Criterion 4 carries a known-red clause: the q-value and cumulative
procedures match in convergence *rate* but not in desk-scale constant, so
their FDR estimates differ by a term of order eps_n that no Monte Carlo
error band of the stated size can absorb.  The clause is asserted as
stated and fails honestly; see the analysis in the repository notes.
"""

import math
import time
import warnings

import numba
import numpy as np
import pytest
from scipy.integrate import quad

from ebtest import estimator as est
from ebtest import mixture as mx
from ebtest import procedures as proc
from ebtest import simulate as sim
from ebtest import theory as th

warnings.filterwarnings("ignore", message="s_n below")

T = 0.1
CRIT4_SEED = 20240801
LADDER_SEEDS = {20: 120, 200: 1200, 2000: 12000}
PARALLELISM = 2

EV_RATIO_B = 6.0  # frozen, scripts/calibrate_constants.py


def _report(criterion: int, label: str, checks: list[tuple[bool, str]],
            runtime: float | None = None) -> None:
    ok = all(flag for flag, _ in checks)
    stamp = f" [{runtime:.1f}s]" if runtime is not None else ""
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {label}{stamp}")
    for flag, msg in checks:
        if not flag:
            print(f"  failed: {msg}")
    assert ok, f"criterion {criterion} failed: " + "; ".join(
        msg for flag, msg in checks if not flag
    )


@pytest.fixture(scope="module")
def crit4_theory():
    regime = th.ProblemRegime(n=20_000, s_n=200, v_n=5.0, t=T, alpha=2.0, A=4 * T)
    return regime, th.rate_sequences(regime), th.theory_quantities(regime)


@pytest.fixture(scope="module")
def crit4_report(crit4_theory):
    _, _, bands = crit4_theory
    cfg = sim.SignalConfig(n=20_000, s_n=200, v_n=5.0)
    return sim.run_experiment(
        cfg, T, replicates=1000, seed=CRIT4_SEED,
        parallelism=PARALLELISM, theory=bands,
    )


@pytest.fixture(scope="module")
def ladder_reports():
    out = {}
    for ratio in (20, 200, 2000):
        cfg = sim.SignalConfig(n=500 * ratio, s_n=500, v_n=5.0)
        out[ratio] = sim.run_experiment(
            cfg, T, replicates=500, seed=LADDER_SEEDS[ratio],
            parallelism=PARALLELISM, procedures=("cl",),
        )
    return out


@pytest.fixture(scope="module")
def ladder_theory():
    out = {}
    for ratio in (20, 200, 2000):
        regime = th.ProblemRegime(n=500 * ratio, s_n=500, v_n=5.0, t=T)
        out[ratio] = (regime, th.rate_sequences(regime), th.theory_quantities(regime))
    return out


def test_criterion_1_invariant_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(20259)
    checks: list[tuple[bool, str]] = []
    N = 10_000

    # ---- core math: positivity, evenness, monotone shape ----
    xs = rng.uniform(-38.0, 38.0, N)
    checks.append((bool(np.all(np.asarray(mx.phi(xs)) > 0)), "phi positive"))
    checks.append((bool(np.all(np.asarray(mx.g(xs)) > 0)), "g positive"))
    checks.append(
        (bool(np.all(mx.phi(xs) == mx.phi(-xs))) and bool(np.all(mx.g(xs) == mx.g(-xs))),
         "phi, g even")
    )
    grid = np.sort(rng.uniform(2.0, 50.0, N))
    gv = np.asarray(mx.g(grid))
    checks.append((bool(np.all(np.diff(gv) < 0)), "g decreasing beyond 2"))

    a = rng.uniform(0.0, 50.0, N)
    b = a + rng.uniform(1e-3, 10.0, N)
    lr = np.asarray(mx.log_phi_over_g(a)) - np.asarray(mx.log_phi_over_g(b))
    checks.append((bool(np.all(lr > 0)), "phi/g strictly decreasing"))

    a = rng.uniform(0.0, 36.0, N)
    b = np.minimum(a + rng.uniform(1e-3, 10.0, N), 37.0)
    tr_a = np.asarray(mx.log_phi_bar(a)) - np.log(np.asarray(mx.g_bar(a)))
    tr_b = np.asarray(mx.log_phi_bar(b)) - np.log(np.asarray(mx.g_bar(b)))
    checks.append((bool(np.all(tr_a > tr_b)), "tail ratio strictly decreasing"))

    a = rng.uniform(0.0, 37.0, N)
    b = np.minimum(a + rng.uniform(1e-3, 10.0, N), 38.0)
    checks.append(
        (bool(np.all(np.asarray(mx.beta(a)) < np.asarray(mx.beta(b)))),
         "beta strictly increasing")
    )
    checks.append((mx.beta(0.0) == -0.5, "beta(0) = -1/2"))

    for x in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        body, _ = quad(lambda u: float(mx.g(u)), x, 50.0, limit=300)
        closed = float(mx.g_bar(x))
        checks.append(
            (abs(closed - (body + mx.PHI0 / 50.0)) <= 1e-10,
             f"g_bar closed form vs quadrature at {x}")
        )

    us = np.exp(rng.uniform(math.log(1e-12), math.log(1.999), N))
    xi_u = mx.xi(us)
    rel = np.abs(np.asarray(mx.phi(xi_u)) / np.asarray(mx.g(xi_u)) - us) / us
    checks.append((bool(np.all(rel <= 1e-10)), "xi round trip 1e-10"))

    ws = np.exp(rng.uniform(math.log(1e-12), 0.0, N))
    ze = mx.zeta(ws)
    rel = np.abs(np.asarray(mx.beta(ze)) * ws - 1.0)
    checks.append((bool(np.all(rel <= 1e-10)), "zeta round trip 1e-10"))

    us = np.exp(rng.uniform(math.log(1e-12), math.log(1 - 1e-9), N))
    ch = mx.chi(us)
    rel = np.abs(
        np.asarray(mx.phi_bar(ch)) / np.asarray(mx.g_bar(ch)) - us
    ) / us
    checks.append((bool(np.all(rel <= 1e-10)), "chi round trip 1e-10"))

    xs = np.exp(rng.uniform(math.log(1e-12), math.log(1e-2), N))
    two_term = mx.PHI0 * (0.5 - xs * xs / 8.0)
    rel = np.abs(np.asarray(mx.g(xs)) - two_term) / two_term
    checks.append(
        (bool(np.all(rel <= 1.1 * xs**4 / 24.0 + 1e-10)),
         "g near-zero Taylor stability")
    )

    # ---- empirical Bayes: monotonicities, gradient, ranking ----
    n_batches, per_batch = 100, 100
    ok_w_mono = ok_x_mono = ok_rank = ok_lq = True
    for _ in range(n_batches):
        w1 = float(rng.uniform(0.02, 0.98))
        w2 = float(rng.uniform(0.01, w1 - 0.005))
        x = rng.uniform(-20.0, 20.0, per_batch)
        if not (np.all(est.ell_values(x, w2) > est.ell_values(x, w1))
                and np.all(est.q_values(x, w2) > est.q_values(x, w1))):
            ok_w_mono = False
        ax = np.sort(np.abs(x))
        lv, qv = est.ell_values(ax, w1), est.q_values(ax, w1)
        keep_l, keep_q = lv > est.CLAMP_LO, qv > est.CLAMP_LO
        if not (np.all(np.diff(lv[keep_l]) < 0) and np.all(np.diff(qv[keep_q]) < 0)):
            ok_x_mono = False
        order = np.argsort(-np.abs(x), kind="stable")
        if not (np.array_equal(order, np.argsort(lv_full := est.ell_values(x, w1), kind="stable"))
                and np.array_equal(order, np.argsort(est.q_values(x, w1), kind="stable"))):
            ok_rank = False
        if not np.all(est.q_values(x, w1) <= lv_full):
            ok_lq = False
    checks.append((ok_w_mono, "ell/q strictly decreasing in w"))
    checks.append((ok_x_mono, "ell/q strictly decreasing in |x|"))
    checks.append((ok_rank, "ranking matches -|x| ordering"))
    checks.append((ok_lq, "q <= ell entrywise"))

    ok_score = True
    for _ in range(n_batches):
        x = rng.standard_normal(30) + np.where(rng.random(30) < 0.2, 4.0, 0.0)
        w_hi = rng.uniform(0.02, 0.99, per_batch)
        w_lo = w_hi * rng.uniform(0.05, 0.95, per_batch)
        s_hi = np.array([est.score(x, float(w)) for w in w_hi])
        s_lo = np.array([est.score(x, float(w)) for w in w_lo])
        if not np.all(s_lo > s_hi):
            ok_score = False
    checks.append((ok_score, "score strictly decreasing in w"))

    ok_perm = ok_grad = True
    h = 1e-6
    for i in range(N):
        x = rng.standard_normal(25)
        if i % 3 == 0:
            x[:4] += 5.0
        w1 = est.estimate_w(x).w_hat
        w2 = est.estimate_w(x[rng.permutation(25)]).w_hat
        if w1 != w2:
            ok_perm = False
        w = float(rng.uniform(0.05, 0.95))
        fd = (est.log_likelihood(x, w + h) - est.log_likelihood(x, w - h)) / (2 * h)
        sc = est.score(x, w)
        if abs(sc - fd) > 1e-5 * max(1.0, abs(sc)):
            ok_grad = False
    checks.append((ok_perm, "estimate_w permutation invariant"))
    checks.append((ok_grad, "score matches finite difference of likelihood"))

    # ---- procedures: postFDR bound, dichotomy, nesting ----
    ok_pf = ok_next = ok_lam = ok_nest_proc = ok_dich = ok_perm_cl = True
    ok_nest_t = ok_chi = True
    for _ in range(N):
        n = int(rng.integers(1, 120))
        ell = rng.uniform(0.0, 1.0, n)
        t1 = float(rng.uniform(0.02, 0.9))
        d_cl = proc.cl_procedure(ell, t1)
        if proc.post_fdr(ell, d_cl.reject) > t1:
            ok_pf = False
        if d_cl.k_hat < n:
            srt = np.sort(ell)
            if math.fsum(srt[: d_cl.k_hat + 1]) <= t1 * (d_cl.k_hat + 1):
                ok_next = False
        if d_cl.lambda_used < t1:
            ok_lam = False
        d_ell = proc.ell_procedure(ell, t1)
        if not np.all(d_cl.reject[d_ell.reject]):
            ok_nest_proc = False
        lam = float(rng.uniform(0.0, 1.0))
        if (proc.post_fdr(ell, ell < lam) <= t1) != (lam <= d_cl.lambda_used):
            ok_dich = False
        perm = rng.permutation(n)
        d_perm = proc.cl_procedure(ell[perm], t1)
        if not np.array_equal(d_perm.reject, d_cl.reject[perm]):
            ok_perm_cl = False
        t2 = float(rng.uniform(t1, 0.95))
        d_cl2 = proc.cl_procedure(ell, t2)
        if not np.all(d_cl2.reject[d_cl.reject]):
            ok_nest_t = False
    checks.append((ok_pf, "postFDR of cl decision <= t"))
    checks.append((ok_next, "next ranked value pushes prefix mean above t"))
    checks.append((ok_lam, "lambda_hat >= t"))
    checks.append((ok_nest_proc, "ell rejections nested in cl rejections"))
    checks.append((ok_dich, "postFDR threshold dichotomy"))
    checks.append((ok_perm_cl, "cl permutation equivariance"))
    checks.append((ok_nest_t, "rejections monotone in t"))

    for _ in range(100):
        w = float(rng.uniform(0.005, 0.4))
        tq = float(rng.uniform(0.02, 0.6))
        if mx.odds_product(w, tq) >= 1.0:
            continue
        x = rng.standard_normal(100) * 2.5
        direct = proc.q_procedure(est.q_values(x, w), tq).reject
        via = proc.q_rejections_by_tail_threshold(x, w, tq)
        if not np.array_equal(direct, via):
            ok_chi = False
    checks.append((ok_chi, "q thresholding agrees with tail-threshold form"))

    runtime = time.perf_counter() - start
    checks.append((runtime <= 30.0, f"runtime {runtime:.1f}s exceeds 30s"))
    _report(1, "deterministic invariant suite (1e4 cases per entry)", checks, runtime)


@numba.njit(parallel=True, cache=True)
def _grid_loglik(grid, b):
    """Brute-force log-likelihood (up to the w-free constant) at every grid
    point: vals[j] = sum_i log1p(grid[j] * b[i])."""
    vals = np.empty(grid.size)
    for j in numba.prange(grid.size):
        acc = 0.0
        for i in range(b.size):
            acc += math.log1p(grid[j] * b[i])
        vals[j] = acc
    return vals


def test_criterion_2_oracle_equivalence():
    start = time.perf_counter()
    checks: list[tuple[bool, str]] = []

    # estimate_w vs brute-force 1e6-point grid argmax, 100 seeded datasets
    n, points = 50, 1_000_000
    grid = np.linspace(1.0 / n, 1.0, points)
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(np.random.SeedSequence((777, i)))
        x = rng.standard_normal(n)
        k = int(rng.integers(0, 12))
        x[:k] += rng.uniform(2.0, 6.0)
        b = np.asarray(mx.beta(x))
        vals = _grid_loglik(grid, b)
        best_w = float(grid[int(np.argmax(vals))])
        worst = max(worst, abs(est.estimate_w(x).w_hat - best_w))
    checks.append((worst <= 1e-4, f"grid argmax deviation {worst:.2e} > 1e-4"))

    for x in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        body, _ = quad(lambda u: float(mx.g(u)), x, 50.0, limit=300)
        checks.append(
            (abs(float(mx.g_bar(x)) - (body + mx.PHI0 / 50.0)) <= 1e-10,
             f"g_bar quadrature at {x}")
        )

    rng = np.random.default_rng(4242)
    ok_fd, h = True, 1e-6
    for i in range(100):
        x = rng.standard_normal(60)
        x[: int(rng.integers(0, 10))] += 4.0
        w = float(rng.uniform(0.05, 0.95))
        fd = (est.log_likelihood(x, w + h) - est.log_likelihood(x, w - h)) / (2 * h)
        sc = est.score(x, w)
        if abs(sc - fd) > 1e-5 * max(1.0, abs(sc)):
            ok_fd = False
    checks.append((ok_fd, "score vs finite difference at 1e-5 relative"))

    runtime = time.perf_counter() - start
    checks.append((runtime <= 60.0, f"runtime {runtime:.1f}s exceeds 60s"))
    _report(2, "oracle equivalence (grid argmax, quadrature, finite differences)",
            checks, runtime)


def test_criterion_3_null_distribution_law():
    start = time.perf_counter()
    checks: list[tuple[bool, str]] = []
    n_draws = 1_000_000
    rng = np.random.default_rng(31415)
    x = rng.standard_normal(n_draws)
    lam_grid = np.linspace(0.05, 0.95, 20)
    for w in (0.01, 0.001):
        ell = est.ell_values(x, w)
        for lam in lam_grid:
            target = th.F_w(w, float(lam))
            frac = float(np.mean(ell < lam))
            se = math.sqrt(target * (1.0 - target) / n_draws)
            if abs(frac - target) > 3.0 * se:
                checks.append(
                    (False,
                     f"ECDF at (w={w}, lam={lam:.2f}): {frac:.3e} vs "
                     f"{target:.3e} (3SE={3*se:.2e})")
                )
    checks.append((True, "ECDF grid"))

    n_null, w, reps = 10_000, 0.005, 1000
    regime = th.ProblemRegime(n=n_null + 100, s_n=100, v_n=5.0, t=T)
    target = th.expected_false_positives_q(regime, w)
    threshold = mx.chi(mx.odds_product(w, T))
    counts = np.empty(reps)
    rng2 = np.random.default_rng(2718)
    for i in range(reps):
        counts[i] = np.sum(np.abs(rng2.standard_normal(n_null)) > threshold)
    se = counts.std(ddof=1) / math.sqrt(reps)
    checks.append(
        (abs(counts.mean() - target) <= 3.0 * se,
         f"EV' {counts.mean():.2f} vs {target:.2f} (3SE={3*se:.2f})")
    )

    runtime = time.perf_counter() - start
    checks.append((runtime <= 60.0, f"runtime {runtime:.1f}s exceeds 60s"))
    _report(3, "null law of ell values and expected q false positives",
            checks, runtime)


def test_criterion_4_consistency_at_desk_scale(crit4_report):
    start = time.perf_counter()
    rep = crit4_report
    checks: list[tuple[bool, str]] = []
    fdr_cl, se_cl = rep.fdr["cl"], rep.fdr_se["cl"]
    checks.append(
        (T - 2 * se_cl <= fdr_cl <= T + 0.35,
         f"FDR(cl) = {fdr_cl:.4f} outside [{T - 2*se_cl:.4f}, {T + 0.35}]")
    )
    checks.append(
        (rep.fnr["cl"] <= 0.01, f"FNR(cl) = {rep.fnr['cl']:.4f} > 0.01")
    )
    checks.append(
        (rep.fdr["ell"] <= fdr_cl,
         f"FDR(ell) = {rep.fdr['ell']:.4f} > FDR(cl) = {fdr_cl:.4f}")
    )
    gap = abs(rep.fdr["qval"] - fdr_cl)
    combined = math.hypot(rep.fdr_se["qval"], se_cl)
    checks.append(
        (gap <= 3.0 * combined,
         f"|FDR(qval) - FDR(cl)| = {gap:.4f} > 3*combined SE = "
         f"{3*combined:.4f} (rate constants differ at desk scale; "
         f"known-red clause, see notes)")
    )
    _report(4, "desk-scale FDR/FNR reproduction (n=20000, s=200, R=1000)",
            checks, time.perf_counter() - start + rep.runtime_s)


def test_criterion_5_rate_trend_along_ladder(ladder_reports):
    start = time.perf_counter()
    checks: list[tuple[bool, str]] = []
    excesses, ses = [], []
    for ratio in (20, 200, 2000):
        rep = ladder_reports[ratio]
        excess = rep.fdr["cl"] - T
        excesses.append(excess)
        ses.append(rep.fdr_se["cl"])
        checks.append(
            (excess > 0.0,
             f"FDR(cl) - t = {excess:.4f} not positive at n/s = {ratio}")
        )
    for i in range(2):
        slack = 2.0 * math.hypot(ses[i], ses[i + 1])
        checks.append(
            (excesses[i + 1] <= excesses[i] + slack,
             f"excess increased along ladder: {excesses[i]:.4f} -> "
             f"{excesses[i+1]:.4f} (slack {slack:.4f})")
        )
    total_runtime = sum(r.runtime_s for r in ladder_reports.values())
    _report(5, "FDR excess positive and nonincreasing in n/s", checks,
            time.perf_counter() - start + total_runtime)


def test_criterion_6_concentration_fractions(crit4_report, crit4_theory):
    _, _, bands = crit4_theory
    rep = crit4_report
    checks = [
        (rep.w_band_fraction >= 0.90,
         f"w-hat band fraction {rep.w_band_fraction:.3f} < 0.90 "
         f"(band ({bands.w_minus:.4f}, {bands.w_plus:.4f}))"),
        (rep.lambda_band_fraction >= 0.85,
         f"lambda-hat band fraction {rep.lambda_band_fraction:.3f} < 0.85 "
         f"(band [{bands.lambda_minus:.4f}, {bands.lambda_plus:.4f}])"),
    ]
    _report(6, "w-hat and lambda-hat concentration in the theory bands", checks)


def test_criterion_7_appendix_numeric_checks(ladder_theory):
    start = time.perf_counter()
    checks: list[tuple[bool, str]] = []

    for u in np.logspace(-12, -3, 10):
        x = mx.xi(float(u))
        lo = math.sqrt(2 * math.log(1 / u) + 2 * math.log(math.log(1 / u)) + 2 * math.log(2))
        hi = math.sqrt(2 * math.log(1 / u) + 2 * math.log(math.log(1 / u)) + 6 * math.log(2))
        checks.append(
            (lo <= x <= hi, f"xi({u:.0e}) = {x:.6f} outside [{lo:.6f}, {hi:.6f}]")
        )

    for w in np.logspace(-10, -1, 10):
        z, via_xi = mx.zeta(float(w)), mx.xi(float(w / (1 + w)))
        checks.append(
            (abs(z - via_xi) <= 1e-10,
             f"zeta({w:.0e}) vs xi(w/(1+w)) differ by {abs(z - via_xi):.2e}")
        )

    ratios = [th.check_qvalue_bracket(w, T).normalized_ratio for w in (1e-3, 1e-5, 1e-7)]
    checks.append(
        (all(r > 0 for r in ratios), f"q-bracket ratios not all positive: {ratios}")
    )
    checks.append(
        (max(ratios) <= 4.0 * min(ratios),
         f"q-bracket normalized ratios not 4x-stable: {ratios}")
    )

    for ratio_key, (regime, rates, tq) in ladder_theory.items():
        ev_ratio = th.F_w(tq.w_plus, tq.lambda_plus) / tq.F_wm_at_lp - 1.0
        bound = EV_RATIO_B * max(rates.nu_n, rates.rho_n, rates.delta_n)
        checks.append(
            (0.0 <= ev_ratio <= bound,
             f"EV ratio {ev_ratio:.4f} outside [0, {bound:.4f}] at n/s = {ratio_key}")
        )

    _report(7, "appendix-level numeric brackets", checks,
            time.perf_counter() - start)


def test_criterion_8_sparsity_preservation(crit4_report):
    check = sim.sparsity_preservation_check(crit4_report, a_n=2.0, max_fraction=0.01)
    checks = [
        (check.passed["cl"],
         f"cl rejects > 2 s_n in fraction {check.exceed_fraction['cl']:.4f}"),
        (check.passed["qval"],
         f"qval rejects > 2 s_n in fraction {check.exceed_fraction['qval']:.4f}"),
    ]
    _report(8, "rejection counts stay within twice the support size", checks)
