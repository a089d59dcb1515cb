"""Frequentist Monte Carlo harness: seeded replicates, FDP/FNP, aggregation.

Signals live in the strong-signal class: exactly ``s_n`` nonzero means, each
of magnitude at least sqrt(2 log(n/s_n)) + v_n.  A replicate adds iid
standard normal noise, runs the full analysis pipeline, and scores each
procedure's false discovery and false negative proportions (the latter with
the fixed denominator s_n).

Reproducibility contract: every replicate draws from its own substream,
derived from (master seed, replicate index) via numpy's SeedSequence, and
aggregation is a fixed-order fold over the replicate index, so reports are
bitwise identical for any degree of parallelism.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import estimator, mixture
from .procedures import PROCEDURES, analyze
from .theory import TheoryQuantities

SIGN_MODES = ("all_positive", "random_sign")


@dataclass(frozen=True)
class SignalConfig:
    """Strong-signal parameter vector specification.

    ``magnitude_surplus`` is added on top of the class boundary
    sqrt(2 log(n/s_n)) + v_n (0 means exactly the boundary, the hardest
    point of the class).
    """

    n: int
    s_n: int
    v_n: float
    sign_mode: str = "all_positive"
    magnitude_surplus: float = 0.0

    def __post_init__(self):
        if not 1 <= self.s_n < self.n:
            raise ValueError("config requires 1 <= s_n < n")
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
        if self.magnitude_surplus < 0.0:
            raise ValueError("magnitude_surplus must be >= 0")

    @property
    def boundary_magnitude(self) -> float:
        return math.sqrt(2.0 * math.log(self.n / self.s_n)) + self.v_n


@dataclass(frozen=True)
class ProcedureStats:
    rejections: int
    false_pos: int
    false_neg: int
    fdp: float
    fnp: float


@dataclass(frozen=True)
class ReplicateOutcome:
    """Scores of one replicate, plus concentration diagnostics if available."""

    seed: tuple[int, ...]
    w_hat: float
    lambda_hat: float
    k_hat: int
    stats: dict[str, ProcedureStats]
    tied: bool
    in_w_band: bool | None = None
    in_lambda_band: bool | None = None
    k_n_proxy: int | None = None


@dataclass(frozen=True)
class SimulationReport:
    config: SignalConfig
    t: float
    replicates: int
    master_seed: int
    procedures: tuple[str, ...]
    fdr: dict[str, float]
    fdr_se: dict[str, float]
    fnr: dict[str, float]
    fnr_se: dict[str, float]
    max_rejection_ratio: dict[str, float]
    w_band_fraction: float | None
    lambda_band_fraction: float | None
    runtime_s: float
    outcomes: list[ReplicateOutcome] = field(repr=False, default_factory=list)


def _entropy_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def generate_theta0(config: SignalConfig, seed) -> np.ndarray:
    """Deterministic signal vector: seeded support permutation, fixed
    magnitudes, signs per ``sign_mode``."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(config.n)
    support = rng.permutation(config.n)[: config.s_n]
    magnitude = config.boundary_magnitude + config.magnitude_surplus
    if config.sign_mode == "random_sign":
        signs = np.where(rng.random(config.s_n) < 0.5, -1.0, 1.0)
    else:
        signs = 1.0
    theta[support] = magnitude * signs
    return theta


def replicate_data(config: SignalConfig, seed) -> tuple[np.ndarray, np.ndarray]:
    """The (theta0, X) pair of one replicate, fully determined by the seed.

    The seed sequence is split into a signal substream (support permutation,
    signs) and a noise substream.
    """
    entropy = _entropy_tuple(seed)
    theta_stream, noise_stream = np.random.SeedSequence(entropy).spawn(2)
    theta0 = generate_theta0(config, theta_stream)
    x = theta0 + np.random.default_rng(noise_stream).standard_normal(config.n)
    return theta0, x


def dump_observations(x, path) -> None:
    """Write observations one per line in shortest round-trip notation."""
    with open(path, "w") as fh:
        for value in np.asarray(x, dtype=float):
            fh.write(repr(float(value)) + "\n")


def simulate_replicate(
    config: SignalConfig,
    t: float,
    seed,
    theory: TheoryQuantities | None = None,
    procedures: tuple[str, ...] = PROCEDURES,
) -> ReplicateOutcome:
    """One dataset: X = theta0 + noise, full analysis, FDP/FNP per procedure."""
    entropy = _entropy_tuple(seed)
    theta0, x = replicate_data(config, entropy)

    result = analyze(x, t, procedures=procedures)
    is_signal = theta0 != 0.0
    s_n = config.s_n

    stats: dict[str, ProcedureStats] = {}
    for tag, decision in result.decisions.items():
        rej = decision.reject
        rejections = int(rej.sum())
        false_pos = int(np.sum(rej & ~is_signal))
        false_neg = int(np.sum(~rej & is_signal))
        stats[tag] = ProcedureStats(
            rejections=rejections,
            false_pos=false_pos,
            false_neg=false_neg,
            fdp=false_pos / max(1, rejections),
            fnp=false_neg / s_n,
        )

    in_w_band = in_lambda_band = None
    k_n_proxy = None
    if theory is not None:
        in_w_band = bool(theory.w_minus < result.w_hat < theory.w_plus)
        in_lambda_band = bool(
            theory.lambda_minus <= result.lambda_hat <= theory.lambda_plus
        )
        delta_n = 1.0 / math.log(config.n / config.s_n)
        ell_wm = estimator.ell_values(x[is_signal], theory.w_minus)
        k_n_proxy = int(np.sum(ell_wm > delta_n))

    cl_like = result.decisions.get("cl")
    return ReplicateOutcome(
        seed=entropy,
        w_hat=result.w_hat,
        lambda_hat=cl_like.lambda_used if cl_like is not None else math.nan,
        k_hat=cl_like.k_hat if cl_like is not None else -1,
        stats=stats,
        tied=any(d.tied for d in result.decisions.values()),
        in_w_band=in_w_band,
        in_lambda_band=in_lambda_band,
        k_n_proxy=k_n_proxy,
    )


def _replicate_task(args) -> ReplicateOutcome:
    config, t, entropy, theory, procedures = args
    return simulate_replicate(config, t, entropy, theory, procedures)


def run_experiment(
    config: SignalConfig,
    t: float,
    replicates: int,
    seed: int,
    parallelism: int = 1,
    theory: TheoryQuantities | None = None,
    procedures: tuple[str, ...] = PROCEDURES,
) -> SimulationReport:
    """Run seeded replicates and aggregate FDR/FNR with Monte Carlo SEs.

    Replicate i draws from substream (seed, i); the fold over outcomes is in
    replicate order, so the report does not depend on ``parallelism``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    start = time.perf_counter()
    tasks = [
        (config, t, (int(seed), i), theory, tuple(procedures))
        for i in range(replicates)
    ]
    if parallelism == 1 or replicates == 1:
        outcomes = [_replicate_task(task) for task in tasks]
    else:
        chunk = max(1, replicates // (4 * parallelism))
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_replicate_task, tasks, chunksize=chunk))

    fdr, fdr_se, fnr, fnr_se, max_ratio = {}, {}, {}, {}, {}
    for tag in procedures:
        fdps = np.array([o.stats[tag].fdp for o in outcomes])
        fnps = np.array([o.stats[tag].fnp for o in outcomes])
        rej = np.array([o.stats[tag].rejections for o in outcomes])
        fdr[tag] = float(fdps.mean())
        fnr[tag] = float(fnps.mean())
        if replicates > 1:
            fdr_se[tag] = float(fdps.std(ddof=1) / math.sqrt(replicates))
            fnr_se[tag] = float(fnps.std(ddof=1) / math.sqrt(replicates))
        else:
            fdr_se[tag] = fnr_se[tag] = 0.0
        max_ratio[tag] = float(rej.max() / config.s_n)

    w_frac = lambda_frac = None
    if theory is not None:
        w_frac = float(np.mean([o.in_w_band for o in outcomes]))
        lambda_frac = float(np.mean([o.in_lambda_band for o in outcomes]))

    return SimulationReport(
        config=config,
        t=t,
        replicates=replicates,
        master_seed=int(seed),
        procedures=tuple(procedures),
        fdr=fdr,
        fdr_se=fdr_se,
        fnr=fnr,
        fnr_se=fnr_se,
        max_rejection_ratio=max_ratio,
        w_band_fraction=w_frac,
        lambda_band_fraction=lambda_frac,
        runtime_s=time.perf_counter() - start,
        outcomes=outcomes,
    )


@dataclass(frozen=True)
class SparsityCheck:
    """Fraction of replicates rejecting more than a_n * s_n hypotheses."""

    a_n: float
    exceed_fraction: dict[str, float]
    passed: dict[str, bool]


def sparsity_preservation_check(
    report: SimulationReport, a_n: float = 2.0, max_fraction: float = 0.01
) -> SparsityCheck:
    exceed, passed = {}, {}
    for tag in report.procedures:
        counts = np.array([o.stats[tag].rejections for o in report.outcomes])
        frac = float(np.mean(counts > a_n * report.config.s_n))
        exceed[tag] = frac
        passed[tag] = frac <= max_fraction
    return SparsityCheck(a_n=a_n, exceed_fraction=exceed, passed=passed)


def sample_slab_data(rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw marginal data X with density g by inverse transform on its tail.

    |X| has tail probability 2*Gbar(x), so |X| = Gbar^{-1}(U/2) for uniform
    U; the sign is symmetric.  (The slab distribution on the mean itself is
    never needed: all procedures consume X only.)
    """
    u = rng.random(size)
    magnitudes = mixture.g_bar_inv(0.5 * np.clip(u, 1e-15, 1.0))
    signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return magnitudes * signs


def bfdr_estimate(
    w: float, n: int, t: float, replicates: int, seed: int,
    procedure_w: float | None = None,
) -> float:
    """Monte Carlo Bayesian FDR of the fixed-weight ell-procedure at level t.

    Each replicate draws the latent null/slab indicators from the prior
    weight w, nulls from the normal and slab coordinates marginally from g,
    then applies the thresholding ell(x; procedure_w) < t.  ``procedure_w``
    defaults to the prior weight (the well-specified case); passing a
    different value measures the effect of weight misspecification.
    """
    if not 0.0 < w < 1.0:
        raise ValueError("bfdr_estimate requires w in (0, 1)")
    if not 0.0 <= t < 1.0:
        raise ValueError("bfdr_estimate requires t in [0, 1)")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    w_proc = w if procedure_w is None else float(procedure_w)
    if not 0.0 < w_proc < 1.0:
        raise ValueError("procedure_w must lie in (0, 1)")
    fdps = np.empty(replicates)
    for i in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), i)))
        is_signal = rng.random(n) < w
        x = rng.standard_normal(n)
        k = int(is_signal.sum())
        if k:
            x[is_signal] = sample_slab_data(rng, k)
        reject = estimator.ell_values(x, w_proc) < t
        fdps[i] = np.sum(reject & ~is_signal) / max(1, int(reject.sum()))
    return float(fdps.mean())


def null_fraction_ell_below(w: float, lam, draws: int, seed: int) -> np.ndarray:
    """Empirical null CDF of the ell values at thresholds ``lam``.

    Diagnostic mode with no signals at all (outside SignalConfig's domain);
    used to validate the closed-form null law of the ell values.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(draws)
    ell = estimator.ell_values(x, w)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return np.array([np.mean(ell < lv) for lv in lam])


#: keys accepted in a flat key=value experiment config file
CONFIG_KEYS = (
    "n", "s_n", "v_n", "t", "sign_mode", "magnitude_surplus",
    "replicates", "seed", "alpha", "A", "procedures",
)
_INT_KEYS = {"n", "s_n", "replicates", "seed"}
_FLOAT_KEYS = {"v_n", "t", "magnitude_surplus", "alpha", "A"}


def load_flat_config(path) -> dict:
    """Read a flat key=value experiment config (one pair per line).

    Blank lines and lines starting with ``#`` are skipped.  Values are
    coerced per key; ``procedures`` is a comma-separated list.  Unknown keys
    raise, so typos cannot silently change an experiment.
    """
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key == "procedures":
                out[key] = tuple(p.strip() for p in value.split(",") if p.strip())
            else:
                out[key] = value
    return out


def _float_repr(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def replicates_to_csv(report: SimulationReport, path) -> None:
    """One row per replicate; floats in shortest round-trip notation."""
    tags = report.procedures
    header = ["seed"]
    for tag in tags:
        header += [
            f"{tag}_fdp", f"{tag}_fnp", f"{tag}_rejections",
            f"{tag}_false_pos", f"{tag}_false_neg",
        ]
    header += ["w_hat", "lambda_hat", "k_hat",
               "in_w_band", "in_lambda_band", "k_n_proxy", "tied"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for o in report.outcomes:
            row = [":".join(str(s) for s in o.seed)]
            for tag in tags:
                st = o.stats[tag]
                row += [
                    _float_repr(st.fdp), _float_repr(st.fnp),
                    st.rejections, st.false_pos, st.false_neg,
                ]
            row += [
                _float_repr(o.w_hat), _float_repr(o.lambda_hat), o.k_hat,
                o.in_w_band, o.in_lambda_band, o.k_n_proxy, o.tied,
            ]
            writer.writerow(row)


def report_to_dict(report: SimulationReport, include_outcomes: bool = True) -> dict:
    """JSON-ready dictionary of the full report."""
    out = {
        "config": asdict(report.config),
        "t": report.t,
        "replicates": report.replicates,
        "master_seed": report.master_seed,
        "procedures": list(report.procedures),
        "fdr": report.fdr,
        "fdr_se": report.fdr_se,
        "fnr": report.fnr,
        "fnr_se": report.fnr_se,
        "max_rejection_ratio": report.max_rejection_ratio,
        "w_band_fraction": report.w_band_fraction,
        "lambda_band_fraction": report.lambda_band_fraction,
        "runtime_s": report.runtime_s,
    }
    if include_outcomes:
        out["outcomes"] = [
            {
                "seed": list(o.seed),
                "w_hat": o.w_hat,
                "lambda_hat": o.lambda_hat,
                "k_hat": o.k_hat,
                "stats": {tag: asdict(st) for tag, st in o.stats.items()},
                "tied": o.tied,
                "in_w_band": o.in_w_band,
                "in_lambda_band": o.in_lambda_band,
                "k_n_proxy": o.k_n_proxy,
            }
            for o in report.outcomes
        ]
    return out
