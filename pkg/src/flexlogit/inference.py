"""Likelihood-ratio tests and bootstrap confidence intervals.

The LR test compares two fitted models where the restricted one is nested in
the full one (the caller asserts nesting by supplying the degrees of
freedom). The bootstrap resamples observations with replacement, by default
stratified on the chosen alternative so every replicate preserves the
observed per-alternative choice counts, and refits the model on each
replicate warm-started from the full-sample estimate. Intervals come from
the bias-corrected and accelerated (BCa) construction: the bias correction
z0 is read off the share of replicates below the point estimate (ties count
half) and the acceleration is the standard jackknife skewness ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, ndtr, ndtri

from .data import ChoiceDataset
from .errors import (
    DegenerateDistribution,
    EstimationError,
    NegativeStatBeyondSlack,
    TooManyFailures,
)
from .estimation import EstimationResult, FitOptions, fit

__all__ = [
    "LRTestResult",
    "lr_test",
    "BootstrapRun",
    "bootstrap",
    "bca_interval",
]

NEGATIVE_STAT_SLACK = 1e-6
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class LRTestResult:
    stat: float
    df: int
    p_value: float


def chi2_sf(stat: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularized
    incomplete gamma function."""
    if stat <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, stat / 2.0))


def lr_test(
    full: EstimationResult | float,
    restricted: EstimationResult | float,
    df: int,
) -> LRTestResult:
    """Likelihood-ratio test of a nested restriction.

    Accepts fitted results or raw log-likelihood values. A slightly negative
    statistic (within 1e-6, from optimizer slack) is clamped to zero; a more
    negative one means the "restricted" model out-fit the full one and the
    models are not nested as claimed.
    """
    ll_full = full.ll if isinstance(full, EstimationResult) else float(full)
    ll_restr = restricted.ll if isinstance(restricted, EstimationResult) else float(restricted)
    if df < 1:
        raise ValueError("df must be a positive integer")
    stat = 2.0 * (ll_full - ll_restr)
    if stat < -NEGATIVE_STAT_SLACK:
        raise NegativeStatBeyondSlack(
            f"LR statistic {stat:.3e} is negative beyond slack; "
            "the models are not nested or the full model under-converged"
        )
    stat = max(stat, 0.0)
    return LRTestResult(stat=stat, df=int(df), p_value=chi2_sf(stat, df))


@dataclass
class BootstrapRun:
    """Replicate and jackknife estimates for interval construction.

    ``replicate_estimates`` is (B, dim); ``jackknife_estimates`` is
    (n_obs, dim) leave-one-out estimates. ``failures`` counts replicates whose
    refit did not converge (their best-found points are still recorded).
    """

    replicate_estimates: np.ndarray
    jackknife_estimates: np.ndarray
    seed: int
    stratified: bool
    failures: int = 0
    param_names: tuple[str, ...] = ()

    @property
    def n_replicates(self) -> int:
        return int(self.replicate_estimates.shape[0])


def _resample_ids(data: ChoiceDataset, rng, stratified: bool) -> np.ndarray:
    uniq = data.unique_obs()
    if not stratified:
        return rng.choice(uniq, size=uniq.shape[0], replace=True)
    chosen = data.chosen_alt_by_obs()
    picks = []
    for a in data.alternatives:
        stratum = uniq[chosen == a]
        if stratum.shape[0]:
            picks.append(rng.choice(stratum, size=stratum.shape[0], replace=True))
    return np.concatenate(picks)


def bootstrap(
    data: ChoiceDataset,
    spec,
    B: int = 1000,
    seed: int = 0,
    stratified: bool = True,
    options: FitOptions | None = None,
    threads: int = 1,
) -> BootstrapRun:
    """Nonparametric bootstrap of the packed parameter vector.

    Replicate b draws its own random stream from (seed, b), so results are
    identical however the replicates are scheduled. Each replicate refit is
    warm-started from the full-sample estimate, falling back to the default
    init if that fails. Raises ``TooManyFailures`` when more than 10% of
    replicates fail to converge.
    """
    from .parallel import parallel_map

    opts = options or FitOptions()
    full = fit(data, spec, options=opts, compute_hessian=False)
    x_hat = full.packed

    def one_replicate(b: int) -> tuple[np.ndarray, bool]:
        rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        sample = data.resample(_resample_ids(data, rng, stratified))
        return _refit(sample, spec, x_hat, opts)

    replicate = parallel_map(one_replicate, range(B), threads)
    estimates = np.vstack([r[0] for r in replicate])
    failures = sum(0 if r[1] else 1 for r in replicate)
    if failures > MAX_FAILURE_FRACTION * B:
        raise TooManyFailures(
            f"{failures} of {B} bootstrap replicates failed to converge"
        )

    uniq = data.unique_obs()
    def one_jackknife(i: int) -> np.ndarray:
        sample = data.subset(np.delete(uniq, i))
        return _refit(sample, spec, x_hat, opts)[0]

    jack = np.vstack(parallel_map(one_jackknife, range(uniq.shape[0]), threads))

    return BootstrapRun(
        replicate_estimates=estimates,
        jackknife_estimates=jack,
        seed=seed,
        stratified=stratified,
        failures=failures,
        param_names=tuple(full.param_names),
    )


def _refit(sample, spec, x_hat, opts) -> tuple[np.ndarray, bool]:
    try:
        res = fit(sample, spec, init=x_hat, options=opts, compute_hessian=False)
    except EstimationError:
        res = None
    if res is None or not res.converged:
        try:
            res = fit(sample, spec, options=opts, compute_hessian=False)
        except EstimationError:
            return x_hat.copy(), False
    return res.packed, res.converged


def bca_interval(
    run: BootstrapRun,
    point: np.ndarray,
    level: float = 0.95,
) -> np.ndarray:
    """Per-parameter BCa interval endpoints, shape (dim, 2).

    Degenerate replicate distributions (all values equal) yield the point
    interval for that parameter. The bias-correction proportion is clamped to
    [1/(B+1), B/(B+1)] so the normal quantile stays finite when every
    replicate falls on one side of the point estimate.
    """
    reps = np.asarray(run.replicate_estimates, dtype=float)
    jack = np.asarray(run.jackknife_estimates, dtype=float)
    point = np.asarray(point, dtype=float).ravel()
    B, dim = reps.shape
    if point.shape[0] != dim:
        raise ValueError("point estimate length does not match replicates")
    alpha = (1.0 - level) / 2.0
    z_lo, z_hi = ndtri(alpha), ndtri(1.0 - alpha)

    out = np.empty((dim, 2))
    for m in range(dim):
        r = reps[:, m]
        if np.all(r == r[0]):
            if r[0] == point[m]:
                out[m] = (point[m], point[m])
                continue
            raise DegenerateDistribution(
                f"all replicates of parameter {m} equal {r[0]!r} but the point "
                f"estimate is {point[m]!r}"
            )
        below = np.sum(r < point[m]) + 0.5 * np.sum(r == point[m])
        prop = np.clip(below / B, 1.0 / (B + 1), B / (B + 1.0))
        z0 = ndtri(prop)

        jm = jack[:, m]
        d = np.mean(jm) - jm
        denom = np.sum(d**2) ** 1.5
        a = float(np.sum(d**3) / (6.0 * denom)) if denom > 0 else 0.0

        def adj(z):
            return float(ndtr(z0 + (z0 + z) / (1.0 - a * (z0 + z))))

        out[m, 0] = np.quantile(r, adj(z_lo))
        out[m, 1] = np.quantile(r, adj(z_hi))
    return out


def percentile_interval(run: BootstrapRun, level: float = 0.95) -> np.ndarray:
    """Simple percentile endpoints, for comparison against BCa."""
    reps = np.asarray(run.replicate_estimates, dtype=float)
    alpha = (1.0 - level) / 2.0
    return np.column_stack(
        [np.quantile(reps, alpha, axis=0), np.quantile(reps, 1.0 - alpha, axis=0)]
    )
