"""Aggregation of trial replications into operating characteristics.

Reported quantities: mean/SE of the experimental-arm allocation proportion,
mean/SE of the observed number of successes (imputed outcomes never count),
per-arm bias of the observed-only success estimate, and the per-arm
covariance identity Cov[N, p_hat] / E[N] = p - E[p_hat] that holds exactly
for randomized data-dependent rules.

Replications in which an arm ends with no observed outcome have an undefined
p_hat there; they are excluded from that arm's bias and covariance statistics
and reported via ``undefined_fraction``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Scenario, TrialResult

BOOTSTRAP_RESAMPLES = 200


class UnusableEstimateError(RuntimeError):
    """Too many replications had an undefined estimate for the identity check."""


@dataclass(frozen=True)
class AggregateReport:
    """Operating characteristics of one (scenario, policy, missingness, mode) cell."""

    scenario: Scenario
    replications: int
    mean_pstar: float
    se_pstar: float
    mean_ons: float
    se_ons: float
    # per-arm statistics over replications where the arm's p_hat is defined
    bias: tuple[float, float]                 # mean p_hat_k - p_k
    se_bias: tuple[float, float]
    cov_over_mean_n: tuple[float, float]      # Cov[N_k, p_hat_k] / E[N_k]
    mean_n: tuple[float, float]
    undefined_fraction: tuple[float, float]
    residual: tuple[float, float]             # cov/E[N] - (p_k - mean p_hat_k)
    residual_se: tuple[float, float]          # bootstrap SE of the residual


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")
    return mean, se


def aggregate(results: list[TrialResult], scenario: Scenario,
              bootstrap_seed: int = 0) -> AggregateReport:
    """Fold replications of one cell into an AggregateReport.

    Deterministic for a fixed replication order; the bootstrap SE of the
    covariance-identity residual uses its own seeded stream.
    """
    if len(results) < 2:
        raise ValueError("need at least two replications to aggregate")
    for r in results:
        if r.scenario != scenario:
            raise ValueError("mixed scenarios in one aggregation")

    reps = len(results)
    pstar = np.array([r.pstar for r in results])
    ons = np.array([r.observed_successes for r in results], dtype=float)
    mean_pstar, se_pstar = _mean_se(pstar)
    mean_ons, se_ons = _mean_se(ons)

    bias = [float("nan")] * 2
    se_bias = [float("nan")] * 2
    cov_over_mean_n = [float("nan")] * 2
    mean_n = [float("nan")] * 2
    undefined = [0.0] * 2
    residual = [float("nan")] * 2
    residual_se = [float("nan")] * 2
    rng = np.random.Generator(np.random.Philox(key=np.uint64(bootstrap_seed)))

    for arm in range(2):
        p_hat = np.array([r.final_estimates[arm] for r in results])
        n_assigned = np.array([r.arms[arm].assigned for r in results], dtype=float)
        defined = ~np.isnan(p_hat)
        undefined[arm] = float(np.mean(~defined))
        if defined.sum() < 2:
            continue
        p_hat = p_hat[defined]
        n_assigned = n_assigned[defined]
        p_true = scenario.true_p(arm)
        bias[arm], se_bias[arm] = _mean_se(p_hat - p_true)
        cov = float(np.cov(n_assigned, p_hat, ddof=1)[0, 1])
        mean_n[arm] = float(np.mean(n_assigned))
        cov_over_mean_n[arm] = cov / mean_n[arm]
        residual[arm] = cov_over_mean_n[arm] - (p_true - float(np.mean(p_hat)))
        stats = np.empty(BOOTSTRAP_RESAMPLES)
        m = len(p_hat)
        for b in range(BOOTSTRAP_RESAMPLES):
            idx = rng.integers(0, m, size=m)
            nb, pb = n_assigned[idx], p_hat[idx]
            covb = float(np.cov(nb, pb, ddof=1)[0, 1])
            stats[b] = covb / np.mean(nb) - (p_true - np.mean(pb))
        residual_se[arm] = float(np.std(stats, ddof=1))

    return AggregateReport(
        scenario=scenario, replications=reps,
        mean_pstar=mean_pstar, se_pstar=se_pstar,
        mean_ons=mean_ons, se_ons=se_ons,
        bias=tuple(bias), se_bias=tuple(se_bias),
        cov_over_mean_n=tuple(cov_over_mean_n), mean_n=tuple(mean_n),
        undefined_fraction=tuple(undefined),
        residual=tuple(residual), residual_se=tuple(residual_se))


def bias_identity_residual(report: AggregateReport, arm: int,
                           max_undefined: float = 0.01) -> float:
    """Residual of Cov[N, p_hat]/E[N] = p - E[p_hat] for one arm.

    Zero up to Monte Carlo noise for randomized rules; compare against
    ``report.residual_se``. Refuses to answer when too many replications had
    an undefined estimate, since the conditional statistics then no longer
    estimate the identity's unconditional moments.
    """
    frac = report.undefined_fraction[arm]
    if frac > max_undefined:
        raise UnusableEstimateError(
            f"arm {arm}: {frac:.1%} of replications had an undefined estimate "
            f"(threshold {max_undefined:.1%})")
    return report.residual[arm]
