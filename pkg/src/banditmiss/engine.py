"""Single-trial simulation under missing-at-random outcomes.

Per patient t = 1..n: the allocation rule picks an arm from the current
decision state; a missingness draw decides whether the outcome is lost; lost
outcomes leave the decision state untouched unless an imputation mode is
active, in which case a Bernoulli stand-in at the current observed success
rate is folded into the decision state (and counted separately).

Randomness discipline
---------------------
Each replication owns five counter-based (Philox) streams derived from one
``numpy.random.SeedSequence``, in this order: selection, outcome,
missingness, perturbation, imputation. Every stream pre-draws one value per
patient index (two for the per-arm perturbation), and a draw is consulted
only when relevant to the step. Because draws are indexed by patient rather
than consumed sequentially, runs that differ only in unconsulted draws are
aligned draw-for-draw: a trial with no missingness is bit-identical across
imputation modes, and RandUCB with a degenerate support reproduces UCB's
decision sequence exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ARMS,
    Algorithm,
    ArmState,
    MissingnessProfile,
    PolicySpec,
    OUTCOME_FAILURE,
    OUTCOME_MISSING,
    OUTCOME_SUCCESS,
    Scenario,
    TrialResult,
    GITTINS_ALGORITHMS,
)
from .gittins import GittinsTable, shared_table
from .policies import UrnState, decide, randucb_supports, rpw_update


class ImputationMode(str, Enum):
    NONE = "none"
    MEAN_HALF = "mean_default_half"
    MEAN_NINE_TENTHS = "mean_default_nine_tenths"
    MEAN_AFTER_FIRST = "mean_after_first_observation"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


_DEFAULT_ESTIMATE = {
    ImputationMode.MEAN_HALF: 0.5,
    ImputationMode.MEAN_NINE_TENTHS: 0.9,
}


def current_success_estimate(state: ArmState, mode: ImputationMode) -> float:
    """Observed-only success rate used to impute a missing outcome.

    Before any outcome is observed the mean-default modes fall back to their
    initial value (0.5 or 0.9); under mean_after_first_observation no
    estimate exists yet (NaN) and the trial loop leaves such outcomes as pure
    missing, never retro-imputing them.
    """
    mode = ImputationMode(mode)
    if mode is ImputationMode.NONE:
        raise ValueError("no success estimate is defined when imputation is off")
    observed = state.observed
    if observed == 0:
        if mode is ImputationMode.MEAN_AFTER_FIRST:
            return float("nan")
        return _DEFAULT_ESTIMATE[mode]
    return state.observed_successes / observed


# stream slots within a replication's seed block
STREAM_SELECTION = 0
STREAM_OUTCOME = 1
STREAM_MISSINGNESS = 2
STREAM_PERTURBATION = 3
STREAM_IMPUTATION = 4


def replication_streams(seed) -> list[np.random.Generator]:
    """The five Philox streams for one replication, from any seed-like value."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    keys = ss.generate_state(10, dtype=np.uint64).reshape(5, 2)
    return [np.random.Generator(np.random.Philox(key=keys[j])) for j in range(5)]


@dataclass
class TrialDraws:
    """Pre-drawn randomness for one replication, indexed by patient."""

    u_select: np.ndarray       # (n,)
    u_outcome: np.ndarray      # (n,)
    u_missing: np.ndarray      # (n,)
    perturbation: np.ndarray   # (n, 2); zeros unless the rule perturbs
    u_impute: np.ndarray       # (n,); zeros when imputation is off


def draw_trial_randomness(seed, n: int, policy: PolicySpec,
                          mode: ImputationMode) -> TrialDraws:
    gens = replication_streams(seed)
    u_select = gens[STREAM_SELECTION].random(n)
    u_outcome = gens[STREAM_OUTCOME].random(n)
    u_missing = gens[STREAM_MISSINGNESS].random(n)
    if policy.algorithm is Algorithm.RANDUCB:
        supports = randucb_supports(policy)
        picks = gens[STREAM_PERTURBATION].integers(0, len(supports), size=(n, 2))
        perturbation = supports[picks]
    elif policy.algorithm in (Algorithm.RBI, Algorithm.RGI):
        perturbation = gens[STREAM_PERTURBATION].exponential(
            scale=policy.perturbation_mean, size=(n, 2))
    else:
        perturbation = np.zeros((n, 2))
    if mode is not ImputationMode.NONE:
        u_impute = gens[STREAM_IMPUTATION].random(n)
    else:
        u_impute = np.zeros(n)
    return TrialDraws(u_select, u_outcome, u_missing, perturbation, u_impute)


def require_table(policy: PolicySpec, scenario: Scenario, prior_mass: float,
                  table: GittinsTable | None) -> GittinsTable | None:
    if policy.algorithm not in GITTINS_ALGORITHMS:
        return None
    if table is None:
        table = shared_table(discount=policy.discount)
    if abs(table.discount - policy.discount) > 1e-12:
        raise ValueError("Gittins table discount does not match the policy")
    if not table.covers_trial(scenario.trial_size, prior_mass):
        raise ValueError(
            f"trial size {scenario.trial_size} plus prior mass {prior_mass:g} exceeds "
            f"the precomputed Gittins bound {table.max_state}")
    return table


def run_trial(scenario: Scenario, missingness: MissingnessProfile,
              policy: PolicySpec, mode: ImputationMode | str, seed,
              table: GittinsTable | None = None,
              prior: tuple[float, float] = (1.0, 1.0)) -> TrialResult:
    """Run one replication end to end and return its TrialResult.

    ``seed`` is anything accepted by numpy's SeedSequence (the experiment
    layer passes the tuple (master_seed, cell_key, replication_index));
    identical inputs give a bit-identical result.
    """
    mode = ImputationMode(mode)
    n = scenario.trial_size
    prior_s, prior_f = prior
    table = require_table(policy, scenario, prior_s + prior_f, table)
    draws = draw_trial_randomness(seed, n, policy, mode)

    arm0 = ArmState(prior_successes=prior_s, prior_failures=prior_f)
    arm1 = ArmState(prior_successes=prior_s, prior_failures=prior_f)
    arms = (arm0, arm1)
    urn = UrnState() if policy.algorithm is Algorithm.RPW else None
    assignment = np.zeros(n, dtype=np.uint8)
    outcomes = np.zeros(n, dtype=np.uint8)

    for i in range(n):
        t = i + 1
        decision = decide(policy,
                          arm0.decision_successes, arm0.decision_failures,
                          arm1.decision_successes, arm1.decision_failures,
                          t, n, draws.u_select[i],
                          draws.perturbation[i, 0], draws.perturbation[i, 1],
                          urn, table)
        k = decision.chosen_arm
        state = arms[k]
        assignment[i] = k
        if draws.u_missing[i] < missingness.prob(k):
            outcomes[i] = OUTCOME_MISSING
            state.missing_count += 1
            if mode is not ImputationMode.NONE and not (
                    mode is ImputationMode.MEAN_AFTER_FIRST and state.observed == 0):
                p_hat = current_success_estimate(state, mode)
                success = draws.u_impute[i] < p_hat
                if success:
                    state.imputed_successes += 1
                else:
                    state.imputed_failures += 1
                if urn is not None:
                    urn = rpw_update(urn, k, success)
        else:
            success = draws.u_outcome[i] < scenario.true_p(k)
            if success:
                outcomes[i] = OUTCOME_SUCCESS
                state.observed_successes += 1
            else:
                outcomes[i] = OUTCOME_FAILURE
                state.observed_failures += 1
            if urn is not None:
                urn = rpw_update(urn, k, success)

    return TrialResult(scenario=scenario, arms=arms,
                       assignment_sequence=assignment, outcome_sequence=outcomes)


def simulate_replications(scenario: Scenario, missingness: MissingnessProfile,
                          policy: PolicySpec, mode: ImputationMode | str,
                          master_seed: int, cell_key: int,
                          rep_start: int, rep_count: int,
                          table: GittinsTable | None = None,
                          prior: tuple[float, float] = (1.0, 1.0)) -> list[TrialResult]:
    """Replications [rep_start, rep_start + rep_count) of one configuration.

    Replication r is seeded by SeedSequence((master_seed, cell_key, r)), so
    results are independent of how the range is chunked. Uses the compiled
    batch kernel when eligible, the reference loop otherwise; both are
    bit-identical by construction.
    """
    from . import _kernel

    mode = ImputationMode(mode)
    if _kernel.kernel_eligible(policy, prior, scenario.trial_size):
        return _kernel.simulate_batch(scenario, missingness, policy, mode,
                                      master_seed, cell_key, rep_start, rep_count,
                                      table=table, prior=prior)
    return [run_trial(scenario, missingness, policy, mode,
                      np.random.SeedSequence((master_seed, cell_key, rep)),
                      table=table, prior=prior)
            for rep in range(rep_start, rep_start + rep_count)]
