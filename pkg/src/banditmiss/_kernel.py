"""Batched replication kernel: the trial loop compiled for replication-scale
runs.

Mirrors ``engine.run_trial`` step for step, consuming the same pre-drawn
randomness, so results are bit-identical to the reference loop (asserted in
the test suite). Eligible whenever the prior pseudo-counts are integers;
anything else falls back to the reference loop.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit
from numba.core import types
from numba.typed import Dict

from .core import Algorithm, ArmState, MissingnessProfile, PolicySpec, Scenario, TrialResult
from .engine import ImputationMode, draw_trial_randomness, require_table
from .gittins import GittinsTable

ALG_CODE = {
    Algorithm.FR: 0, Algorithm.TTS: 1, Algorithm.RTS: 2, Algorithm.RPW: 3,
    Algorithm.CB: 4, Algorithm.GI: 5, Algorithm.UCB: 6, Algorithm.RANDUCB: 7,
    Algorithm.RBI: 8, Algorithm.RGI: 9,
}
MODE_CODE = {
    ImputationMode.NONE: 0, ImputationMode.MEAN_HALF: 1,
    ImputationMode.MEAN_NINE_TENTHS: 2, ImputationMode.MEAN_AFTER_FIRST: 3,
}


@njit(cache=True)
def _betaln(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@njit(cache=True)
def _superiority(a0, b0, a1, b1, cache):
    """P(p1 > p0), same lgamma sum as policies._superiority_exact."""
    key = ((a0 * 2048 + b0) * 2048 + a1) * 2048 + b1
    if key in cache:
        return cache[key]
    base = _betaln(float(a0), float(b0))
    bb = float(b0 + b1)
    total = 0.0
    for i in range(a1):
        total += math.exp(_betaln(a0 + i, bb) - math.log(b1 + i)
                          - _betaln(1.0 + i, b1) - base)
    cache[key] = total
    return total


@njit(cache=True)
def _run_batch(alg, n, p0, p1, pm0, pm1, ps0, pf0, ps1, pf1, mode, phat0,
               c_fixed, time_varying_c, gtab, u_sel, u_out, u_miss, z, u_imp,
               cache, out_assign, out_outcome, out_counts):
    """Run a batch of replications; counters per rep land in out_counts rows
    (S0, F0, M0, SI0, FI0, S1, F1, M1, SI1, FI1)."""
    reps = u_sel.shape[0]
    for r in range(reps):
        S0 = F0 = M0 = SI0 = FI0 = 0
        S1 = F1 = M1 = SI1 = FI1 = 0
        b0 = 1
        b1 = 1  # urn balls (RPW only)
        for i in range(n):
            t = i + 1
            d0s = ps0 + S0 + SI0
            d0f = pf0 + F0 + FI0
            d1s = ps1 + S1 + SI1
            d1f = pf1 + F1 + FI1
            if alg <= 3:
                if alg == 0:
                    pi1 = 0.5
                elif alg == 3:
                    pi1 = b1 / (b0 + b1)
                else:
                    q = _superiority(d0s, d0f, d1s, d1f, cache)
                    c = t / (2.0 * n) if time_varying_c else c_fixed
                    if c == 0.0:
                        pi1 = 0.5
                    else:
                        num = q**c
                        pi1 = num / (num + (1.0 - q) ** c)
                arm = 1 if u_sel[r, i] < pi1 else 0
            else:
                if alg == 4:
                    i0 = d0s / (d0s + d0f)
                    i1 = d1s / (d1s + d1f)
                elif alg == 5:
                    i0 = gtab[d0s, d0f]
                    i1 = gtab[d1s, d1f]
                elif alg == 6:
                    width = math.sqrt(2.0 * math.log(t))
                    i0 = d0s / (d0s + d0f) + width / math.sqrt(d0s + d0f)
                    i1 = d1s / (d1s + d1f) + width / math.sqrt(d1s + d1f)
                elif alg == 7:
                    i0 = d0s / (d0s + d0f) + z[r, i, 0] / math.sqrt(d0s + d0f)
                    i1 = d1s / (d1s + d1f) + z[r, i, 1] / math.sqrt(d1s + d1f)
                elif alg == 8:
                    i0 = d0s / (d0s + d0f) + z[r, i, 0] * 2 / (d0s + d0f)
                    i1 = d1s / (d1s + d1f) + z[r, i, 1] * 2 / (d1s + d1f)
                else:
                    i0 = gtab[d0s, d0f] + z[r, i, 0] * 2 / (d0s + d0f)
                    i1 = gtab[d1s, d1f] + z[r, i, 1] * 2 / (d1s + d1f)
                if i0 == i1:
                    arm = 1 if u_sel[r, i] < 0.5 else 0
                else:
                    arm = 1 if i1 > i0 else 0
            out_assign[r, i] = arm
            pm = pm1 if arm == 1 else pm0
            if u_miss[r, i] < pm:
                out_outcome[r, i] = 2
                if arm == 1:
                    M1 += 1
                else:
                    M0 += 1
                if mode != 0:
                    observed = S1 + F1 if arm == 1 else S0 + F0
                    if mode != 3 or observed >= 1:
                        if observed >= 1:
                            p_hat = (S1 / observed) if arm == 1 else (S0 / observed)
                        else:
                            p_hat = phat0
                        success = u_imp[r, i] < p_hat
                        if success:
                            if arm == 1:
                                SI1 += 1
                            else:
                                SI0 += 1
                        else:
                            if arm == 1:
                                FI1 += 1
                            else:
                                FI0 += 1
                        if alg == 3:
                            # ball to the same arm on success, the other on failure
                            if success == (arm == 1):
                                b1 += 1
                            else:
                                b0 += 1
            else:
                p_true = p1 if arm == 1 else p0
                success = u_out[r, i] < p_true
                if success:
                    out_outcome[r, i] = 0
                    if arm == 1:
                        S1 += 1
                    else:
                        S0 += 1
                else:
                    out_outcome[r, i] = 1
                    if arm == 1:
                        F1 += 1
                    else:
                        F0 += 1
                if alg == 3:
                    if success == (arm == 1):
                        b1 += 1
                    else:
                        b0 += 1
        out_counts[r, 0] = S0
        out_counts[r, 1] = F0
        out_counts[r, 2] = M0
        out_counts[r, 3] = SI0
        out_counts[r, 4] = FI0
        out_counts[r, 5] = S1
        out_counts[r, 6] = F1
        out_counts[r, 7] = M1
        out_counts[r, 8] = SI1
        out_counts[r, 9] = FI1


_EMPTY_TABLE = np.zeros((1, 1))


def kernel_eligible(policy: PolicySpec, prior: tuple[float, float], n: int) -> bool:
    """Integer priors only; counts must fit the base-2048 cache key packing."""
    return (float(prior[0]).is_integer() and float(prior[1]).is_integer()
            and max(prior) + n < 2048)


def simulate_batch(scenario: Scenario, missingness: MissingnessProfile,
                   policy: PolicySpec, mode: ImputationMode,
                   master_seed: int, cell_key: int, rep_start: int, rep_count: int,
                   table: GittinsTable | None = None,
                   prior: tuple[float, float] = (1.0, 1.0)) -> list[TrialResult]:
    """Run replications rep_start .. rep_start+rep_count-1 of one cell.

    Per-replication seeding is SeedSequence((master_seed, cell_key, rep)), so
    any chunking of the replication range yields identical trials.
    """
    mode = ImputationMode(mode)
    n = scenario.trial_size
    table = require_table(policy, scenario, prior[0] + prior[1], table)
    u_sel = np.empty((rep_count, n))
    u_out = np.empty((rep_count, n))
    u_miss = np.empty((rep_count, n))
    z = np.zeros((rep_count, n, 2))
    u_imp = np.zeros((rep_count, n))
    for j in range(rep_count):
        draws = draw_trial_randomness(
            np.random.SeedSequence((master_seed, cell_key, rep_start + j)),
            n, policy, mode)
        u_sel[j] = draws.u_select
        u_out[j] = draws.u_outcome
        u_miss[j] = draws.u_missing
        z[j] = draws.perturbation
        u_imp[j] = draws.u_impute

    cache = Dict.empty(key_type=types.int64, value_type=types.float64)
    out_assign = np.zeros((rep_count, n), dtype=np.uint8)
    out_outcome = np.zeros((rep_count, n), dtype=np.uint8)
    out_counts = np.zeros((rep_count, 10), dtype=np.int64)
    gtab = table.values if table is not None else _EMPTY_TABLE
    phat0 = 0.9 if mode is ImputationMode.MEAN_NINE_TENTHS else 0.5
    time_varying_c = (policy.algorithm is Algorithm.TTS and policy.thompson_c is None)
    c_fixed = 0.0
    if policy.algorithm in (Algorithm.TTS, Algorithm.RTS) and not time_varying_c:
        c_fixed = policy.thompson_exponent(1, max(1, n))
    _run_batch(ALG_CODE[policy.algorithm], n,
               scenario.p_control, scenario.p_experimental,
               missingness.p0_missing, missingness.p1_missing,
               int(prior[0]), int(prior[1]), int(prior[0]), int(prior[1]),
               MODE_CODE[mode], phat0, c_fixed, time_varying_c, gtab,
               u_sel, u_out, u_miss, z, u_imp, cache,
               out_assign, out_outcome, out_counts)

    results = []
    for j in range(rep_count):
        c = out_counts[j]
        arms = (ArmState(prior[0], prior[1], int(c[0]), int(c[1]), int(c[2]),
                         int(c[3]), int(c[4])),
                ArmState(prior[0], prior[1], int(c[5]), int(c[6]), int(c[7]),
                         int(c[8]), int(c[9])))
        results.append(TrialResult(scenario=scenario, arms=arms,
                                   assignment_sequence=out_assign[j],
                                   outcome_sequence=out_outcome[j]))
    return results
