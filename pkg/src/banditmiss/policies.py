"""Allocation rules: map per-arm decision states to the next arm.

Randomized rules (FR, TTS, RTS, RPW) draw the arm from an allocation
probability; indexed rules (CB, GI, UCB, RandUCB, RBI, RGI) take the argmax
of per-arm index values with uniform tie-breaking. All randomness is passed
in explicitly (one selection uniform, one perturbation value per arm) so that
a trial driver can pre-draw from dedicated streams; :func:`select_arm` is the
rng-based convenience wrapper over the same decision path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from .core import (
    ARMS,
    Algorithm,
    ArmState,
    PolicySpec,
    effective_observation_count,
    posterior_mean,
)
from .gittins import GittinsTable


@dataclass(frozen=True)
class Decision:
    """Outcome of one allocation step.

    ``diagnostics`` holds the two allocation probabilities (randomized kind)
    or the two index values (indexed kind) actually compared.
    """

    kind: str  # "randomized" | "indexed"
    chosen_arm: int
    diagnostics: tuple[float, float]


@dataclass(frozen=True)
class UrnState:
    """Play-the-winner urn: ball counts per arm, starting at one ball each."""

    balls: tuple[int, int] = (1, 1)

    def __post_init__(self) -> None:
        if min(self.balls) < 0 or sum(self.balls) < ARMS:
            raise ValueError(f"urn must hold at least {ARMS} balls in total")

    def allocation_prob(self, arm: int) -> float:
        return self.balls[arm] / sum(self.balls)


def rpw_update(urn: UrnState, arm: int, success: bool | None) -> UrnState:
    """Wei-Durham update: success adds a ball of the same arm, failure one of
    the other arm, a missing outcome (success=None) adds nothing."""
    if success is None:
        return urn
    target = arm if success else 1 - arm
    balls = list(urn.balls)
    balls[target] += 1
    return UrnState(balls=tuple(balls))


def rpw_draw_and_update(urn: UrnState, feedback: tuple[int, bool | None] | None,
                        rng: np.random.Generator) -> tuple[int, UrnState]:
    """Fold in the latest outcome feedback (arm, success/failure/None) and draw
    the next arm with probability proportional to ball counts."""
    if feedback is not None:
        urn = rpw_update(urn, feedback[0], feedback[1])
    arm = 1 if rng.random() < urn.allocation_prob(1) else 0
    return arm, urn


def _betaln(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@lru_cache(maxsize=1 << 20)
def _superiority_exact(a0: float, b0: float, a1: float, b1: float) -> float:
    """P(p1 > p0) for independent Beta(a1,b1), Beta(a0,b0) with integer a1.

    Closed-form sum over the a1 successes; evaluated in log space. Plain
    loop over lgamma terms so the batch simulation kernel can reproduce the
    values bit for bit.
    """
    base = _betaln(a0, b0)
    bb = b0 + b1
    total = 0.0
    for i in range(int(a1)):
        total += math.exp(_betaln(a0 + i, bb) - math.log(b1 + i)
                          - _betaln(1.0 + i, b1) - base)
    return total


def _superiority_quad(a0: float, b0: float, a1: float, b1: float) -> float:
    """Numerical-integration fallback for non-integer parameters."""
    rv0 = stats.beta(a0, b0)
    rv1 = stats.beta(a1, b1)
    val, _ = integrate.quad(lambda x: rv1.pdf(x) * rv0.cdf(x), 0.0, 1.0, limit=200)
    return min(1.0, max(0.0, val))


def superiority_q(a0: float, b0: float, a1: float, b1: float) -> float:
    """P(p1 > p0) from the four Beta parameters (posterior tie has measure zero)."""
    if float(a1).is_integer() and a1 >= 1:
        return _superiority_exact(a0, b0, a1, b1)
    return _superiority_quad(a0, b0, a1, b1)


def superiority_probability(state0: ArmState, state1: ArmState) -> float:
    """Posterior probability that the experimental arm's rate is the larger one."""
    return superiority_q(state0.decision_successes, state0.decision_failures,
                         state1.decision_successes, state1.decision_failures)


def thompson_allocation(q: float, c: float) -> float:
    """Allocation probability pi_1 = q^c / (q^c + (1-q)^c), with 0**0 == 1."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if c < 0.0:
        raise ValueError("exponent c must be non-negative")
    if c == 0.0:
        return 0.5
    num = q**c
    den = num + (1.0 - q) ** c
    return num / den


def ucb_value(dec_s: float, dec_f: float, t: int) -> float:
    """UCB index from decision pseudo-counts: mean + sqrt(2 ln t) / sqrt(mass)."""
    mass = dec_s + dec_f
    return dec_s / mass + math.sqrt(2.0 * math.log(t)) / math.sqrt(mass)


def ucb_index(state: ArmState, t: int) -> float:
    if t < 1:
        raise ValueError("patient index t is 1-based")
    return ucb_value(state.decision_successes, state.decision_failures, t)


def randucb_supports(spec: PolicySpec) -> np.ndarray:
    """The M equally spaced exploration widths on [L, U] (a single point L if M=1)."""
    lo, hi = spec.randucb_range
    if spec.randucb_points == 1:
        return np.array([lo])
    return np.linspace(lo, hi, spec.randucb_points)


def randucb_value(dec_s: float, dec_f: float, z: float) -> float:
    mass = dec_s + dec_f
    return dec_s / mass + z / math.sqrt(mass)


def randucb_index(state: ArmState, rng: np.random.Generator,
                  spec: PolicySpec | None = None) -> float:
    """Posterior mean plus a random width drawn uniformly from the M support
    points, scaled by 1/sqrt(observation mass). Reproduces UCB when M=1 and
    the support interval is pinned at sqrt(2 ln t)."""
    spec = spec or PolicySpec.default(Algorithm.RANDUCB)
    supports = randucb_supports(spec)
    z = float(supports[rng.integers(0, len(supports))])
    return randucb_value(state.decision_successes, state.decision_failures, z)


def perturbed_value(base: float, dec_s: float, dec_f: float, z: float) -> float:
    """base + z * K / mass, the RBI/RGI exploration term."""
    return base + z * ARMS / (dec_s + dec_f)


def perturbed_index(base: float, state: ArmState, rng: np.random.Generator,
                    mean: float = float(ARMS)) -> float:
    """Randomly perturbed index: base plus an exponential draw (mean ``mean``)
    scaled by K/mass. Used by RBI (base = posterior mean) and RGI (base =
    Gittins table lookup)."""
    z = rng.exponential(scale=mean)
    return perturbed_value(base, state.decision_successes, state.decision_failures, z)


def allocation_prob1(spec: PolicySpec, d0s: float, d0f: float, d1s: float,
                     d1f: float, t: int, n: int, urn: UrnState | None) -> float:
    """pi_1 for the randomized rules, from raw decision pseudo-counts."""
    alg = spec.algorithm
    if alg is Algorithm.FR:
        return 0.5
    if alg is Algorithm.RPW:
        if urn is None:
            raise ValueError("RPW needs an urn state")
        return urn.allocation_prob(1)
    q = superiority_q(d0s, d0f, d1s, d1f)
    return thompson_allocation(q, spec.thompson_exponent(t, n))


def index_value(spec: PolicySpec, dec_s: float, dec_f: float, t: int,
                z: float, table: GittinsTable | None) -> float:
    """Index of one arm for the indexed rules, from raw decision pseudo-counts."""
    alg = spec.algorithm
    if alg is Algorithm.CB:
        return dec_s / (dec_s + dec_f)
    if alg is Algorithm.UCB:
        return ucb_value(dec_s, dec_f, t)
    if alg is Algorithm.RANDUCB:
        return randucb_value(dec_s, dec_f, z)
    if alg is Algorithm.GI or alg is Algorithm.RGI:
        if table is None:
            raise ValueError(f"{alg} needs a Gittins table")
        base = table.lookup(dec_s, dec_f)
        if alg is Algorithm.GI:
            return base
        return perturbed_value(base, dec_s, dec_f, z)
    if alg is Algorithm.RBI:
        return perturbed_value(dec_s / (dec_s + dec_f), dec_s, dec_f, z)
    raise ValueError(f"{alg} is not an indexed rule")


def decide(spec: PolicySpec, d0s: float, d0f: float, d1s: float, d1f: float,
           t: int, n: int, u_select: float, z0: float, z1: float,
           urn: UrnState | None, table: GittinsTable | None) -> Decision:
    """One allocation from explicit decision counts and explicit randomness.

    ``u_select`` resolves the randomized draw (arm 1 iff u < pi_1) and exact
    index ties (arm 1 iff u < 0.5); ``z0``/``z1`` are the per-arm perturbation
    values for RandUCB (support point) and RBI/RGI (exponential draw).
    """
    if spec.algorithm in (Algorithm.FR, Algorithm.TTS, Algorithm.RTS, Algorithm.RPW):
        pi1 = allocation_prob1(spec, d0s, d0f, d1s, d1f, t, n, urn)
        arm = 1 if u_select < pi1 else 0
        return Decision(kind="randomized", chosen_arm=arm, diagnostics=(1.0 - pi1, pi1))
    i0 = index_value(spec, d0s, d0f, t, z0, table)
    i1 = index_value(spec, d1s, d1f, t, z1, table)
    if i0 == i1:
        arm = 1 if u_select < 0.5 else 0
    else:
        arm = 1 if i1 > i0 else 0
    return Decision(kind="indexed", chosen_arm=arm, diagnostics=(i0, i1))


def select_arm(spec: PolicySpec, state0: ArmState, state1: ArmState, t: int,
               rng: np.random.Generator, n: int | None = None,
               urn: UrnState | None = None,
               table: GittinsTable | None = None) -> Decision:
    """Allocate patient t given the two arm states, drawing randomness from rng."""
    if t < 1:
        raise ValueError("patient index t is 1-based")
    if spec.algorithm is Algorithm.TTS and n is None:
        raise ValueError("TTS needs the trial size n for its exponent")
    z0 = z1 = 0.0
    if spec.algorithm is Algorithm.RANDUCB:
        supports = randucb_supports(spec)
        picks = rng.integers(0, len(supports), size=2)
        z0, z1 = float(supports[picks[0]]), float(supports[picks[1]])
    elif spec.algorithm in (Algorithm.RBI, Algorithm.RGI):
        z0, z1 = rng.exponential(scale=spec.perturbation_mean, size=2)
    u_select = float(rng.random())
    return decide(spec, state0.decision_successes, state0.decision_failures,
                  state1.decision_successes, state1.decision_failures,
                  t, n if n is not None else t, u_select, z0, z1, urn, table)


__all__ = [
    "Decision", "UrnState", "rpw_update", "rpw_draw_and_update",
    "superiority_probability", "superiority_q", "thompson_allocation",
    "ucb_index", "ucb_value", "randucb_index", "randucb_value",
    "randucb_supports", "perturbed_index", "perturbed_value",
    "allocation_prob1", "index_value", "decide", "select_arm",
    "posterior_mean", "effective_observation_count",
]
