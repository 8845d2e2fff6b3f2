"""Shared state, configuration and result types for two-armed trial simulation.

Arm 0 is the control arm, arm 1 the experimental arm. All allocation rules
read a Beta decision state built from a (possibly non-integer) prior plus the
outcomes observed so far; imputed outcomes, when an imputation mode is active,
are folded into the decision state but kept in separate counters so that
observed-only quantities can always be recovered.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

ARMS = 2


class Algorithm(str, Enum):
    """Allocation rules: fixed randomization plus the nine bandit rules."""

    FR = "FR"            # fixed randomization (Thompson exponent c = 0)
    TTS = "TTS"          # tuned Thompson sampling, c = t / (2n)
    RTS = "RTS"          # raw Thompson sampling, c = 1
    RPW = "RPW"          # randomized play-the-winner urn
    CB = "CB"            # current belief (greedy posterior mean)
    GI = "GI"            # Gittins index, discount 0.99
    UCB = "UCB"          # upper confidence bound, beta = sqrt(2 ln t)
    RANDUCB = "RandUCB"  # UCB with a discrete random exploration width
    RBI = "RBI"          # randomized belief index (exponential perturbation)
    RGI = "RGI"          # randomized Gittins index

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


RANDOMIZED_ALGORITHMS = frozenset({Algorithm.FR, Algorithm.TTS, Algorithm.RTS, Algorithm.RPW})
INDEXED_ALGORITHMS = frozenset(
    {Algorithm.CB, Algorithm.GI, Algorithm.UCB, Algorithm.RANDUCB, Algorithm.RBI, Algorithm.RGI}
)
GITTINS_ALGORITHMS = frozenset({Algorithm.GI, Algorithm.RGI})


@dataclass
class ArmState:
    """Beta decision state plus outcome bookkeeping for one arm.

    ``prior_successes``/``prior_failures`` are pseudo-counts (default uniform
    prior 1, 1). ``observed_*`` track responses that actually arrived,
    ``missing_count`` the ones that never did, and ``imputed_*`` the Bernoulli
    stand-ins injected by an imputation mode. Assigned patients
    N = observed + missing.
    """

    prior_successes: float = 1.0
    prior_failures: float = 1.0
    observed_successes: int = 0
    observed_failures: int = 0
    missing_count: int = 0
    imputed_successes: int = 0
    imputed_failures: int = 0

    def __post_init__(self) -> None:
        if self.prior_successes <= 0 or self.prior_failures <= 0:
            raise ValueError("prior pseudo-counts must be positive")
        for name in ("observed_successes", "observed_failures", "missing_count",
                     "imputed_successes", "imputed_failures"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.imputed_successes + self.imputed_failures > self.missing_count:
            raise ValueError("imputed outcomes cannot exceed missing outcomes")

    @property
    def assigned(self) -> int:
        """Patients assigned to this arm: observed plus missing."""
        return self.observed_successes + self.observed_failures + self.missing_count

    @property
    def observed(self) -> int:
        return self.observed_successes + self.observed_failures

    @property
    def decision_successes(self) -> float:
        """Success pseudo-count the allocation rules see (prior + observed + imputed)."""
        return self.prior_successes + self.observed_successes + self.imputed_successes

    @property
    def decision_failures(self) -> float:
        return self.prior_failures + self.observed_failures + self.imputed_failures

    def observed_rate(self) -> float:
        """Observed-only success estimate S/(S+F); NaN when nothing observed."""
        if self.observed == 0:
            return float("nan")
        return self.observed_successes / self.observed


def posterior_mean(state: ArmState) -> float:
    """Posterior mean success probability (s0+S)/(s0+f0+S+F).

    Imputed outcomes count as observations here because they are part of the
    decision state whenever an imputation mode feeds them in; with imputation
    off the imputed counters are zero and this is the observed-only mean.
    """
    s = state.decision_successes
    f = state.decision_failures
    return s / (s + f)


def effective_observation_count(state: ArmState) -> float:
    """Pseudo-count mass s0+f0+S+F driving every exploration width."""
    return state.decision_successes + state.decision_failures


@dataclass(frozen=True)
class Scenario:
    """True success probabilities and trial size (one catalog row).

    Catalog rows always have trial_size >= 1; 0 is tolerated so the trial
    loop can express its degenerate empty-trial contract.
    """

    p_control: float
    p_experimental: float
    trial_size: int
    label: str = ""

    def __post_init__(self) -> None:
        for p in (self.p_control, self.p_experimental):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"success probability {p} outside [0, 1]")
        if self.trial_size < 0:
            raise ValueError("trial_size must be non-negative")

    def true_p(self, arm: int) -> float:
        return self.p_experimental if arm == 1 else self.p_control


@dataclass(frozen=True)
class MissingnessProfile:
    """Per-arm probability that an assigned patient's outcome goes missing."""

    p0_missing: float
    p1_missing: float
    # missingness beyond 0.5 is unrealistic in the trial setting; allow it
    # only when explicitly requested for stress tests
    allow_extreme: bool = False

    def __post_init__(self) -> None:
        cap = 1.0 if self.allow_extreme else 0.5
        for p in (self.p0_missing, self.p1_missing):
            if not 0.0 <= p <= cap:
                raise ValueError(f"missingness probability {p} outside [0, {cap}]")

    def prob(self, arm: int) -> float:
        return self.p1_missing if arm == 1 else self.p0_missing


@dataclass(frozen=True)
class PolicySpec:
    """Which allocation rule to run, plus its tuning parameters.

    Defaults reproduce the catalog settings: Thompson exponent c = t/(2n) for
    TTS, c = 1 for RTS, c = 0 for FR; Gittins discount 0.99; RandUCB with 20
    support points on [0, 1]; RBI/RGI exponential perturbation with mean equal
    to the number of arms.
    """

    algorithm: Algorithm
    thompson_c: float | None = None     # None = time-varying t/(2n) (TTS only)
    discount: float = 0.99              # GI / RGI
    randucb_points: int = 20            # RandUCB M
    randucb_range: tuple[float, float] = (0.0, 1.0)  # RandUCB [L, U]
    perturbation_mean: float = float(ARMS)           # RBI / RGI Exp mean
    arm_count: int = ARMS

    def __post_init__(self) -> None:
        if not isinstance(self.algorithm, Algorithm):
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.randucb_points < 1:
            raise ValueError("randucb_points must be >= 1")
        lo, hi = self.randucb_range
        if lo > hi:
            raise ValueError("randucb_range must satisfy L <= U")
        if self.perturbation_mean <= 0:
            raise ValueError("perturbation_mean must be positive")
        if self.arm_count != ARMS:
            raise ValueError("only two-armed trials are supported")

    def thompson_exponent(self, t: int, n: int) -> float:
        """Exponent c applied to the superiority probability at patient t of n."""
        if self.algorithm is Algorithm.FR:
            return 0.0
        if self.algorithm is Algorithm.RTS:
            return 1.0 if self.thompson_c is None else self.thompson_c
        if self.algorithm is Algorithm.TTS:
            return t / (2.0 * n) if self.thompson_c is None else self.thompson_c
        raise ValueError(f"{self.algorithm} has no Thompson exponent")

    @classmethod
    def default(cls, algorithm: Algorithm | str) -> "PolicySpec":
        return cls(algorithm=Algorithm(algorithm))


# outcome codes stored in TrialResult.outcome_sequence
OUTCOME_SUCCESS = 0
OUTCOME_FAILURE = 1
OUTCOME_MISSING = 2


@dataclass
class TrialResult:
    """End-of-trial record for one replication."""

    scenario: Scenario
    arms: tuple[ArmState, ArmState]
    assignment_sequence: np.ndarray   # uint8, arm index per patient
    outcome_sequence: np.ndarray      # uint8, OUTCOME_* code per patient
    final_estimates: tuple[float, float] = field(init=False)  # observed-only, NaN if undefined
    pstar: float = field(init=False)  # N_1 / n; NaN for an empty trial

    def __post_init__(self) -> None:
        n = len(self.assignment_sequence)
        if sum(a.assigned for a in self.arms) != n:
            raise ValueError("arm counters inconsistent with assignment sequence")
        self.final_estimates = (self.arms[0].observed_rate(), self.arms[1].observed_rate())
        self.pstar = self.arms[1].assigned / n if n > 0 else float("nan")

    @property
    def trial_size(self) -> int:
        return len(self.assignment_sequence)

    @property
    def observed_successes(self) -> int:
        """ONS for this replication: observed successes over both arms."""
        return self.arms[0].observed_successes + self.arms[1].observed_successes
