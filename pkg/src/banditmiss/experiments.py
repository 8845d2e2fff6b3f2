"""Scenario catalog, missingness grids, and the replication-matrix runner.

A plan is the product of scenarios x missingness profiles x policies x
imputation modes; every cell runs R independent replications seeded from
(master seed, cell key, replication index), which makes cell results
independent of execution order, chunking, and worker count.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import yaml

from .core import (
    Algorithm,
    GITTINS_ALGORITHMS,
    MissingnessProfile,
    PolicySpec,
    Scenario,
    TrialResult,
)
from .engine import ImputationMode, simulate_replications
from .gittins import DEFAULT_HORIZON, DEFAULT_MAX_STATE, DEFAULT_TOL, shared_table
from .metrics import AggregateReport, aggregate

BUILTIN_SCENARIOS: tuple[Scenario, ...] = (
    Scenario(0.10, 0.10, 200, "S1"),
    Scenario(0.30, 0.30, 200, "S2"),
    Scenario(0.50, 0.50, 200, "S3"),
    Scenario(0.70, 0.70, 200, "S4"),
    Scenario(0.90, 0.90, 200, "S5"),
    Scenario(0.10, 0.20, 526, "S6"),
    Scenario(0.10, 0.30, 162, "S7"),
    Scenario(0.10, 0.40, 82, "S8"),
    Scenario(0.40, 0.60, 254, "S9"),
    Scenario(0.60, 0.90, 82, "S10"),
    Scenario(0.70, 0.90, 162, "S11"),
    Scenario(0.80, 0.90, 526, "S12"),
)

NULL_SCENARIO_LABELS = ("S1", "S2", "S3", "S4", "S5")
ALTERNATIVE_SCENARIO_LABELS = ("S6", "S7", "S8", "S9", "S10", "S11", "S12")

MISSINGNESS_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)

DEFAULT_REPLICATIONS = 10_000
DEFAULT_TTS_REPLICATIONS = 1_000
DEFAULT_CHUNK = 1_000


class ScenarioNotFoundError(KeyError):
    pass


def builtin_scenarios() -> list[Scenario]:
    return list(BUILTIN_SCENARIOS)


def scenario_by_label(label: str) -> Scenario:
    for sc in BUILTIN_SCENARIOS:
        if sc.label == label:
            return sc
    raise ScenarioNotFoundError(
        f"unknown scenario {label!r}; available: "
        + ", ".join(sc.label for sc in BUILTIN_SCENARIOS))


def grid36_profiles() -> list[MissingnessProfile]:
    return [MissingnessProfile(a, b) for a in MISSINGNESS_VALUES for b in MISSINGNESS_VALUES]


def equal_profiles() -> list[MissingnessProfile]:
    return [MissingnessProfile(v, v) for v in MISSINGNESS_VALUES]


def control_only_profiles() -> list[MissingnessProfile]:
    return [MissingnessProfile(v, 0.0) for v in MISSINGNESS_VALUES]


def experimental_only_profiles() -> list[MissingnessProfile]:
    return [MissingnessProfile(0.0, v) for v in MISSINGNESS_VALUES]


def sixteen_profiles() -> list[MissingnessProfile]:
    """Union of the equal / control-only / experimental-only lines with the
    shared no-missingness point deduplicated: 6 + 6 + 6 - 2 = 16 profiles."""
    seen: list[MissingnessProfile] = []
    for prof in equal_profiles() + control_only_profiles() + experimental_only_profiles():
        if prof not in seen:
            seen.append(prof)
    return seen


PROFILE_SETS: dict[str, Callable[[], list[MissingnessProfile]]] = {
    "grid36": grid36_profiles,
    "equal": equal_profiles,
    "control_only": control_only_profiles,
    "experimental_only": experimental_only_profiles,
    "sixteen": sixteen_profiles,
}


def missingness_kind(profile: MissingnessProfile) -> str:
    """Which line of the sixteen-profile family a profile belongs to."""
    if profile.p0_missing == profile.p1_missing:
        return "equal"
    if profile.p1_missing == 0.0:
        return "control_only"
    if profile.p0_missing == 0.0:
        return "experimental_only"
    return "mixed"


def policy_signature(policy: PolicySpec) -> str:
    """Canonical string identity of a policy, stable across runs."""
    parts = [policy.algorithm.value]
    if policy.algorithm in (Algorithm.TTS, Algorithm.RTS, Algorithm.FR):
        c = "t/2n" if policy.thompson_c is None else f"{policy.thompson_c:g}"
        parts.append(f"c={c}")
    if policy.algorithm in GITTINS_ALGORITHMS:
        parts.append(f"d={policy.discount:g}")
    if policy.algorithm is Algorithm.RANDUCB:
        lo, hi = policy.randucb_range
        parts.append(f"M={policy.randucb_points},L={lo:g},U={hi:g}")
    if policy.algorithm in (Algorithm.RBI, Algorithm.RGI):
        parts.append(f"mean={policy.perturbation_mean:g}")
    return "|".join(parts)


@dataclass(frozen=True)
class Cell:
    """One point of the replication matrix."""

    scenario: Scenario
    profile: MissingnessProfile
    policy: PolicySpec
    mode: ImputationMode
    replications: int

    def key(self) -> int:
        """Stable 63-bit id hashed from the cell configuration."""
        text = "|".join([
            self.scenario.label,
            f"{self.scenario.p_control:g},{self.scenario.p_experimental:g},{self.scenario.trial_size}",
            f"{self.profile.p0_missing:g},{self.profile.p1_missing:g}",
            policy_signature(self.policy),
            self.mode.value,
        ])
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") >> 1

    def describe(self) -> str:
        return (f"{self.scenario.label} {self.policy.algorithm.value} "
                f"pm=({self.profile.p0_missing:g},{self.profile.p1_missing:g}) "
                f"mode={self.mode.value} R={self.replications}")


@dataclass
class ExperimentPlan:
    scenarios: list[Scenario]
    profiles: list[MissingnessProfile]
    policies: list[PolicySpec]
    modes: list[ImputationMode] = field(default_factory=lambda: [ImputationMode.NONE])
    replications: int = DEFAULT_REPLICATIONS
    tts_replications: int = DEFAULT_TTS_REPLICATIONS
    master_seed: int = 0

    def replications_for(self, policy: PolicySpec) -> int:
        if policy.algorithm is Algorithm.TTS:
            return self.tts_replications
        return self.replications

    def cells(self) -> list[Cell]:
        return [Cell(sc, prof, pol, mode, self.replications_for(pol))
                for sc in self.scenarios
                for prof in self.profiles
                for pol in self.policies
                for mode in self.modes]

    def scaled(self, factor: float) -> "ExperimentPlan":
        """Uniformly rescale the replication counts (floor 2)."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return replace(self,
                       replications=max(2, round(self.replications * factor)),
                       tts_replications=max(2, round(self.tts_replications * factor)))


class PlanError(ValueError):
    """A plan file could not be interpreted; message names the bad field."""


def _parse_scenario(entry) -> Scenario:
    if isinstance(entry, str):
        return scenario_by_label(entry)
    if isinstance(entry, dict):
        try:
            return Scenario(p_control=float(entry["p0"]), p_experimental=float(entry["p1"]),
                            trial_size=int(entry["n"]), label=str(entry.get("label", "custom")))
        except KeyError as exc:
            raise PlanError(f"scenarios: inline scenario needs field {exc}") from exc
    raise PlanError(f"scenarios: expected label or mapping, got {entry!r}")


def _parse_policy(entry) -> PolicySpec:
    if isinstance(entry, str):
        try:
            return PolicySpec.default(Algorithm(entry))
        except ValueError as exc:
            raise PlanError(f"policies: unknown algorithm {entry!r}") from exc
    if isinstance(entry, dict):
        kwargs = dict(entry)
        try:
            alg = Algorithm(kwargs.pop("algorithm"))
        except (KeyError, ValueError) as exc:
            raise PlanError(f"policies: bad mapping {entry!r}: {exc}") from exc
        if "randucb_range" in kwargs:
            kwargs["randucb_range"] = tuple(kwargs["randucb_range"])
        try:
            return PolicySpec(algorithm=alg, **kwargs)
        except (TypeError, ValueError) as exc:
            raise PlanError(f"policies: bad parameters for {alg}: {exc}") from exc
    raise PlanError(f"policies: expected name or mapping, got {entry!r}")


def _parse_missingness(entry) -> list[MissingnessProfile]:
    if isinstance(entry, str):
        if entry not in PROFILE_SETS:
            raise PlanError(f"missingness: unknown set {entry!r}; "
                            f"choose from {sorted(PROFILE_SETS)} or give pairs")
        return PROFILE_SETS[entry]()
    if isinstance(entry, list):
        profiles = []
        for item in entry:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise PlanError(f"missingness: expected [p0m, p1m] pair, got {item!r}")
            profiles.append(MissingnessProfile(float(item[0]), float(item[1])))
        return profiles
    raise PlanError(f"missingness: expected set name or list of pairs, got {entry!r}")


def plan_from_mapping(raw: dict) -> ExperimentPlan:
    if not isinstance(raw, dict):
        raise PlanError("plan file must contain a mapping at the top level")
    known = {"seed", "replications", "tts_replications", "scenarios",
             "missingness", "policies", "imputation_modes"}
    unknown = set(raw) - known
    if unknown:
        raise PlanError(f"unknown plan fields: {sorted(unknown)}")
    try:
        scenarios = [_parse_scenario(e) for e in raw.get("scenarios", [])]
    except ScenarioNotFoundError as exc:
        raise PlanError(f"scenarios: {exc.args[0]}") from exc
    policies_raw = raw.get("policies", [])
    if policies_raw == "all":
        policies = [PolicySpec.default(a) for a in Algorithm]
    else:
        policies = [_parse_policy(e) for e in policies_raw]
    profiles = _parse_missingness(raw.get("missingness", "sixteen"))
    try:
        modes = [ImputationMode(m) for m in raw.get("imputation_modes", ["none"])]
    except ValueError as exc:
        raise PlanError(f"imputation_modes: {exc}") from exc
    plan = ExperimentPlan(
        scenarios=scenarios, profiles=profiles, policies=policies, modes=modes,
        replications=int(raw.get("replications", DEFAULT_REPLICATIONS)),
        tts_replications=int(raw.get("tts_replications", DEFAULT_TTS_REPLICATIONS)),
        master_seed=int(raw.get("seed", 0)))
    if plan.replications < 2 or plan.tts_replications < 2:
        raise PlanError("replications: need at least 2 per cell")
    return plan


def load_plan(path: str | Path) -> ExperimentPlan:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise PlanError(f"could not parse {path}: {exc}") from exc
    return plan_from_mapping(raw or {})


@dataclass
class CellOutcome:
    cell: Cell
    report: AggregateReport | None = None
    error: str | None = None


def _table_spec_for(plan_or_cells: Iterable[Cell]) -> dict[float, int]:
    """Discount -> required max_state for every Gittins-backed policy present."""
    needed: dict[float, int] = {}
    for cell in plan_or_cells:
        if cell.policy.algorithm in GITTINS_ALGORITHMS:
            d = cell.policy.discount
            bound = max(DEFAULT_MAX_STATE, cell.scenario.trial_size + 2)
            needed[d] = max(needed.get(d, 0), bound)
    return needed


def _run_chunk(cell: Cell, master_seed: int, rep_start: int, rep_count: int,
               table_spec: tuple | None) -> list[TrialResult]:
    table = None
    if table_spec is not None:
        table = shared_table(*table_spec)
    return simulate_replications(cell.scenario, cell.profile, cell.policy, cell.mode,
                                 master_seed, cell.key(), rep_start, rep_count,
                                 table=table)


def run_cell(cell: Cell, master_seed: int, executor: ProcessPoolExecutor | None = None,
             chunk: int = DEFAULT_CHUNK) -> AggregateReport:
    """Run one cell's replications (optionally across workers) and aggregate."""
    spec = None
    if cell.policy.algorithm in GITTINS_ALGORITHMS:
        bound = max(DEFAULT_MAX_STATE, cell.scenario.trial_size + 2)
        spec = (cell.policy.discount, bound, DEFAULT_TOL, DEFAULT_HORIZON)
        shared_table(*spec)  # materialize in the parent before forking workers
    ranges = [(start, min(chunk, cell.replications - start))
              for start in range(0, cell.replications, chunk)]
    if executor is None:
        parts = [_run_chunk(cell, master_seed, start, count, spec)
                 for start, count in ranges]
    else:
        futures = [executor.submit(_run_chunk, cell, master_seed, start, count, spec)
                   for start, count in ranges]
        parts = [f.result() for f in futures]
    results: list[TrialResult] = []
    for part in parts:  # ranges are in replication order
        results.extend(part)
    return aggregate(results, cell.scenario, bootstrap_seed=cell.key() & 0xFFFFFFFF)


def iter_plan(plan: ExperimentPlan, threads: int = 1,
              progress: Callable[[str], None] | None = None,
              chunk: int = DEFAULT_CHUNK):
    """Yield one CellOutcome per plan cell, in plan order, as cells finish.

    Failed cells are recorded, not fatal. Results are byte-stable across
    ``threads`` settings: per-replication seeding plus in-order aggregation
    make every cell independent of scheduling.
    """
    cells = plan.cells()
    for discount, bound in _table_spec_for(cells).items():
        shared_table(discount, bound, DEFAULT_TOL, DEFAULT_HORIZON)
    executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for i, cell in enumerate(cells):
            try:
                report = run_cell(cell, plan.master_seed, executor=executor, chunk=chunk)
                outcome = CellOutcome(cell=cell, report=report)
                if progress:
                    progress(f"[{i + 1}/{len(cells)}] {cell.describe()} "
                             f"mean_pstar={report.mean_pstar:.4f}")
            except Exception as exc:  # noqa: BLE001 - cell failures are data
                outcome = CellOutcome(cell=cell, error=f"{type(exc).__name__}: {exc}")
                if progress:
                    progress(f"[{i + 1}/{len(cells)}] {cell.describe()} FAILED: {exc}")
            yield outcome
    finally:
        if executor is not None:
            executor.shutdown()


def run_plan(plan: ExperimentPlan, threads: int = 1,
             progress: Callable[[str], None] | None = None,
             chunk: int = DEFAULT_CHUNK) -> list[CellOutcome]:
    """Execute every cell of the plan and collect the outcomes."""
    return list(iter_plan(plan, threads=threads, progress=progress, chunk=chunk))
