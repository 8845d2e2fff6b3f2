"""Named figure reproductions: plan catalog, manifest, and rendering.

Each figure id expands to an experiment plan; the runner emits the backing
CSV plus a manifest that names the axes and series so any plotting tool can
redraw it, and a rendered PNG for direct inspection. Line figures facet
scenarios (rows) by algorithms (columns) with one colored line per
missingness family; heatmap figures show the full 6x6 missingness grid for
three representative algorithms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .core import Algorithm, PolicySpec, Scenario  # noqa: E402
from .engine import ImputationMode  # noqa: E402
from .experiments import (  # noqa: E402
    ALTERNATIVE_SCENARIO_LABELS,
    NULL_SCENARIO_LABELS,
    ExperimentPlan,
    PROFILE_SETS,
    scenario_by_label,
)

ALL_ALGORITHMS = (Algorithm.FR, Algorithm.TTS, Algorithm.RTS, Algorithm.RPW,
                  Algorithm.CB, Algorithm.GI, Algorithm.UCB, Algorithm.RANDUCB,
                  Algorithm.RBI, Algorithm.RGI)
HEATMAP_ALGORITHMS = (Algorithm.TTS, Algorithm.CB, Algorithm.UCB)

KIND_COLORS = {"equal": "0.45", "control_only": "tab:blue", "experimental_only": "tab:red"}

# single-figure scenarios from the appendix that are not catalog rows
_EXTRA_SCENARIOS = {
    "NULL07": Scenario(0.70, 0.70, 200, "NULL07"),
    "ALT0709": Scenario(0.70, 0.90, 200, "ALT0709"),
}


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    title: str
    kind: str                      # "lines" | "heatmap"
    y_metric: str                  # "mean_pstar" | "mean_ons" | "bias"
    scenarios: tuple[str, ...]
    policies: tuple[Algorithm, ...]
    modes: tuple[str, ...]
    profile_set: str               # "sixteen" | "grid36"

    def plan(self, seed: int, scale: float = 1.0) -> ExperimentPlan:
        scenarios = [_EXTRA_SCENARIOS.get(lbl) or scenario_by_label(lbl)
                     for lbl in self.scenarios]
        plan = ExperimentPlan(
            scenarios=scenarios,
            profiles=PROFILE_SETS[self.profile_set](),
            policies=[PolicySpec.default(a) for a in self.policies],
            modes=[ImputationMode(m) for m in self.modes],
            master_seed=seed)
        return plan.scaled(scale)


def _lines(figure_id, title, scenarios, y_metric="mean_pstar",
           modes=("none",), policies=ALL_ALGORITHMS) -> FigureSpec:
    return FigureSpec(figure_id, title, "lines", y_metric, tuple(scenarios),
                      tuple(policies), tuple(modes), "sixteen")


def _heatmap(figure_id, title, scenario_label) -> FigureSpec:
    return FigureSpec(figure_id, title, "heatmap", "mean_pstar", (scenario_label,),
                      HEATMAP_ALGORITHMS, ("none",), "grid36")


FIGURES: dict[str, FigureSpec] = {
    "fig2": _heatmap("fig2", "Allocation proportion over the missingness grid (null, p=0.9)", "S5"),
    "fig3": _lines("fig3", "Allocation proportion under the null", NULL_SCENARIO_LABELS),
    "fig4": _lines("fig4", "Allocation proportion under the alternative", ALTERNATIVE_SCENARIO_LABELS),
    "fig5": _lines("fig5", "Mean imputation under the null (initial estimate 0.5)",
                   NULL_SCENARIO_LABELS, modes=("none", "mean_default_half")),
    "fig6": _lines("fig6", "Mean imputation under the alternative (initial estimate 0.5)",
                   ALTERNATIVE_SCENARIO_LABELS, modes=("none", "mean_default_half")),
    "s3": _heatmap("s3", "Allocation proportion over the missingness grid (null, p=0.7)", "NULL07"),
    "s4": _heatmap("s4", "Allocation proportion over the missingness grid (alternative, 0.7 vs 0.9)",
                   "ALT0709"),
    "s6": _lines("s6", "Observed successes under the null", NULL_SCENARIO_LABELS,
                 y_metric="mean_ons"),
    "s7": _lines("s7", "Observed successes under the alternative", ALTERNATIVE_SCENARIO_LABELS,
                 y_metric="mean_ons"),
    "s8": _lines("s8", "Mean imputation under the null (initial estimate 0.9)",
                 NULL_SCENARIO_LABELS, modes=("none", "mean_default_nine_tenths")),
    "s9": _lines("s9", "Mean imputation under the alternative (initial estimate 0.9)",
                 ALTERNATIVE_SCENARIO_LABELS, modes=("none", "mean_default_nine_tenths")),
    "s10": _lines("s10", "Imputation only after the first observation (null)",
                  NULL_SCENARIO_LABELS, modes=("none", "mean_after_first_observation")),
    "s11": _lines("s11", "Imputation only after the first observation (alternative)",
                  ALTERNATIVE_SCENARIO_LABELS, modes=("none", "mean_after_first_observation")),
    "s12": _lines("s12", "Estimator bias at trial end under the null", NULL_SCENARIO_LABELS,
                  y_metric="bias"),
    "s13": _lines("s13", "Estimator bias at trial end under the alternative",
                  ALTERNATIVE_SCENARIO_LABELS, y_metric="bias"),
}


def manifest(spec: FigureSpec, plan: ExperimentPlan, csv_name: str, png_name: str | None,
             seed: int, scale: float) -> dict:
    if spec.kind == "heatmap":
        axes = {
            "x": "p1_missing", "y": "p0_missing", "value": spec.y_metric,
            "panels": "algorithm",
        }
    else:
        axes = {
            "x": "missingness probability of the varying arm "
                 "(p0_missing for the equal and control-only families, "
                 "p1_missing for the experimental-only family)",
            "y": spec.y_metric,
            "series": {
                "color": "missingness family: equal (grey, p0_missing == p1_missing), "
                         "control-only (blue, p1_missing == 0), "
                         "experimental-only (red, p0_missing == 0)",
                "linestyle": ("imputation_mode (solid none, dashed imputed)"
                              if len(spec.modes) > 1 else
                              "arm (solid experimental, dashed control)"
                              if spec.y_metric == "bias" else "single"),
            },
            "panel_rows": "scenario",
            "panel_cols": "algorithm",
        }
    return {
        "figure": spec.figure_id,
        "title": spec.title,
        "kind": spec.kind,
        "metric": spec.y_metric,
        "axes": axes,
        "scenarios": list(spec.scenarios),
        "algorithms": [a.value for a in spec.policies],
        "imputation_modes": list(spec.modes),
        "replications": plan.replications,
        "tts_replications": plan.tts_replications,
        "seed": seed,
        "scale": scale,
        "csv": csv_name,
        "png": png_name,
    }


def _column(row: dict[str, str], name: str) -> float:
    value = row[name]
    return float("nan") if value == "NA" else float(value)


def _family_rows(rows, family: str):
    if family == "equal":
        sel = [r for r in rows if r["p0_missing"] == r["p1_missing"]]
        return sorted(sel, key=lambda r: float(r["p0_missing"])), "p0_missing"
    if family == "control_only":
        sel = [r for r in rows if float(r["p1_missing"]) == 0.0]
        return sorted(sel, key=lambda r: float(r["p0_missing"])), "p0_missing"
    sel = [r for r in rows if float(r["p0_missing"]) == 0.0]
    return sorted(sel, key=lambda r: float(r["p1_missing"])), "p1_missing"


def _render_lines(spec: FigureSpec, rows: list[dict[str, str]], path: Path) -> None:
    scenario_order = list(spec.scenarios)
    algorithms = [a.value for a in spec.policies]
    nrows, ncols = len(scenario_order), len(algorithms)
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.1 * ncols, 1.9 * nrows),
                             sharex=True, sharey="row", squeeze=False)
    bias_arms = [("bias_arm1", "-"), ("bias_arm0", "--")] if spec.y_metric == "bias" else None
    for i, label in enumerate(scenario_order):
        for j, alg in enumerate(algorithms):
            ax = axes[i, j]
            facet = [r for r in rows if r["scenario"] == label and r["algorithm"] == alg]
            for family, color in KIND_COLORS.items():
                for mode_idx, mode in enumerate(spec.modes):
                    sub = [r for r in facet if r["imputation_mode"] == mode]
                    line, xcol = _family_rows(sub, family)
                    if not line:
                        continue
                    x = [float(r[xcol]) for r in line]
                    if bias_arms:
                        for col, style in bias_arms:
                            ax.plot(x, [_column(r, col) for r in line], style,
                                    color=color, lw=1.0)
                    else:
                        style = "-" if mode_idx == 0 else "--"
                        ax.plot(x, [_column(r, spec.y_metric) for r in line], style,
                                color=color, lw=1.0)
            if spec.y_metric == "mean_pstar":
                ax.axhline(0.5, color="0.85", lw=0.6, zorder=0)
            elif spec.y_metric == "bias":
                ax.axhline(0.0, color="0.85", lw=0.6, zorder=0)
            if i == 0:
                ax.set_title(alg, fontsize=9)
            if j == 0:
                ax.set_ylabel(f"{label}\n{spec.y_metric}", fontsize=8)
            ax.tick_params(labelsize=7)
    for ax in axes[-1]:
        ax.set_xlabel("missingness prob.", fontsize=8)
    fig.suptitle(spec.title, fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_heatmap(spec: FigureSpec, rows: list[dict[str, str]], path: Path) -> None:
    from .experiments import MISSINGNESS_VALUES

    values = list(MISSINGNESS_VALUES)
    algorithms = [a.value for a in spec.policies]
    fig, axes = plt.subplots(1, len(algorithms), figsize=(3.4 * len(algorithms), 3.2),
                             squeeze=False)
    import numpy as np

    for j, alg in enumerate(algorithms):
        ax = axes[0, j]
        grid = np.full((len(values), len(values)), np.nan)
        for r in rows:
            if r["algorithm"] != alg:
                continue
            i0 = values.index(float(r["p0_missing"]))
            i1 = values.index(float(r["p1_missing"]))
            grid[i0, i1] = _column(r, spec.y_metric)
        dev = np.nanmax(np.abs(grid - 0.5))
        im = ax.imshow(grid, origin="lower", cmap="coolwarm",
                       vmin=0.5 - dev, vmax=0.5 + dev)
        for i0 in range(len(values)):
            for i1 in range(len(values)):
                if not np.isnan(grid[i0, i1]):
                    ax.text(i1, i0, f"{grid[i0, i1]:.2f}", ha="center", va="center",
                            fontsize=7)
        ax.set_xticks(range(len(values)), [f"{v:g}" for v in values], fontsize=7)
        ax.set_yticks(range(len(values)), [f"{v:g}" for v in values], fontsize=7)
        ax.set_xlabel("p1_missing", fontsize=8)
        if j == 0:
            ax.set_ylabel("p0_missing", fontsize=8)
        ax.set_title(alg, fontsize=9)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle(spec.title, fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figure(spec: FigureSpec, rows: list[dict[str, str]], path: str | Path) -> None:
    """Draw the named figure from its backing CSV rows to an image file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "heatmap":
        _render_heatmap(spec, rows, path)
    else:
        _render_lines(spec, rows, path)


def write_manifest(path: str | Path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
