"""Delimited output: one row per plan cell.

Numbers are written with 6 significant digits (``%.6g``), '.' decimal,
UTF-8, RFC-4180-style quoting; undefined values use the explicit token NA.
The formatting is idempotent: parsing a row and re-formatting it reproduces
the same bytes, which the suite checks as the round-trip invariant.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import IO, Iterable

from .experiments import CellOutcome

NA = "NA"

COLUMNS = (
    "scenario", "p0", "p1", "n", "algorithm", "p0_missing", "p1_missing",
    "imputation_mode", "replications", "seed",
    "mean_pstar", "se_pstar", "mean_ons", "se_ons",
    "bias_arm0", "bias_arm1", "se_bias_arm0", "se_bias_arm1",
    "cov_over_EN_arm0", "cov_over_EN_arm1",
    "undefined_fraction_arm0", "undefined_fraction_arm1",
)


def fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if math.isnan(value) or math.isinf(value):
        return NA
    return f"{value:.6g}"


def outcome_row(outcome: CellOutcome, master_seed: int) -> dict[str, str]:
    cell = outcome.cell
    row = {
        "scenario": cell.scenario.label,
        "p0": fmt(cell.scenario.p_control),
        "p1": fmt(cell.scenario.p_experimental),
        "n": str(cell.scenario.trial_size),
        "algorithm": cell.policy.algorithm.value,
        "p0_missing": fmt(cell.profile.p0_missing),
        "p1_missing": fmt(cell.profile.p1_missing),
        "imputation_mode": cell.mode.value,
        "replications": str(cell.replications),
        "seed": str(master_seed),
    }
    rep = outcome.report
    if rep is None:
        for col in COLUMNS[10:]:
            row[col] = NA
        return row
    row.update({
        "mean_pstar": fmt(rep.mean_pstar), "se_pstar": fmt(rep.se_pstar),
        "mean_ons": fmt(rep.mean_ons), "se_ons": fmt(rep.se_ons),
        "bias_arm0": fmt(rep.bias[0]), "bias_arm1": fmt(rep.bias[1]),
        "se_bias_arm0": fmt(rep.se_bias[0]), "se_bias_arm1": fmt(rep.se_bias[1]),
        "cov_over_EN_arm0": fmt(rep.cov_over_mean_n[0]),
        "cov_over_EN_arm1": fmt(rep.cov_over_mean_n[1]),
        "undefined_fraction_arm0": fmt(rep.undefined_fraction[0]),
        "undefined_fraction_arm1": fmt(rep.undefined_fraction[1]),
    })
    return row


class RowWriter:
    """Streams rows to an open text file, flushing after every cell."""

    def __init__(self, handle: IO[str]):
        self._writer = csv.DictWriter(handle, fieldnames=COLUMNS, lineterminator="\n")
        self._handle = handle
        self._writer.writeheader()
        handle.flush()

    def write(self, outcome: CellOutcome, master_seed: int) -> None:
        self._writer.writerow(outcome_row(outcome, master_seed))
        self._handle.flush()


def write_rows(path: str | Path, outcomes: Iterable[CellOutcome], master_seed: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = RowWriter(handle)
        for outcome in outcomes:
            writer.write(outcome, master_seed)


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
