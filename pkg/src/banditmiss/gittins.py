"""Gittins indices for Beta-Bernoulli arms under geometric discounting.

The index of state (s, f) is the retirement rate lam at which the optimal
stopping problem "keep playing the Beta(s, f) arm vs. retire for the lump sum
lam/(1-d)" is indifferent at the root. Values are computed on a backward
induction truncated at `horizon` pulls, with terminal value
max(lam, mu)/(1-d); the truncation error at the root is then at most

    d**horizon * (1 - max(lam, mu_terminal)) / (1 - d)  <=  d**horizon / (1 - d)

which must be below the bisection tolerance (1.9e-7 for the defaults
d=0.99, horizon=2000, vs tol=1e-5).

Single states go through :func:`gittins_index` (plain bisection). Full tables
are built by an ascending sweep over a lam grid of spacing 2*tol: one pass of
the truncated induction at a fixed lam classifies every state as
continue/retire at once, and a state's index is pinned to half a grid step
when it first flips to retire. Cells strictly inside the retire region carry
the known value lam/(1-d) and are skipped, which keeps the full build to
max_state 530 in the minutes range.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange

DEFAULT_DISCOUNT = 0.99
DEFAULT_TOL = 1e-5
DEFAULT_HORIZON = 2000
DEFAULT_MAX_STATE = 530  # covers trial size 526 plus the uniform prior mass

CACHE_ENV_VAR = "BANDITMISS_CACHE_DIR"


class TableMissError(LookupError):
    """A Gittins lookup fell outside the precomputed state bound."""


def truncation_bound(discount: float, horizon: int) -> float:
    """Worst-case root error of the horizon-truncated stopping problem."""
    return discount**horizon / (1.0 - discount)


def retirement_value(s: int, f: int, lam: float, discount: float,
                     horizon: int = DEFAULT_HORIZON) -> float:
    """Root value of continue-vs-retire for a Beta(s, f) arm.

    Backward induction over the triangle of states reachable within `horizon`
    pulls; see the module docstring for the truncation bound.
    """
    if s < 1 or f < 1:
        raise ValueError("state counts must satisfy s >= 1, f >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("retirement rate must lie in [0, 1]")
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rho = lam / (1.0 - discount)
    m_end = s + f + horizon
    successes = s + np.arange(horizon + 1)
    v = np.maximum(rho, (successes / m_end) / (1.0 - discount))
    for depth in range(horizon - 1, -1, -1):
        mu = (s + np.arange(depth + 1)) / (s + f + depth)
        cont = mu + discount * (mu * v[1:depth + 2] + (1.0 - mu) * v[:depth + 1])
        v = np.maximum(rho, cont)
    return float(v[0])


def gittins_index(s: int, f: int, discount: float = DEFAULT_DISCOUNT,
                  tol: float = DEFAULT_TOL, horizon: int = DEFAULT_HORIZON) -> float:
    """Indifference retirement rate for state (s, f), by bisection on [mu, 1].

    Deterministic for fixed arguments; terminates in at most
    ceil(log2(1/tol)) iterations.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if truncation_bound(discount, horizon) > tol:
        raise ValueError(
            f"horizon {horizon} leaves truncation error "
            f"{truncation_bound(discount, horizon):.3g} above tol {tol:.3g}")
    lo = s / (s + f)
    hi = 1.0
    while hi - lo > tol:
        lam = 0.5 * (lo + hi)
        if retirement_value(s, f, lam, discount, horizon) > lam / (1.0 - discount):
            lo = lam
        else:
            hi = lam
    return 0.5 * (lo + hi)


@njit(cache=True, parallel=True)
def _grid_sweep(discount, m_table, m_end, n_lambda, chunk_bounds, g_chunks):
    """Ascending-lam classification sweeps, parallel over disjoint lam ranges.

    g_chunks[c, s, f] receives lam - delta/2 when chunk c first sees state
    (s, f) flip from continue to retire; a chunk's first sweep re-reports
    flips that happened in earlier chunks, so callers must min-reduce over
    chunks. Per-diagonal thresholds exploit that the continue region is an
    up-set in s on every diagonal and only shrinks as lam grows.
    """
    n_chunks = chunk_bounds.shape[0] - 1
    delta = 1.0 / n_lambda
    for c in prange(n_chunks):
        thr = np.ones(m_end + 2, np.int64)
        v_a = np.zeros(m_end + 2)
        v_b = np.zeros(m_end + 2)
        for j in range(chunk_bounds[c], chunk_bounds[c + 1]):
            lam = j * delta
            rho = lam / (1.0 - discount)
            # terminal diagonal: value max(lam, mu)/(1-d), continue iff mu > lam
            t_term = int(np.floor(lam * m_end)) + 1
            if t_term < 1:
                t_term = 1
            v_next = v_a
            v_cur = v_b
            for s in range(t_term, m_end):
                v_next[s] = (s / m_end) / (1.0 - discount)
            thr[m_end] = t_term
            for m in range(m_end - 1, 1, -1):
                inv_m = 1.0 / m
                t_next = thr[m + 1]
                start = thr[m]
                t_new = m
                seen = False
                for s in range(start, m):
                    mu = s * inv_m
                    vs = v_next[s + 1] if s + 1 >= t_next else rho
                    vf = v_next[s] if s >= t_next else rho
                    q = mu + discount * (mu * vs + (1.0 - mu) * vf)
                    if q > rho:
                        if not seen:
                            t_new = s
                            seen = True
                        v_cur[s] = q
                    elif seen:
                        v_cur[s] = rho  # knife-edge cell; value equals rho
                    elif m <= m_table:
                        g_chunks[c, s, m - s] = lam - 0.5 * delta
                thr[m] = t_new
                tmp = v_next
                v_next = v_cur
                v_cur = tmp
    return g_chunks


def _chunk_bounds(n_lambda: int, n_chunks: int) -> np.ndarray:
    """Split sweeps 1..n_lambda into ranges of roughly equal work.

    Sweep cost scales with the continue-region size, about (1 - lam), so
    boundaries are placed at quantiles of the cumulative (1 - lam) weight.
    """
    lams = np.arange(1, n_lambda + 1) / n_lambda
    weight = np.cumsum(1.0 - lams + 1e-9)
    targets = np.linspace(0.0, weight[-1], n_chunks + 1)
    bounds = np.searchsorted(weight, targets[1:-1]) + 1
    return np.concatenate(([1], bounds, [n_lambda + 1])).astype(np.int64)


@dataclass(frozen=True)
class GittinsTable:
    """Dense Gittins values G[s, f] for 1 <= s, f and s + f <= max_state + 2."""

    discount: float
    max_state: int
    tol: float
    horizon: int
    values: np.ndarray  # shape (max_state + 2, max_state + 2); NaN outside the triangle

    def lookup(self, s: float, f: float) -> float:
        si, fi = round(s), round(f)
        if abs(s - si) > 1e-9 or abs(f - fi) > 1e-9:
            raise TableMissError(f"table is defined on integer states, got ({s}, {f})")
        if si < 1 or fi < 1 or si + fi > self.max_state + 2:
            raise TableMissError(
                f"state ({si}, {fi}) outside table bound s + f <= {self.max_state + 2}")
        return float(self.values[si, fi])

    def covers_trial(self, trial_size: int, prior_mass: float) -> bool:
        return trial_size + prior_mass <= self.max_state


def _compute_table(discount: float, max_state: int, tol: float, horizon: int,
                   n_chunks: int | None = None) -> np.ndarray:
    m_table = max_state + 2
    m_end = m_table + horizon
    n_lambda = int(np.ceil(1.0 / (2.0 * tol)))
    if n_chunks is None:
        try:
            import numba
            n_chunks = max(1, min(16, numba.get_num_threads() * 2))
        except Exception:  # pragma: no cover - defensive
            n_chunks = 4
    bounds = _chunk_bounds(n_lambda, n_chunks)
    g_chunks = np.full((len(bounds) - 1, m_table, m_table), 2.0)
    _grid_sweep(discount, m_table, m_end, n_lambda, bounds, g_chunks)
    g = g_chunks.min(axis=0)
    # mask everything outside the state triangle
    s_idx, f_idx = np.meshgrid(np.arange(m_table), np.arange(m_table), indexing="ij")
    inside = (s_idx >= 1) & (f_idx >= 1) & (s_idx + f_idx <= m_table)
    g[~inside] = np.nan
    if np.any(g[inside] > 1.5):
        raise RuntimeError("internal error: some states never flipped to retire")
    _validate(g, inside, s_idx, f_idx, tol)
    return g


def _validate(g: np.ndarray, inside: np.ndarray, s_idx: np.ndarray,
              f_idx: np.ndarray, tol: float) -> None:
    """Cheap sanity checks: optimism and monotonicity up to grid resolution."""
    mu = np.where(inside, s_idx / np.maximum(1, s_idx + f_idx), 0.0)
    if np.any(g[inside] < mu[inside] - 2.0 * tol):
        raise RuntimeError("internal error: index fell below the myopic mean")
    diff_s = g[2:, 1:] - g[1:-1, 1:]
    if np.nanmin(diff_s, initial=0.0) < -4.0 * tol:
        raise RuntimeError("internal error: index not non-decreasing in s")
    diff_f = g[1:, 2:] - g[1:, 1:-1]
    if np.nanmax(diff_f, initial=0.0) > 4.0 * tol:
        raise RuntimeError("internal error: index not non-increasing in f")


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    xdg = os.environ.get("XDG_CACHE_HOME")
    base = Path(xdg) if xdg else Path.home() / ".cache"
    return base / "banditmiss"


def cache_path(discount: float, max_state: int, tol: float, horizon: int,
               directory: Path | None = None) -> Path:
    name = f"gittins_d{discount:g}_s{max_state}_tol{tol:g}_h{horizon}.csv"
    return (directory or cache_dir()) / name


def save_table(table: GittinsTable, path: Path) -> None:
    """Write the table as (s, f, gittins) CSV triples; the loadable cache format."""
    path.parent.mkdir(parents=True, exist_ok=True)
    m_table = table.max_state + 2
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("s,f,gittins\n")
        for s in range(1, m_table):
            row = table.values[s]
            for f in range(1, m_table - s + 1):
                fh.write(f"{s},{f},{row[f]:.8f}\n")


def load_table(path: Path, discount: float, max_state: int, tol: float,
               horizon: int) -> GittinsTable:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    m_table = max_state + 2
    values = np.full((m_table, m_table), np.nan)
    s = data[:, 0].astype(np.int64)
    f = data[:, 1].astype(np.int64)
    values[s, f] = data[:, 2]
    return GittinsTable(discount=discount, max_state=max_state, tol=tol,
                        horizon=horizon, values=values)


def build_table(discount: float = DEFAULT_DISCOUNT, max_state: int = DEFAULT_MAX_STATE,
                tol: float = DEFAULT_TOL, horizon: int = DEFAULT_HORIZON,
                directory: Path | None = None, force: bool = False) -> GittinsTable:
    """Build (or reload from cache) the full Gittins table.

    The cache file is keyed by (discount, max_state, tol, horizon) in its name
    and can always be regenerated from scratch with ``force=True``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_state < 1:
        raise ValueError("max_state must be >= 1")
    if truncation_bound(discount, horizon) > tol:
        raise ValueError(
            f"horizon {horizon} leaves truncation error "
            f"{truncation_bound(discount, horizon):.3g} above tol {tol:.3g}")
    path = cache_path(discount, max_state, tol, horizon, directory)
    if path.exists() and not force:
        return load_table(path, discount, max_state, tol, horizon)
    values = _compute_table(discount, max_state, tol, horizon)
    table = GittinsTable(discount=discount, max_state=max_state, tol=tol,
                         horizon=horizon, values=values)
    save_table(table, path)
    return table


_TABLE_MEMO: dict[tuple, GittinsTable] = {}


def shared_table(discount: float = DEFAULT_DISCOUNT, max_state: int = DEFAULT_MAX_STATE,
                 tol: float = DEFAULT_TOL, horizon: int = DEFAULT_HORIZON) -> GittinsTable:
    """Process-wide memoized table (workers hit the disk cache once each)."""
    key = (discount, max_state, tol, horizon)
    if key not in _TABLE_MEMO:
        _TABLE_MEMO[key] = build_table(discount, max_state, tol, horizon)
    return _TABLE_MEMO[key]


def main_benchmark() -> None:  # pragma: no cover - manual tool
    start = time.perf_counter()
    table = build_table(force=True)
    elapsed = time.perf_counter() - start
    print(f"built max_state={table.max_state} in {elapsed:.1f}s; "
          f"G(1,1)={table.lookup(1, 1):.5f}")


if __name__ == "__main__":  # pragma: no cover
    main_benchmark()
