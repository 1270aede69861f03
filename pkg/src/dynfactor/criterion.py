"""Penalized eigenvalue criteria tuned by stability over sub-panel sizes.

For each sub-panel size ``m`` and penalty multiplier ``c``::

    IC(m; k, c) = sum_{j > k} lambda_j(m) / trace(m) + k * c * p(m)

where ``lambda_j(m)`` are permutation-averaged eigenvalues (static) or
integrated dynamic eigenvalues, and dividing by the averaged trace makes
the ``c`` grid scale-free.  ``qhat_c(m)`` minimizes over ``0 <= k <= k_max``.
The multiplier is chosen from the intervals of ``c`` where ``qhat_c(m)``
does not move with ``m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridError

MIN_RUN = 3  # stable intervals narrower than this many c-grid points are treated as noise


def static_penalty(m, T: int) -> np.ndarray:
    m = np.asarray(m, float)
    return (m + T) / (m * T) * np.log(np.minimum(m, T))


def dynamic_penalty(m, T: int, M: int) -> np.ndarray:
    m = np.asarray(m, float)
    return (M**-2.0 + np.sqrt(M / T) + 1.0 / m) * np.log(np.minimum(np.minimum(m, M**2), np.sqrt(T / M)))


def default_c_grid() -> np.ndarray:
    return np.linspace(0.01, 3.0, 101)


def default_m_grid(n: int, size: int = 10) -> np.ndarray:
    return np.unique(np.round(np.linspace(n / 2, n, size)).astype(int))


@dataclass(frozen=True)
class ICSurface:
    """Criterion values ``values[m, k, c]``, selections ``selected[c, m]`` and the tuning outcome."""

    m_grid: np.ndarray
    c_grid: np.ndarray
    values: np.ndarray
    selected: np.ndarray
    stability: np.ndarray
    c_star: float
    count: int
    degraded: bool
    k_max: int

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "k", "c", "value", "selected"])
            for a, m in enumerate(self.m_grid):
                for ci, c in enumerate(self.c_grid):
                    for k in range(self.k_max + 1):
                        w.writerow([int(m), k, f"{c:.12g}", f"{self.values[a, k, ci]:.12g}", int(self.selected[ci, a])])

    def summary(self) -> dict:
        return {
            "count": int(self.count),
            "c_star": float(self.c_star),
            "degraded": bool(self.degraded),
            "k_max": int(self.k_max),
            "m_grid": [int(m) for m in self.m_grid],
        }


def zero_runs(stability: np.ndarray, values: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Maximal runs ``[start, stop]`` (inclusive) of grid points with zero stability.

    With ``values`` (the common selection at each grid point) a run also
    breaks where that value changes.
    """
    runs, start = [], None
    for i, s in enumerate(stability):
        same = start is not None and (values is None or values[i] == values[start])
        if s == 0 and start is None:
            start = i
        elif s == 0 and not same:
            runs.append((start, i - 1))
            start = i
        elif s != 0 and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(stability) - 1))
    return runs


def _argmin_k(tails: np.ndarray, k_max: int, c: float, pen: float) -> int:
    ic = tails[: k_max + 1] + np.arange(k_max + 1) * c * pen
    return int(np.argmin(ic))


def tuned_selection(
    top: np.ndarray,
    traces: np.ndarray,
    m_grid,
    penalties: np.ndarray,
    k_max: int,
    c_grid=None,
    min_run: int = MIN_RUN,
) -> ICSurface:
    """Stability-tuned count from averaged top eigenvalues.

    ``top[a, j]`` is the ``(j+1)``-th averaged eigenvalue at ``m_grid[a]``
    (at least ``k_max`` columns) and ``traces[a]`` the averaged trace there.
    """
    m_grid = np.asarray(m_grid, int)
    c_grid = default_c_grid() if c_grid is None else np.asarray(c_grid, float)
    if m_grid.size == 0 or c_grid.size == 0:
        raise GridError("empty m or c grid")
    if k_max > m_grid.min():
        raise GridError(f"k_max={k_max} exceeds the smallest sub-panel size {m_grid.min()}")
    top = np.asarray(top, float)[:, :k_max]
    traces = np.asarray(traces, float)
    if np.any(traces <= 0):
        raise GridError("non-positive trace in criterion")
    cum = np.concatenate([np.zeros((m_grid.size, 1)), np.cumsum(top, axis=1)], axis=1)
    tails = 1.0 - cum / traces[:, None]  # (m, k_max + 1)
    k = np.arange(k_max + 1)
    values = tails[:, :, None] + k[None, :, None] * c_grid[None, None, :] * penalties[:, None, None]
    selected = np.argmin(values, axis=1).T  # (c, m); argmin keeps the smallest k on ties
    stability = selected.std(axis=1)

    runs = [r for r in zero_runs(stability, selected[:, -1]) if r[1] - r[0] + 1 >= min(min_run, c_grid.size)]
    if runs and np.all(selected[runs[0][0]] == k_max):
        first, candidates = runs[0], runs[1:]
    else:
        first, candidates = None, runs
    degraded = not candidates
    if candidates:
        lo, hi = candidates[0]
        c_star = 0.5 * (c_grid[lo] + c_grid[hi])
    else:
        pool = np.ones(c_grid.size, bool)
        if first is not None:
            pool[first[0] : first[1] + 1] = False
        if not pool.any():
            pool[:] = True
        idx = np.flatnonzero(pool)
        c_star = float(c_grid[idx[np.argmin(stability[idx])]])
    count = _argmin_k(tails[-1], k_max, c_star, penalties[-1])
    return ICSurface(m_grid, c_grid, values, selected, stability, float(c_star), count, degraded, k_max)
