"""Autocovariances, symmetric eigendecomposition and eigenvalue trajectories.

Trajectories follow the top eigenvalues of the covariance of the leading
``m`` rows of a (permuted) panel as ``m`` grows.  Averaging them over random
cross-sectional permutations removes the dependence on the arbitrary order
of the series.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, GridError
from .panel import Panel, Permutation


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DYNFACTOR_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """``map`` with optional threads; results keep input order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class CovarianceSet:
    gammas: np.ndarray  # (K+1, n, n), gammas[k] = Gamma_k
    T: int

    @property
    def n(self) -> int:
        return self.gammas.shape[1]

    @property
    def K(self) -> int:
        return self.gammas.shape[0] - 1

    def __getitem__(self, k: int) -> np.ndarray:
        """``Gamma_k`` for ``-K <= k <= K`` (negative lags by transposition)."""
        return self.gammas[k] if k >= 0 else self.gammas[-k].T


def autocovariances(p: Panel | np.ndarray, K: int) -> CovarianceSet:
    """Sample autocovariances ``Gamma_k = T^{-1} sum_t x_t x_{t-k}'`` for ``k = 0..K``.

    The divisor is ``T`` at every lag, which keeps the Bartlett lag-window
    spectral estimate positive semidefinite.
    """
    x = p.demeaned() if isinstance(p, Panel) else np.asarray(p, float) - np.mean(p, axis=1, keepdims=True)
    n, T = x.shape
    if not 0 <= K < T:
        raise DimensionError(f"max lag K={K} must satisfy 0 <= K < T={T}")
    g = np.empty((K + 1, n, n))
    for k in range(K + 1):
        g[k] = x[:, k:] @ x[:, : T - k].T / T
    g[0] = 0.5 * (g[0] + g[0].T)
    return CovarianceSet(g, T)


def covariance(p: Panel | np.ndarray) -> np.ndarray:
    return autocovariances(p, 0).gammas[0]


def eigen_sym(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvectors."""
    G = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(G)):
        raise DimensionError("matrix has non-finite entries")
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(f"need a square matrix, got {G.shape}")
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def top_eigvals(G: np.ndarray, j: int) -> np.ndarray:
    """Largest ``min(j, m)`` eigenvalues of a symmetric (or stack of Hermitian) matrix, descending."""
    w = np.linalg.eigvalsh(G)
    return w[..., ::-1][..., :j]


@dataclass(frozen=True)
class EigenTrajectory:
    """Eigenvalue paths over sub-panel sizes.

    ``values[j-1, s]`` is the (averaged) ``j``-th eigenvalue at ``sizes[s]``,
    NaN where ``j > m``.  ``per_perm`` keeps the individual paths, shaped
    ``(R, j_max, len(sizes))``.
    """

    sizes: np.ndarray
    values: np.ndarray
    normalization: float = 1.0
    n_permutations: int = 1
    per_perm: np.ndarray | None = None
    kind: str = "static"

    @property
    def j_max(self) -> int:
        return self.values.shape[0]

    def normalized(self, divisor: float) -> "EigenTrajectory":
        pp = None if self.per_perm is None else self.per_perm / divisor
        return EigenTrajectory(
            self.sizes, self.values / divisor, self.normalization * divisor, self.n_permutations, pp, self.kind
        )


def default_grid(n: int) -> np.ndarray:
    if n <= 512:
        return np.arange(1, n + 1)
    return np.unique(np.round(np.geomspace(1, n, 64)).astype(int))


def _check_grid(grid, n: int) -> np.ndarray:
    grid = np.asarray(default_grid(n) if grid is None else grid, dtype=int)
    if grid.size == 0:
        raise GridError("empty size grid")
    if np.any(np.diff(grid) <= 0) or grid[0] < 1 or grid[-1] > n:
        raise GridError(f"size grid must be increasing within [1, {n}]")
    return grid


def _trajectory(
    block_eigs: Callable[[np.ndarray, int], np.ndarray],
    n: int,
    perms: Sequence[Permutation],
    j_max: int,
    grid,
    workers: int | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(perms) == 0:
        raise GridError("empty permutation list")
    grid = _check_grid(grid, n)
    for perm in perms:
        if len(perm) != n:
            raise DimensionError(f"permutation of length {len(perm)} for n={n}")

    def one(perm: Permutation) -> np.ndarray:
        out = np.full((j_max, grid.size), np.nan)
        for s, m in enumerate(grid):
            ev = block_eigs(perm.map[:m], j_max)
            out[: ev.size, s] = ev
        return out

    per = np.stack(ordered_map(one, list(perms), workers))
    # fixed-order reduction over permutations
    avg = per[0].copy()
    for k in range(1, per.shape[0]):
        avg += per[k]
    return grid, per, avg / per.shape[0]


def covariance_trajectory(
    G: np.ndarray,
    perms: Sequence[Permutation],
    j_max: int,
    grid=None,
    normalize: bool = False,
    workers: int | None = None,
) -> EigenTrajectory:
    """Trajectory of the top eigenvalues of leading blocks of a fixed covariance matrix.

    Passing a population covariance gives the deterministic curves; passing
    a sample covariance is what :func:`eigenvalue_trajectory` does.
    """
    G = np.asarray(G, float)
    n = G.shape[0]

    def block(idx, j):
        return top_eigvals(G[np.ix_(idx, idx)], j)

    grid, per, avg = _trajectory(block, n, perms, j_max, grid, workers)
    traj = EigenTrajectory(grid, avg, 1.0, len(perms), per, "static")
    if normalize:
        traj = traj.normalized(float(top_eigvals(G, 1)[0]))
    return traj


def eigenvalue_trajectory(
    p: Panel,
    perms: Sequence[Permutation],
    j_max: int,
    grid=None,
    normalize: bool = False,
    workers: int | None = None,
) -> EigenTrajectory:
    """Permutation-averaged top-``j_max`` eigenvalues of leading sub-panel covariances."""
    return covariance_trajectory(covariance(p), perms, j_max, grid, normalize, workers)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_growth_fit(traj: EigenTrajectory, j: int, m_min: int = 10) -> LinearFit:
    """OLS of the ``j``-th averaged eigenvalue on ``m`` over ``m >= max(j, m_min)``."""
    if not 1 <= j <= traj.j_max:
        raise GridError(f"eigenvalue index {j} outside 1..{traj.j_max}")
    sizes = np.asarray(traj.sizes, float)
    y = traj.values[j - 1]
    keep = (sizes >= max(j, m_min)) & np.isfinite(y)
    if keep.sum() < 3:
        raise GridError("need at least three grid points for a linear fit")
    m, y = sizes[keep], y[keep]
    if np.ptp(m) == 0:
        raise GridError("degenerate grid")
    slope, intercept = np.polyfit(m, y, 1)
    resid = y - (slope * m + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), float(r2))


def write_trajectory_csv(traj: EigenTrajectory, path: str | Path, include_perms: bool = False) -> None:
    """Long format ``permutation_id, j, m, value``; ``avg`` rows hold the average."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["permutation_id", "j", "m", "value"])
        blocks = [("avg", traj.values)]
        if include_perms and traj.per_perm is not None:
            blocks += [(str(k), v) for k, v in enumerate(traj.per_perm)]
        for pid, vals in blocks:
            for j in range(vals.shape[0]):
                for s, m in enumerate(traj.sizes):
                    if np.isfinite(vals[j, s]):
                        w.writerow([pid, j + 1, int(m), f"{vals[j, s]:.12g}"])
