"""Static approximate factor decomposition and selection of the number of factors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .criterion import ICSurface, default_c_grid, default_m_grid, static_penalty, tuned_selection
from .errors import DimensionError, RankError
from .moments import covariance, covariance_trajectory, eigen_sym
from .panel import Panel, Permutation, canonical_order, random_permutations
from .sim import PERM_STREAM


@dataclass(frozen=True)
class StaticDecomposition:
    r: int
    factors: np.ndarray  # r x T
    loadings: np.ndarray  # n x r
    common: np.ndarray  # n x T
    idio: np.ndarray  # n x T
    eigenvalues: np.ndarray  # all eigenvalues of the sample covariance, descending

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("common", "idio", "factors", "loadings"):
            np.savetxt(out / f"static_{name}.csv", getattr(self, name), delimiter=",", fmt="%.12g")


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def static_decompose(p: Panel, r: int) -> StaticDecomposition:
    """Project the panel on the top-``r`` principal components of its sample covariance.

    ``f_t = L_r^{-1/2} V_r' x_t``, ``B = V_r L_r^{1/2}``, ``chi = V_r V_r' x_t`` on the
    demeaned data, and ``xi = X - chi`` (so row means end up in ``xi``).
    """
    n, T = p.n, p.T
    if not 1 <= r <= min(n, T - 1):
        raise DimensionError(f"r={r} outside 1..min(n, T-1) = {min(n, T - 1)}")
    x = p.demeaned()
    lam, V = eigen_sym(covariance(p))
    if lam[r - 1] <= 1e-12 * lam[0]:
        raise RankError(f"r={r} exceeds the numerical rank of the sample covariance")
    Vr = fix_signs(V[:, :r])
    lr = lam[:r]
    scores = Vr.T @ x
    common = Vr @ scores
    return StaticDecomposition(
        r,
        scores / np.sqrt(lr)[:, None],
        Vr * np.sqrt(lr)[None, :],
        common,
        p.data - common,
        lam,
    )


def select_r_ratio(eigs: Sequence[float], r_max: int) -> int:
    """``argmax_{1 <= j <= r_max} lambda_j / lambda_{j+1}``; ties go to the smallest ``j``."""
    lam = np.asarray(eigs, float)
    if not 1 <= r_max <= lam.size - 1:
        raise DimensionError(f"r_max={r_max} must lie in 1..{lam.size - 1}")
    num, den = lam[:r_max], lam[1 : r_max + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return int(np.argmax(ratio)) + 1


def ic_values(eigs: np.ndarray, n: int, T: int, r_max: int) -> np.ndarray:
    """``log V(k) + k g(n, T)`` for ``k = 0..r_max`` with ``V(k)`` the mean residual variance."""
    lam = np.clip(np.asarray(eigs, float), 0.0, None)
    tail = lam.sum() - np.concatenate([[0.0], np.cumsum(lam[:r_max])])
    V = np.maximum(tail / n, np.finfo(float).tiny)
    g = (n + T) / (n * T) * np.log(min(n, T))
    return np.log(V) + np.arange(r_max + 1) * g


def select_r_ic(p: Panel, r_max: int) -> int:
    """Information criterion over ``k = 0..r_max`` (zero factors admitted)."""
    if not 0 <= r_max <= min(p.n, p.T) / 2:
        raise DimensionError(f"r_max={r_max} must be at most min(n, T)/2")
    lam = eigen_sym(covariance(p))[0]
    return int(np.argmin(ic_values(lam, p.n, p.T, r_max)))


def _perms_or_default(n: int, perms, R: int, seed: int) -> list[Permutation]:
    if perms is not None:
        return list(perms)
    ss = np.random.SeedSequence([int(seed), PERM_STREAM])
    return random_permutations(n, R, int(ss.generate_state(1)[0]))


def select_r_tuned(
    p: Panel,
    perms: Sequence[Permutation] | None = None,
    r_max: int = 8,
    c_grid=None,
    m_grid=None,
    R: int = 20,
    seed: int = 0,
    workers: int | None = None,
) -> tuple[int, ICSurface]:
    """Stability-tuned static criterion on permutation-averaged covariance eigenvalues.

    Rows are first put in a content-based canonical order, so the result does
    not depend on how the input rows were labeled.  ``perms`` (default: ``R``
    draws from ``seed``) act on that canonical order.
    """
    order = canonical_order(p.data)
    G = covariance(p)[np.ix_(order, order)]
    m_grid = default_m_grid(p.n) if m_grid is None else np.asarray(m_grid, int)
    c_grid = default_c_grid() if c_grid is None else np.asarray(c_grid, float)
    perms = _perms_or_default(p.n, perms, R, seed)
    traj = covariance_trajectory(G, perms, r_max, m_grid, workers=workers)
    d = np.diag(G)
    traces = np.array([np.mean([d[perm.map[:m]].sum() for perm in perms]) for m in m_grid])
    pen = static_penalty(m_grid, p.T)
    surf = tuned_selection(traj.values.T, traces, m_grid, pen, r_max, c_grid)
    return surf.count, surf
