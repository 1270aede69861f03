"""Dynamic principal components: the two-sided GDFM common component.

At each grid frequency the top-``q`` eigenvectors of the estimated spectral
density give a projector ``P_q(theta)``; its inverse DFT over the grid is a
two-sided filter ``K_k``, ``k = -M..M``, and ``chi_t = sum_k K_k x_{t-k}``.
The filter needs ``M`` observations on each side, so components live on
the valid range ``[M, T - M)`` (0-based).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .criterion import ICSurface, default_c_grid, default_m_grid, dynamic_penalty, tuned_selection
from .errors import DimensionError
from .panel import Panel, Permutation, canonical_order
from .spectra import (
    SpectralDensity,
    default_bandwidth,
    dynamic_eigen_trajectory,
    dynamic_eigens,
    estimate_spectrum,
    integration_weights,
)
from .static_fm import _perms_or_default


@dataclass(frozen=True)
class DynamicDecomposition:
    q: int
    M: int
    common: np.ndarray  # n x (T - 2M), on valid_range
    idio: np.ndarray
    valid_range: tuple[int, int]  # [start, stop) in 0-based time indices
    filters: np.ndarray  # (2M+1, n, n); filters[k + M] = K_k
    filter_imag_ratio: float  # max |Im K| / max |Re K| before discarding

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / "dynamic_common.csv", self.common, delimiter=",", fmt="%.12g")
        np.savetxt(out / "dynamic_idio.csv", self.idio, delimiter=",", fmt="%.12g")
        with open(out / "filters.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "k", "coefficient"])
            n = self.filters.shape[1]
            for kk in range(self.filters.shape[0]):
                for i in range(n):
                    for j in range(n):
                        w.writerow([i, j, kk - self.M, f"{self.filters[kk, i, j]:.12g}"])


def projectors(S: SpectralDensity, q: int) -> np.ndarray:
    """Rank-``q`` spectral projectors on the full frequency grid."""
    if q == S.n:
        return np.broadcast_to(np.eye(S.n, dtype=complex), S.matrices.shape).copy()
    system = dynamic_eigens(S, q, vectors=True)
    V = system.eigenvectors
    return V @ np.conj(np.swapaxes(V, 1, 2))


def filters_from_projectors(P: np.ndarray, M: int) -> tuple[np.ndarray, float]:
    """``K_k = (2M+1)^{-1} sum_h P(theta_h) exp(i k theta_h)`` and its imaginary-part ratio."""
    theta = 2 * np.pi * np.arange(-M, M + 1) / (2 * M + 1)
    k = np.arange(-M, M + 1)
    E = np.exp(1j * np.outer(k, theta)) / (2 * M + 1)
    K = np.einsum("kh,hij->kij", E, P)
    re = np.max(np.abs(K.real))
    ratio = float(np.max(np.abs(K.imag)) / re) if re > 0 else 0.0
    return K.real.copy(), ratio


def apply_filters(K: np.ndarray, x: np.ndarray, M: int) -> np.ndarray:
    """``chi_t = sum_{k=-M}^{M} K_k x_{t-k}`` for ``t`` in ``[M, T - M)``."""
    n, T = x.shape
    out = np.zeros((n, T - 2 * M))
    for idx, k in enumerate(range(-M, M + 1)):
        out += K[idx] @ x[:, M - k : T - M - k]
    return out


def gdfm_decompose(p: Panel, q: int, M: int | None = None) -> DynamicDecomposition:
    """Two-sided dynamic principal component decomposition with ``q`` dynamic factors."""
    n, T = p.n, p.T
    M = default_bandwidth(T) if M is None else int(M)
    if not 1 <= q <= n:
        raise DimensionError(f"q={q} outside 1..{n}")
    if T <= 2 * M + 1:
        raise DimensionError(f"T={T} too short for bandwidth M={M}")
    S = estimate_spectrum(p, M)
    K, ratio = filters_from_projectors(projectors(S, q), M)
    x = p.demeaned()
    common = apply_filters(K, x, M)
    idio = p.data[:, M : T - M] - common
    return DynamicDecomposition(q, M, common, idio, (M, T - M), K, ratio)


def select_q_hl(
    p: Panel,
    perms: Sequence[Permutation] | None = None,
    q_max: int = 8,
    c_grid=None,
    m_grid=None,
    M: int | None = None,
    R: int = 20,
    seed: int = 0,
    workers: int | None = None,
) -> tuple[int, ICSurface]:
    """Stability-tuned selection of ``q`` from permutation-averaged integrated eigenvalues.

    As in :func:`dynfactor.static_fm.select_r_tuned`, rows are put in a
    canonical content-based order before the permutations are applied.
    """
    M = default_bandwidth(p.T) if M is None else int(M)
    order = canonical_order(p.data)
    S = estimate_spectrum(p, M).block(order)
    m_grid = default_m_grid(p.n) if m_grid is None else np.asarray(m_grid, int)
    c_grid = default_c_grid() if c_grid is None else np.asarray(c_grid, float)
    perms = _perms_or_default(p.n, perms, R, seed)
    traj = dynamic_eigen_trajectory(S, perms, q_max, m_grid, workers=workers)
    # integrated trace of a sub-panel: sum of its diagonal spectra
    diag = integration_weights(M) @ np.real(np.diagonal(S.nonnegative(), axis1=1, axis2=2))
    traces = np.array([np.mean([diag[perm.map[:m]].sum() for perm in perms]) for m in m_grid])
    pen = dynamic_penalty(m_grid, p.T, M)
    surf = tuned_selection(traj.values.T, traces, m_grid, pen, q_max, c_grid)
    return surf.count, surf
