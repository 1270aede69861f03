"""Lag-window spectral density estimation and dynamic eigenvalues.

The spectral density follows the convention without a ``1/(2 pi)`` factor::

    Sigma(theta) = sum_k w(k/M) Gamma_k exp(-i k theta)

on the grid ``theta_h = 2 pi h / (2M + 1)``, ``h = -M..M``, with Bartlett
weights ``w(u) = 1 - |u|``.  Because the grid has ``2M + 1`` points and only
lags ``|k| < M`` carry weight, averaging over the grid inverts the transform
exactly at every lag.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, HermitianError
from .moments import (
    CovarianceSet,
    EigenTrajectory,
    _trajectory,
    autocovariances,
)
from .panel import Panel, Permutation

SPECTRUM_MAGIC = b"DYNSPEC1"


def default_bandwidth(T: int) -> int:
    return max(1, int(np.floor(0.75 * np.sqrt(T))))


def frequency_grid(M: int) -> np.ndarray:
    h = np.arange(-M, M + 1)
    return 2 * np.pi * h / (2 * M + 1)


def bartlett_weights(M: int) -> np.ndarray:
    """Weights ``w(k/M)`` for ``k = 0..M``."""
    return 1.0 - np.arange(M + 1) / M


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral matrices on the full grid; ``matrices[h + M]`` is ``Sigma(theta_h)``."""

    frequencies: np.ndarray
    matrices: np.ndarray
    bandwidth: int
    kernel: str = "bartlett"

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def M(self) -> int:
        return self.bandwidth

    def nonnegative(self) -> np.ndarray:
        """Matrices for ``h = 0..M``; the rest are their complex conjugates."""
        return self.matrices[self.M :]

    def block(self, idx) -> "SpectralDensity":
        idx = np.asarray(idx)
        return SpectralDensity(self.frequencies, self.matrices[:, idx[:, None], idx[None, :]], self.M, self.kernel)


def spectrum_from_autocovariances(cov: CovarianceSet, M: int) -> SpectralDensity:
    if M < 1 or M > cov.K:
        raise DimensionError(f"bandwidth M={M} needs autocovariances up to lag {M}")
    w = bartlett_weights(M)
    theta = frequency_grid(M)
    k = np.arange(1, M)
    phase = np.exp(-1j * np.outer(theta[M:], k))  # (M+1, M-1), nonnegative frequencies
    G = cov.gammas[1:M] * w[1:M, None, None]
    half = np.einsum("hk,kij->hij", phase, G)
    S = cov.gammas[0][None].astype(complex) + half + np.conj(np.swapaxes(half, 1, 2))
    # enforce exact Hermitian symmetry and conj(Sigma(theta)) = Sigma(-theta)
    S = 0.5 * (S + np.conj(np.swapaxes(S, 1, 2)))
    S[0] = S[0].real
    full = np.concatenate([np.conj(S[:0:-1]), S], axis=0)
    return SpectralDensity(theta, full, M)


def estimate_spectrum(p: Panel | np.ndarray, M: int | None = None) -> SpectralDensity:
    """Bartlett lag-window estimate of the spectral density matrix."""
    x = p.data if isinstance(p, Panel) else np.asarray(p, float)
    T = x.shape[1]
    M = default_bandwidth(T) if M is None else int(M)
    if not 1 <= M < T / 4:
        raise DimensionError(f"bandwidth M={M} must satisfy 1 <= M < T/4 = {T / 4}")
    return spectrum_from_autocovariances(autocovariances(p, M), M)


@dataclass(frozen=True)
class DynamicEigenSystem:
    """Per-frequency eigenvalues ``(2M+1, j_max)`` and eigenvectors ``(2M+1, n, j_max)``."""

    frequencies: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    integrated: np.ndarray

    @property
    def j_max(self) -> int:
        return self.eigenvalues.shape[1]


def _herm_check(S: np.ndarray, tol: float = 1e-10) -> None:
    dev = np.max(np.abs(S - np.conj(np.swapaxes(S, -1, -2))))
    scale = max(np.max(np.abs(S)), 1e-300)
    if dev > tol * scale:
        raise HermitianError(f"spectral matrices not Hermitian (max deviation {dev:.3g})")


def _clip(w: np.ndarray, traces: np.ndarray) -> np.ndarray:
    tiny = (w < 0) & (w >= -1e-8 * np.abs(traces)[:, None])
    return np.where(tiny, 0.0, w)


def integration_weights(M: int) -> np.ndarray:
    """Riemann weights for ``h = 0..M`` folding in the conjugate half of the grid."""
    wts = np.full(M + 1, 2.0)
    wts[0] = 1.0
    return wts * (2 * np.pi / (2 * M + 1))


def dynamic_eigens(S: SpectralDensity, j_max: int, vectors: bool = True) -> DynamicEigenSystem:
    """Hermitian eigendecomposition at every grid frequency plus integrated eigenvalues."""
    n, M = S.n, S.M
    if not 1 <= j_max <= n:
        raise DimensionError(f"j_max={j_max} outside 1..{n}")
    half = S.nonnegative()
    _herm_check(half)
    traces = np.trace(half, axis1=1, axis2=2).real
    if vectors:
        w, V = np.linalg.eigh(half)
        w, V = w[:, ::-1][:, :j_max], V[:, :, ::-1][:, :, :j_max]
        V_full = np.concatenate([np.conj(V[:0:-1]), V], axis=0)
    else:
        w = np.linalg.eigvalsh(half)[:, ::-1][:, :j_max]
        V_full = None
    w = _clip(w, traces)
    integrated = integration_weights(M) @ w
    w_full = np.concatenate([w[:0:-1], w], axis=0)
    return DynamicEigenSystem(S.frequencies, w_full, V_full, integrated)


def integrated_top_eigvals(half: np.ndarray, M: int, j: int) -> np.ndarray:
    """Integrated top-``j`` eigenvalues from the nonnegative-frequency half of a spectrum."""
    w = np.linalg.eigvalsh(half)[:, ::-1][:, :j]
    traces = np.trace(half, axis1=1, axis2=2).real
    return integration_weights(M) @ _clip(w, traces)


def dynamic_eigen_trajectory(
    p: Panel | SpectralDensity,
    perms: Sequence[Permutation],
    j_max: int,
    grid=None,
    M: int | None = None,
    normalize: bool = False,
    workers: int | None = None,
) -> EigenTrajectory:
    """Permutation-averaged integrated dynamic eigenvalues of leading sub-panel spectra.

    Sub-panel spectra are leading blocks of the full-panel estimate, which is
    what estimating them from the sub-panel's own autocovariances gives.
    """
    S = p if isinstance(p, SpectralDensity) else estimate_spectrum(p, M)
    half = S.nonnegative()

    def block(idx, j):
        return integrated_top_eigvals(half[:, idx[:, None], idx[None, :]], S.M, j)

    grid, per, avg = _trajectory(block, S.n, perms, j_max, grid, workers)
    traj = EigenTrajectory(grid, avg, 1.0, len(perms), per, "dynamic")
    if normalize:
        traj = traj.normalized(float(integrated_top_eigvals(half, S.M, 1)[0]))
    return traj


def eigengap_fraction(system: DynamicEigenSystem, j: int, threshold: float) -> float:
    """Share of grid frequencies where ``lambda_j(theta) - lambda_{j+1}(theta)`` exceeds ``threshold``."""
    if not 1 <= j < system.j_max:
        raise DimensionError(f"need 1 <= j < {system.j_max}")
    gap = system.eigenvalues[:, j - 1] - system.eigenvalues[:, j]
    return float(np.mean(gap > threshold))


def write_eigen_csv(system: DynamicEigenSystem, path: str | Path) -> None:
    M = (system.frequencies.size - 1) // 2
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "theta", "j", "value"])
        for row, theta in enumerate(system.frequencies):
            for j in range(system.j_max):
                w.writerow([row - M, f"{theta:.12g}", j + 1, f"{system.eigenvalues[row, j]:.12g}"])


def write_spectrum_binary(S: SpectralDensity, path: str | Path) -> None:
    """16-byte header (8-byte magic, uint32 n, uint32 M) then complex128 row-major data."""
    with open(path, "wb") as fh:
        fh.write(SPECTRUM_MAGIC + struct.pack("<II", S.n, S.M))
        fh.write(np.ascontiguousarray(S.matrices, dtype="<c16").tobytes())


def read_spectrum_binary(path: str | Path) -> SpectralDensity:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != SPECTRUM_MAGIC:
            raise DimensionError("not a spectral density file")
        n, M = struct.unpack("<II", head[8:])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != (2 * M + 1) * n * n:
        raise DimensionError("truncated spectral density file")
    return SpectralDensity(frequency_grid(M), data.reshape(2 * M + 1, n, n).astype(complex), M)
