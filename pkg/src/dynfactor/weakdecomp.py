"""Three-term split ``X = chi_stat + chi_weak + xi_dyn`` and orthogonality diagnostics.

``chi_weak = chi_dyn - chi_stat`` collects what is dynamically common but
statically idiosyncratic (typically lagged loadings).  It is defined by
subtraction of the two estimates; no re-orthogonalization is applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .gdfm import DynamicDecomposition, gdfm_decompose
from .panel import Panel
from .static_fm import StaticDecomposition, static_decompose

CORR_THRESHOLD = 0.1


@dataclass(frozen=True)
class ThreeTermDecomposition:
    stat_common: np.ndarray
    weak_common: np.ndarray
    dyn_idio: np.ndarray
    valid_range: tuple[int, int]
    r: int
    q: int
    static: StaticDecomposition
    dynamic: DynamicDecomposition

    @property
    def dyn_common(self) -> np.ndarray:
        return self.dynamic.common

    def weak_share(self, data: np.ndarray) -> float:
        """``||chi_weak||_F^2 / ||X||_F^2`` on the valid range (``X`` demeaned)."""
        a, b = self.valid_range
        x = data - data.mean(axis=1, keepdims=True)
        return float(np.sum(self.weak_common**2) / np.sum(x[:, a:b] ** 2))

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("stat_common", "weak_common", "dyn_idio"):
            np.savetxt(out / f"{name}.csv", getattr(self, name), delimiter=",", fmt="%.12g")


def three_term(p: Panel, r: int, q: int, M: int | None = None) -> ThreeTermDecomposition:
    stat = static_decompose(p, r)
    dyn = gdfm_decompose(p, q, M)
    a, b = dyn.valid_range
    chi_s = stat.common[:, a:b]
    return ThreeTermDecomposition(chi_s, dyn.common - chi_s, dyn.idio, (a, b), r, q, stat, dyn)


def _standardize(A: np.ndarray) -> np.ndarray:
    A = A - A.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(A * A, axis=1, keepdims=True))
    # rows with (numerically) no variance carry no correlation
    scale = np.max(sd) if sd.size else 0.0
    ok = sd > 1e-12 * max(scale, 1e-300)
    return np.where(ok, A / np.where(ok, sd, 1.0), 0.0)


def max_cross_correlation(A: np.ndarray, B: np.ndarray, max_lag: int) -> np.ndarray:
    """``out[l + L] = max_{i,j} |corr(A_{i,t}, B_{j,t+l})|`` for ``l = -L..L``."""
    if A.shape[1] != B.shape[1]:
        raise DimensionError("component panels must share the time axis")
    T = A.shape[1]
    a, b = _standardize(A), _standardize(B)
    out = np.empty(2 * max_lag + 1)
    for idx, lag in enumerate(range(-max_lag, max_lag + 1)):
        if lag >= 0:
            C = a[:, : T - lag] @ b[:, lag:].T
        else:
            C = a[:, -lag:] @ b[:, : T + lag].T
        out[idx] = np.max(np.abs(C)) / T if C.size else 0.0
    return out


def orthogonality_report(d: ThreeTermDecomposition, max_lag: int, threshold: float = CORR_THRESHOLD) -> dict:
    """Maximal absolute cross-correlations between component pairs over lags ``-L..L``.

    The common/idiosyncratic pairs of the static and the dynamic split are
    flagged: variant (A), orthogonality at time ``t``, is supported when the
    lag-0 value is at most ``threshold``; variant (B), orthogonality at all
    leads and lags, when every lag is.  Pairs involving the weak component
    are reported without flags.  Static components span the full sample,
    the others the valid range.
    """
    length = d.valid_range[1] - d.valid_range[0]
    if max_lag < 0 or max_lag > length / 4:
        raise DimensionError(f"max_lag={max_lag} must be at most a quarter of the valid range ({length})")
    flagged = {
        "stat_common~stat_idio": (d.static.common, d.static.idio),
        "dyn_common~dyn_idio": (d.dyn_common, d.dyn_idio),
    }
    reported = {
        "weak_common~stat_common": (d.weak_common, d.stat_common),
        "weak_common~dyn_idio": (d.weak_common, d.dyn_idio),
    }
    report = {"max_lag": max_lag, "threshold": threshold, "pairs": {}, "diagnostics": {}}
    lags = list(range(-max_lag, max_lag + 1))
    for name, (A, B) in flagged.items():
        cc = max_cross_correlation(A, B, max_lag)
        report["pairs"][name] = {
            "lags": lags,
            "max_abs_corr": [float(v) for v in cc],
            "lag0": float(cc[max_lag]),
            "variant_A": bool(cc[max_lag] <= threshold),
            "variant_B": bool(np.all(cc <= threshold)),
        }
    for name, (A, B) in reported.items():
        cc = max_cross_correlation(A, B, max_lag)
        report["diagnostics"][name] = {"lags": lags, "max_abs_corr": [float(v) for v in cc], "lag0": float(cc[max_lag])}
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")
