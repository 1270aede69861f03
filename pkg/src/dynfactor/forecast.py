"""Common-plus-idiosyncratic h-step forecasts and rolling evaluation.

Both parts are direct projections: the common part of series ``i`` is
regressed on current and lagged principal-component factors of the
common panel, the idiosyncratic part on its own current and lagged
values.  The forecast of ``X_{i,t+h}`` is the sum of the two.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .gdfm import gdfm_decompose
from .moments import eigen_sym
from .panel import Panel
from .sim import SimOutput
from .spectra import default_bandwidth
from .static_fm import select_r_ratio, static_decompose

MODES = ("stat", "dyn", "oracle_stat", "oracle_dyn")
COND_LIMIT = 1e12
RANK_TOL = 1e-10


@dataclass
class Regression:
    coef: np.ndarray
    se: np.ndarray
    ridge: bool


@dataclass
class ModeForecast:
    common: np.ndarray
    idio: np.ndarray
    common_fit: Regression | None = None
    idio_fit: Regression | None = None
    flags: list = field(default_factory=list)

    @property
    def total(self) -> np.ndarray:
        return self.common + self.idio


@dataclass
class ForecastSet:
    """Forecasts of ``X_{i, t+h}`` made at ``origins`` for one or more modes."""

    h: int
    i: int
    origins: np.ndarray
    realized: np.ndarray
    modes: dict

    def sq_errors(self, mode: str) -> np.ndarray:
        return (self.realized - self.modes[mode].total) ** 2

    def mse(self, mode: str) -> float:
        return float(np.mean(self.sq_errors(mode)))

    def merged(self, other: "ForecastSet") -> "ForecastSet":
        if not np.array_equal(self.origins, other.origins) or self.h != other.h or self.i != other.i:
            raise DimensionError("forecast sets do not share origins")
        return ForecastSet(self.h, self.i, self.origins, self.realized, {**self.modes, **other.modes})

    def summary(self) -> dict:
        mse = {m: self.mse(m) for m in self.modes}
        out = {"h": self.h, "i": self.i, "n_origins": int(self.origins.size), "mse": mse}
        names = list(self.modes)
        out["ratios"] = {f"{a}/{b}": mse[a] / mse[b] for a in names for b in names if a != b and mse[b] > 0}
        out["flags"] = {m: f.flags for m, f in self.modes.items()}
        return out

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "forecasts.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["origin", "horizon", "mode", "prediction", "realized", "sq_error"])
            for mode, f in self.modes.items():
                err = self.sq_errors(mode)
                for k, t in enumerate(self.origins):
                    w.writerow([int(t), self.h, mode, f"{f.total[k]:.12g}", f"{self.realized[k]:.12g}", f"{err[k]:.12g}"])
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2) + "\n")


def ols(Z: np.ndarray, y: np.ndarray) -> Regression:
    """OLS with a ridge fallback when the regressors are nearly collinear.

    Conditioning and the penalty (``1e-6`` times the trace) refer to the Gram
    matrix of unit-norm columns, so both are unaffected by rescaling any
    regressor, and the fit stays scale-equivariant with an intercept present.
    """
    norms = np.linalg.norm(Z, axis=0)
    norms[norms == 0] = 1.0
    Zs = Z / norms
    ZZ = Zs.T @ Zs
    c = np.linalg.cond(ZZ)
    ridge = not np.isfinite(c) or c > COND_LIMIT
    A = ZZ + 1e-6 * np.trace(ZZ) * np.eye(ZZ.shape[0]) if ridge else ZZ
    coef_s = np.linalg.solve(A, Zs.T @ y)
    resid = y - Zs @ coef_s
    s2 = resid @ resid / max(y.size - Z.shape[1], 1)
    se_s = np.sqrt(np.clip(np.diag(s2 * np.linalg.pinv(A)), 0, None))
    return Regression(coef_s / norms, se_s / norms, ridge)


def lag_matrix(S: np.ndarray, p_lags: int, times: np.ndarray) -> np.ndarray:
    """Rows ``[1, S_t, S_{t-1}, ..., S_{t-p+1}]`` (``S`` is ``k x T``) for each ``t`` in ``times``."""
    cols = [np.ones(times.size)]
    for lag in range(p_lags):
        cols.extend(S[:, times - lag])
    return np.column_stack(cols)


def common_factors(common: np.ndarray, train: int, n_factors: int | None = None, r_max: int = 10) -> np.ndarray:
    """Principal-component factors of a common panel, loadings from the first ``train`` columns.

    Without ``n_factors`` the count is the eigenvalue-ratio choice, which
    picks the numerical rank when the panel is exactly reduced-rank.
    """
    c = common[:, :train]
    mu = c.mean(axis=1, keepdims=True)
    lam, V = eigen_sym((c - mu) @ (c - mu).T / train)
    if n_factors is None:
        # eigenvalues at rounding level count as zero, so an exactly reduced-rank
        # panel yields its rank regardless of scale
        lam = np.where(lam > RANK_TOL * max(lam[0], 0.0), lam, 0.0)
        n_factors = select_r_ratio(lam, min(r_max, lam.size - 1)) if lam.size > 1 else 1
    return V[:, :n_factors].T @ (common - mu)


def _direct(target: np.ndarray, S: np.ndarray, h: int, p_lags: int, train_stop: int, origins: np.ndarray):
    """Fit ``target_{t+h}`` on lags of ``S`` over ``t + h < train_stop``; predict at ``origins``."""
    t_fit = np.arange(p_lags - 1, train_stop - h)
    if t_fit.size <= p_lags * S.shape[0] + 1:
        raise DimensionError("training window too short for the regression")
    reg = ols(lag_matrix(S, p_lags, t_fit), target[t_fit + h])
    return lag_matrix(S, p_lags, origins) @ reg.coef, reg


def forecast_components(
    common: np.ndarray,
    idio: np.ndarray,
    i: int,
    h: int = 1,
    p_lags: int = 4,
    n_factors: int | None = None,
    train: int | None = None,
    augment_idio: bool = False,
    mode: str = "components",
    factors: np.ndarray | None = None,
) -> ForecastSet:
    """Out-of-sample forecasts of ``X_i = common_i + idio_i`` from component panels.

    Regressions use the first ``train`` columns (default: half the sample);
    forecasts are made at every origin ``t >= train - 1`` with ``t + h`` in
    the sample.  ``augment_idio`` adds the common factors' lags to the
    idiosyncratic regression.
    """
    common, idio = np.asarray(common, float), np.asarray(idio, float)
    n, T = common.shape
    if idio.shape != common.shape:
        raise DimensionError("common and idio panels differ in shape")
    if h < 1 or p_lags < 1:
        raise DimensionError("need h >= 1 and p_lags >= 1")
    if not 0 <= i < n:
        raise DimensionError(f"series index {i} outside 0..{n - 1}")
    train = T // 2 if train is None else int(train)
    F = common_factors(common, train, n_factors) if factors is None else factors
    r = F.shape[0]
    if train < 10 * (r * p_lags + p_lags):
        raise DimensionError(f"training window {train} shorter than 10*(r*p + p) = {10 * (r * p_lags + p_lags)}")
    origins = np.arange(train - 1, T - h)
    chi_hat, cfit = _direct(common[i], F, h, p_lags, train, origins)
    S = idio[i][None, :]
    if augment_idio:
        S = np.vstack([S, F])
    xi_hat, ifit = _direct(idio[i], S, h, p_lags, train, origins)
    flags = [name for name, reg in (("common_ridge", cfit), ("idio_ridge", ifit)) if reg.ridge]
    realized = common[i, origins + h] + idio[i, origins + h]
    return ForecastSet(h, i, origins, realized, {mode: ModeForecast(chi_hat, xi_hat, cfit, ifit, flags)})


def _window_forecast(common_w, idio_w, i, h, p_lags, n_factors):
    """Forecast ``h`` steps past the last column of component panels fitted on the whole window."""
    T = common_w.shape[1]
    F = common_factors(common_w, T, n_factors)
    last = np.array([T - 1])
    chi, cfit = _direct(common_w[i], F, h, p_lags, T, last)
    xi, ifit = _direct(idio_w[i], idio_w[i][None, :], h, p_lags, T, last)
    return chi[0], xi[0], cfit.ridge or ifit.ridge


def rolling_eval(
    p: Panel,
    mode: str,
    i: int,
    h: int = 1,
    window: int | None = None,
    p_lags: int = 4,
    r_or_q: int = 1,
    M: int | None = None,
    truth: SimOutput | None = None,
    step: int = 1,
    n_factors: int | None = None,
) -> ForecastSet:
    """Rolling-window forecasts of ``X_{i,t+h}`` re-estimated at each origin.

    Origins are ``t = window-1, window-1+step, ...`` with ``t + h < T``.  In
    ``dyn`` mode the two-sided filter leaves the last ``M`` columns of each
    window undefined, so components stop at ``t - M`` and the projections
    are direct ``(h + M)``-step ones targeting the same ``X_{i,t+h}``.
    Oracle modes read the true components from ``truth``.
    """
    if mode not in MODES:
        raise DimensionError(f"unknown mode {mode!r}; choose from {MODES}")
    T = p.T
    window = T - h if window is None else int(window)
    if window < 2 or window + h > T:
        raise DimensionError(f"infeasible window {window} for T={T}, h={h}")
    if mode.startswith("oracle") and truth is None:
        raise DimensionError("oracle modes need the simulated truth")
    M = default_bandwidth(window) if M is None else int(M)
    origins = np.arange(window - 1, T - h, step)
    chi, xi, flags = [], [], []
    for t in origins:
        lo = t - window + 1
        if mode == "stat":
            d = static_decompose(p.window(lo, t + 1), r_or_q)
            c_w, i_w, hh = d.common, d.idio, h
        elif mode == "dyn":
            d = gdfm_decompose(p.window(lo, t + 1), r_or_q, M)
            c_w, i_w, hh = d.common, d.idio, h + M
        elif mode == "oracle_stat":
            c_w, i_w, hh = truth.static_common[:, lo : t + 1], truth.static_idio[:, lo : t + 1], h
        else:
            c_w, i_w, hh = truth.common[:, lo : t + 1], truth.idio[:, lo : t + 1], h
        a, b, ridge = _window_forecast(c_w, i_w, i, hh, p_lags, n_factors)
        chi.append(a)
        xi.append(b)
        if ridge:
            flags.append(f"ridge@{int(t)}")
    realized = p.data[i, origins + h]
    return ForecastSet(h, i, origins, realized, {mode: ModeForecast(np.array(chi), np.array(xi), flags=flags)})


def panel_mse(common: np.ndarray, idio: np.ndarray, h: int = 1, p_lags: int = 4, train: int | None = None,
              augment_idio: bool = False, n_factors: int | None = None) -> np.ndarray:
    """Out-of-sample MSE of :func:`forecast_components` for every series (factors computed once)."""
    T = common.shape[1]
    train = T // 2 if train is None else train
    F = common_factors(common, train, n_factors)
    return np.array([
        forecast_components(common, idio, i, h, p_lags, train=train, augment_idio=augment_idio, factors=F).mse("components")
        for i in range(common.shape[0])
    ])
