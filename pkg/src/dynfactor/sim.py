"""Seeded data-generating processes with their true components.

Random streams: every generator draws from
``default_rng(SeedSequence([seed, SIM_STREAM]))`` in a fixed order
(loadings, then factors, then idiosyncratic noise), while permutation
draws elsewhere use ``[seed, PERM_STREAM]``, so the two are reproducible
independently from one root seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .panel import Panel, write_csv

SIM_STREAM = 0
PERM_STREAM = 1

DGPS = ("block_one_factor", "rand_one_factor", "rand_two_factor", "dynamic_loading", "white_noise")


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(which)]))


@dataclass(frozen=True)
class SimConfig:
    dgp: str
    n: int
    T: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class SimOutput:
    """Simulated panel with its truth.

    ``common``/``idio`` are the model's (dynamic) components.  ``static_common``
    is the population projection of ``X_t`` on the top ``static_r``
    eigenvectors of the population covariance ``population_cov``.
    """

    config: SimConfig
    panel: Panel
    common: np.ndarray
    idio: np.ndarray
    factors: np.ndarray
    loadings: np.ndarray
    population_cov: np.ndarray
    static_common: np.ndarray
    static_r: int

    @property
    def static_idio(self) -> np.ndarray:
        return self.panel.data - self.static_common

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(self.panel, out / "panel.csv")
        for name, arr in [
            ("common", self.common),
            ("idio", self.idio),
            ("static_common", self.static_common),
            ("factors", self.factors),
            ("loadings", self.loadings.reshape(self.loadings.shape[0], -1)),
        ]:
            np.savetxt(out / f"true_{name}.csv", arr, delimiter=",", fmt="%.12g")
        (out / "config.json").write_text(self.config.to_json() + "\n")


def block_loadings(n: int) -> np.ndarray:
    """Three equal blocks at 0.25, 1 and ``c`` with ``c`` chosen so that ``B'B / n = 1``."""
    if n % 3 != 0 or n < 3:
        raise DimensionError(f"block design needs n divisible by 3, got n={n}")
    k = n // 3
    c = np.sqrt((n - k * (0.0625 + 1.0)) / k)
    return np.concatenate([np.full(k, 0.25), np.ones(k), np.full(k, c)])


def _static_projection(X: np.ndarray, G: np.ndarray, r: int) -> np.ndarray:
    _, V = np.linalg.eigh(G)
    V = V[:, ::-1][:, :r]
    return V @ (V.T @ X)


def _finish(config, X, common, factors, loadings, G, static_r) -> SimOutput:
    idio = X - common
    return SimOutput(
        config,
        Panel(X),
        common,
        idio,
        factors,
        loadings,
        G,
        _static_projection(X, G, static_r) if static_r > 0 else np.zeros_like(X),
        static_r,
    )


def _ar_noise(rng, n, T, ar: float, burn: int = 200) -> np.ndarray:
    e = rng.standard_normal((n, T + burn))
    if ar == 0.0:
        return e[:, burn:]
    out = np.empty_like(e)
    out[:, 0] = e[:, 0]
    for t in range(1, T + burn):
        out[:, t] = ar * out[:, t - 1] + e[:, t]
    return out[:, burn:]


def _static_factor_model(config: SimConfig, L: np.ndarray, rng) -> SimOutput:
    n, T = config.n, config.T
    k = L.shape[1]
    f = rng.standard_normal((k, T))
    eps = rng.standard_normal((n, T))
    common = L @ f
    X = common + eps
    G = L @ L.T + np.eye(n)
    return _finish(config, X, common, f, L, G, k)


def gen_block_one_factor(n: int, T: int, seed: int = 0) -> SimOutput:
    """One white-noise factor with block loadings (0.25, 1, c) and unit white noise."""
    cfg = SimConfig("block_one_factor", n, T, seed)
    B = block_loadings(n)
    return _static_factor_model(cfg, B[:, None], stream(seed, SIM_STREAM))


def gen_rand_one_factor(n: int, T: int, seed: int = 0) -> SimOutput:
    """Block loadings multiplied by independent ``N(0, 1)`` draws, fixed over time."""
    cfg = SimConfig("rand_one_factor", n, T, seed)
    rng = stream(seed, SIM_STREAM)
    B = block_loadings(n)
    u = rng.standard_normal(n)
    return _static_factor_model(cfg, (B * u)[:, None], rng)


def gen_rand_two_factor(n: int, T: int, seed: int = 0, u2_var: float = 0.5) -> SimOutput:
    """Two factors sharing the block loadings, scaled by ``N(0,1)`` and ``N(0, u2_var)`` draws."""
    cfg = SimConfig("rand_two_factor", n, T, seed, {"u2_var": u2_var})
    rng = stream(seed, SIM_STREAM)
    B = block_loadings(n)
    u1 = rng.standard_normal(n)
    u2 = rng.standard_normal(n) * np.sqrt(u2_var)
    return _static_factor_model(cfg, np.column_stack([B * u1, B * u2]), rng)


def gen_dynamic_loading(
    n: int,
    T: int,
    seed: int = 0,
    lag_coeffs=(1.0, 1.0),
    n_shocks: int = 1,
    static_r: int | None = None,
    idio_ar: float = 0.0,
) -> SimOutput:
    """Shocks loaded with lags: ``X_it = sum_s sum_l a_l b_{il,s} u_{s,t-l} + e_it``.

    ``b_{il,s}`` are i.i.d. standard normal (exchangeable across ``i``),
    ``a_l = lag_coeffs[l]``, shocks and noise are unit-variance white noise,
    and the noise is AR(1) with coefficient ``idio_ar`` when nonzero.
    ``loadings`` has shape ``(n, n_shocks, L + 1)`` with ``a_l`` folded in.
    """
    a = np.asarray(lag_coeffs, float)
    static_r = n_shocks if static_r is None else static_r
    cfg = SimConfig(
        "dynamic_loading", n, T, seed,
        {"lag_coeffs": a.tolist(), "n_shocks": n_shocks, "static_r": static_r, "idio_ar": idio_ar},
    )
    if abs(idio_ar) >= 1:
        raise DimensionError("idio_ar must lie in (-1, 1)")
    rng = stream(seed, SIM_STREAM)
    L = a.size - 1
    b = rng.standard_normal((n, n_shocks, L + 1)) * a[None, None, :]
    u = rng.standard_normal((n_shocks, T + L))
    common = np.zeros((n, T))
    for s in range(n_shocks):
        for lag in range(L + 1):
            common += np.outer(b[:, s, lag], u[s, L - lag : L - lag + T])
    eps = _ar_noise(rng, n, T, idio_ar)
    X = common + eps
    G = np.zeros((n, n))
    for s in range(n_shocks):
        G += b[:, s, :] @ b[:, s, :].T
    G += np.eye(n) / (1.0 - idio_ar**2)
    return _finish(cfg, X, common, u[:, L:], b, G, static_r)


def gen_white_noise(n: int, T: int, seed: int = 0, idio_ar: float = 0.0) -> SimOutput:
    cfg = SimConfig("white_noise", n, T, seed, {"idio_ar": idio_ar})
    rng = stream(seed, SIM_STREAM)
    X = _ar_noise(rng, n, T, idio_ar)
    G = np.eye(n) / (1.0 - idio_ar**2)
    return _finish(cfg, X, np.zeros((n, T)), np.zeros((0, T)), np.zeros((n, 0)), G, 0)


def generate(dgp: str, n: int, T: int, seed: int = 0, **params) -> SimOutput:
    gens = {
        "block_one_factor": gen_block_one_factor,
        "rand_one_factor": gen_rand_one_factor,
        "rand_two_factor": gen_rand_two_factor,
        "dynamic_loading": gen_dynamic_loading,
        "white_noise": gen_white_noise,
    }
    if dgp not in gens:
        raise DimensionError(f"unknown DGP {dgp!r}; choose from {DGPS}")
    return gens[dgp](n, T, seed, **params)


def loading_order(loadings: np.ndarray, how: str) -> np.ndarray:
    """Deterministic orderings by loading size: ``inc``, ``dec`` or ``alt``.

    ``alt`` alternates the largest and smallest remaining loadings.  Ordering
    is by absolute value (by row norm for several factors); ties keep index order.
    """
    L = np.asarray(loadings, float)
    size = np.abs(L) if L.ndim == 1 else np.linalg.norm(L.reshape(L.shape[0], -1), axis=1)
    inc = np.argsort(size, kind="stable")
    if how == "inc":
        return inc
    if how == "dec":
        return inc[::-1].copy()
    if how == "alt":
        n = inc.size
        out = np.empty(n, dtype=int)
        out[0::2] = inc[::-1][: (n + 1) // 2]
        out[1::2] = inc[: n // 2]
        return out
    raise ValueError(f"unknown ordering {how!r}")
