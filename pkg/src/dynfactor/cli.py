"""Command-line interface: ``dynfactor <command> [options]``.

Every command writes into ``--out`` and leaves a single ``manifest.json``
there.  Running ``dynfactor --config <dir>/manifest.json`` repeats the run
with the recorded parameters.  Errors are reported as JSON on stderr with
exit status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FactorError
from .forecast import MODES, rolling_eval
from .gdfm import select_q_hl
from .moments import covariance, covariance_trajectory, eigen_sym, linear_growth_fit, write_trajectory_csv
from .panel import Panel, Permutation, ingest_csv, random_permutations, read_tcodes, write_csv
from .sim import DGPS, PERM_STREAM, generate, loading_order
from .spectra import dynamic_eigen_trajectory, dynamic_eigens, estimate_spectrum, write_eigen_csv
from .static_fm import select_r_ic, select_r_ratio, select_r_tuned
from .weakdecomp import orthogonality_report, three_term, write_report

MANIFEST = "manifest.json"


class UsageError(FactorError):
    code = "usage_error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _c_grid(text: str | None):
    """``lo:hi:num`` (inclusive linspace) or a comma list."""
    if text is None:
        return None
    if ":" in text:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    return np.array(_floats(text))


def _perm_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, PERM_STREAM]).generate_state(1)[0])


def _load_panel(args) -> Panel:
    if args.input is None:
        raise UsageError("--input is required")
    tcodes = read_tcodes(args.tcodes) if getattr(args, "tcodes", None) else None
    return ingest_csv(args.input, tcodes=tcodes, unit_variance=not args.no_unit_variance)


def _sim_from_args(args):
    params = {}
    if args.dgp == "dynamic_loading":
        params = {"lag_coeffs": tuple(args.lag_coeffs), "n_shocks": args.n_shocks}
        if args.static_r is not None:
            params["static_r"] = args.static_r
    if args.dgp == "rand_two_factor":
        params = {"u2_var": args.u2_var}
    if args.idio_ar and args.dgp in ("dynamic_loading", "white_noise"):
        params["idio_ar"] = args.idio_ar
    return generate(args.dgp, args.n, args.T, args.seed, **params)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# commands -------------------------------------------------------------------


def cmd_simulate(args, out: Path) -> dict:
    sim = _sim_from_args(args)
    sim.write(out)
    return {"n": sim.panel.n, "T": sim.panel.T}


def cmd_ingest(args, out: Path) -> dict:
    p = _load_panel(args)
    write_csv(p, out / "panel.csv")
    return {"n": p.n, "T": p.T}


def cmd_eigtraj(args, out: Path) -> dict:
    if args.population:
        if args.loadings is None:
            raise UsageError("--population needs --loadings")
        L = np.loadtxt(args.loadings, delimiter=",", ndmin=2)
        G = L @ L.T + np.eye(L.shape[0])
        n, source = L.shape[0], None
    else:
        source = _load_panel(args)
        n = source.n
    if args.order:
        if args.loadings is None:
            raise UsageError("--order needs --loadings")
        L = np.loadtxt(args.loadings, delimiter=",", ndmin=2)
        perms = [Permutation(loading_order(L[:, 0] if L.shape[1] == 1 else L, args.order))]
    else:
        perms = random_permutations(n, args.perms, _perm_seed(args.seed))
    grid = _ints(args.grid) if args.grid else None
    if args.mode == "static":
        G = G if args.population else covariance(source)
        traj = covariance_trajectory(G, perms, args.j_max, grid, args.normalize)
    else:
        if args.population:
            raise UsageError("population mode is static only")
        S = estimate_spectrum(source, args.M)
        traj = dynamic_eigen_trajectory(S, perms, args.j_max, grid, normalize=args.normalize)
        write_eigen_csv(dynamic_eigens(S, args.j_max, vectors=False), out / "dynamic_eigenvalues.csv")
    write_trajectory_csv(traj, out / "trajectory.csv", include_perms=args.per_perm)
    fits = {}
    for j in range(1, args.j_max + 1):
        try:
            f = linear_growth_fit(traj, j)
            fits[str(j)] = {"slope": f.slope, "intercept": f.intercept, "r2": f.r2}
        except FactorError:
            fits[str(j)] = None
    _write_json(out / "fits.json", fits)
    return {"n": n, "n_permutations": len(perms)}


def cmd_nfactors(args, out: Path) -> dict:
    p = _load_panel(args)
    result = {"method": args.method}
    if args.method == "ratio":
        result["count"] = select_r_ratio(eigen_sym(covariance(p))[0], args.k_max)
    elif args.method == "ic":
        result["count"] = select_r_ic(p, args.k_max)
    else:
        kw = dict(c_grid=_c_grid(args.c_grid), m_grid=_ints(args.m_grid) if args.m_grid else None,
                  R=args.perms, seed=args.seed)
        if args.method == "tuned-static":
            count, surf = select_r_tuned(p, r_max=args.k_max, **kw)
        else:
            count, surf = select_q_hl(p, q_max=args.k_max, M=args.M, **kw)
        surf.write_csv(out / "ic_surface.csv")
        result.update(surf.summary())
        result["count"] = count
    _write_json(out / "selection.json", result)
    return result


def cmd_decompose(args, out: Path) -> dict:
    p = _load_panel(args)
    d = three_term(p, args.r, args.q, args.M)
    d.static.write(out)
    d.dynamic.write(out)
    d.write(out)
    max_lag = args.max_lag if args.max_lag is not None else d.dynamic.M // 2
    write_report(orthogonality_report(d, max_lag), out / "orthogonality.json")
    return {"valid_range": list(d.valid_range), "weak_share": d.weak_share(p.data), "M": d.dynamic.M}


def cmd_forecast(args, out: Path) -> dict:
    truth = None
    if args.dgp is not None:
        truth = _sim_from_args(args)
        p = truth.panel
    else:
        p = _load_panel(args)
    modes = args.mode or ["stat"]
    fs = None
    for mode in modes:
        one = rolling_eval(p, mode, args.i, args.h, args.window, args.p_lags, args.r_or_q, args.M, truth, args.step)
        fs = one if fs is None else fs.merged(one)
    fs.write(out)
    return fs.summary()


# parser ---------------------------------------------------------------------


def _add_input(sp) -> None:
    sp.add_argument("--input", help="panel CSV (time in rows, series in columns)")
    sp.add_argument("--tcodes", help="sidecar file of series,transform-code rows")
    sp.add_argument("--no-unit-variance", action="store_true", help="demean only")


def _add_sim(sp, required: bool) -> None:
    sp.add_argument("--dgp", choices=DGPS, required=required)
    sp.add_argument("--n", type=int, default=240)
    sp.add_argument("--T", type=int, default=100)
    sp.add_argument("--lag-coeffs", type=_floats, default=[1.0, 1.0])
    sp.add_argument("--n-shocks", type=int, default=1)
    sp.add_argument("--static-r", type=int)
    sp.add_argument("--u2-var", type=float, default=0.5)
    sp.add_argument("--idio-ar", type=float, default=0.0)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = _Parser(prog="dynfactor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file of option values, or a previous run's manifest")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, help="worker cap (default: $DYNFACTOR_THREADS or 1)")
        subs[name] = sp
        return sp

    _add_sim(add("simulate", cmd_simulate, "generate a panel with its true components"), required=True)

    _add_input(add("ingest", cmd_ingest, "transform and standardize a CSV panel"))

    sp = add("eigtraj", cmd_eigtraj, "eigenvalue trajectories over nested sub-panels")
    _add_input(sp)
    sp.add_argument("--mode", choices=["static", "dynamic"], default="static")
    sp.add_argument("--perms", type=int, default=100)
    sp.add_argument("--order", choices=["inc", "dec", "alt"], help="deterministic ordering by loading size")
    sp.add_argument("--loadings", help="loadings CSV (needed by --order and --population)")
    sp.add_argument("--population", action="store_true", help="use L L' + I from --loadings")
    sp.add_argument("--j-max", type=int, default=8)
    sp.add_argument("--grid", help="comma-separated sub-panel sizes")
    sp.add_argument("--M", type=int)
    sp.add_argument("--normalize", action="store_true")
    sp.add_argument("--per-perm", action="store_true", help="also write per-permutation rows")

    sp = add("nfactors", cmd_nfactors, "select the number of factors")
    _add_input(sp)
    sp.add_argument("--method", choices=["ratio", "ic", "tuned-static", "hl-dynamic"], default="ic")
    sp.add_argument("--k-max", type=int, default=8)
    sp.add_argument("--perms", type=int, default=20)
    sp.add_argument("--c-grid", help="lo:hi:num or comma list")
    sp.add_argument("--m-grid", help="comma-separated sub-panel sizes")
    sp.add_argument("--M", type=int)

    sp = add("decompose", cmd_decompose, "static, dynamic and three-term decompositions")
    _add_input(sp)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--M", type=int)
    sp.add_argument("--max-lag", type=int)

    sp = add("forecast", cmd_forecast, "rolling out-of-sample forecast evaluation")
    _add_input(sp)
    _add_sim(sp, required=False)
    sp.add_argument("--mode", choices=MODES, action="append")
    sp.add_argument("--i", type=int, default=0)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--window", type=int)
    sp.add_argument("--step", type=int, default=1)
    sp.add_argument("--p-lags", type=int, default=4)
    sp.add_argument("--r-or-q", type=int, default=1)
    sp.add_argument("--M", type=int)
    return parser, subs


def _read_config(path: str) -> tuple[str | None, dict]:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    if "params" in cfg:  # a manifest
        return cfg.get("command"), dict(cfg["params"])
    return cfg.pop("command", None), cfg


def parse(argv: list[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        command, params = _read_config(known.config)
        if command and command in subs and not any(a in subs for a in rest):
            rest = [command, *rest]
        target = next((a for a in rest if a in subs), None)
        if target is None:
            raise UsageError("no command given")
        valid = {a.dest for a in subs[target]._actions}
        unknown = sorted(set(params) - valid)
        if unknown:
            raise UsageError(f"unknown config keys for {target}: {unknown}")
        subs[target].set_defaults(**params)
        # options satisfied by the config are no longer required on the command line
        for action in subs[target]._actions:
            if action.dest in params:
                action.required = False
        argv = rest
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("no command given")
    return args


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "config")}


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    start = time.perf_counter()
    try:
        args = parse(argv)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be positive")
            os.environ["DYNFACTOR_THREADS"] = str(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = args.func(args, out)
        manifest = {
            "command": args.command,
            "params": _params(args),
            "seed": args.seed,
            "version": __version__,
            "inputs": [v for v in (getattr(args, "input", None), getattr(args, "tcodes", None),
                                   getattr(args, "loadings", None)) if v],
            "outputs": sorted(f.name for f in out.iterdir() if f.name != MANIFEST),
            "duration_seconds": time.perf_counter() - start,
            "result": result,
        }
        _write_json(out / MANIFEST, manifest)
    except FactorError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
