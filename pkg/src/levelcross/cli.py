"""Command-line entry point.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness as H
from .errors import ConfigError, LevelCrossError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levelcross", description="Two-state level-crossing simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment JSON file")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--tol", type=float, default=None,
                        help=f"integrator tolerance (default {H.DEFAULT_TOL:g} or the config value)")
        return sp

    common(sub.add_parser("run", help="single propagation plus crossing report"))
    common(sub.add_parser("sweep", help="parameter sweep")).add_argument(
        "--workers", type=int, default=1)
    fig = common(sub.add_parser("figure", help="data for one of the three reference figures"),
                 config_required=False)
    fig.add_argument("--id", type=int, required=True, choices=(1, 2, 3))
    fig.add_argument("--workers", type=int, default=1)
    common(sub.add_parser("eta-scan", help="adiabaticity parameter over the window"))
    lz = common(sub.add_parser("lz-check", help="integrator check against the LZSM formula"),
                config_required=False)
    lz.add_argument("--window-factor", type=float, default=None)
    return p


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None


def _figure_values(path):
    """Optional figure overrides: {"values": [...]} in figure units."""
    if path is None:
        return None
    d = _load_json(path)
    if not isinstance(d, dict) or set(d) - {"values"}:
        raise ConfigError("<root>", 'figure config accepts only {"values": [...]}')
    vals = d.get("values")
    if vals is None:
        return None
    if not isinstance(vals, list) or not vals or not all(H._is_number(v) for v in vals):
        raise ConfigError("values", "expected a nonempty list of numbers")
    return vals


def _lz_params(args):
    params = {"parameters": [1.0, 2.0, 4.0], "window_factor": 1000.0, "tol": 1e-7}
    if args.config is not None:
        d = _load_json(args.config)
        if not isinstance(d, dict):
            raise ConfigError("<root>", "expected an object")
        for k, v in d.items():
            if k not in params:
                raise ConfigError(k, "unknown field")
            params[k] = v
        if not isinstance(params["parameters"], list) or not all(
                H._is_number(v) and v >= 0 for v in params["parameters"]):
            raise ConfigError("parameters", "expected a list of nonnegative numbers")
        if not H._is_number(params["window_factor"]) or params["window_factor"] < 10:
            raise ConfigError("window_factor", "must be a number >= 10")
    if args.window_factor is not None:
        params["window_factor"] = args.window_factor
    if args.tol is not None:
        params["tol"] = args.tol
    if not 0 < params["tol"] <= 1e-2:
        raise ConfigError("tol", "must lie in (0, 1e-2]")
    return params


def _run(args) -> None:
    out = Path(args.out)
    if args.command == "figure":
        values = _figure_values(args.config)
        tol = H.DEFAULT_TOL if args.tol is None else args.tol
        H.with_tol(H.figure_config(args.id), tol)  # validates tol
        H.emit_figure_data(args.id, out, tol=tol, workers=args.workers, values=values)
        print(f"wrote {out / f'fig{args.id}_a.csv'} and {out / f'fig{args.id}_b.csv'}")
        return
    if args.command == "lz-check":
        p = _lz_params(args)
        rows = H.lz_check(p["parameters"], p["window_factor"], p["tol"], out)
        for r in rows:
            print(f"Omega0^2/kappa={H.fmt(r.parameter)} numeric={H.fmt(r.numeric)} "
                  f"analytic={H.fmt(r.analytic)} error={H.fmt(r.error)}")
        return

    config = H.with_tol(H.ExperimentConfig.from_file(args.config), args.tol)
    if args.command == "run":
        res = H.run_single(config, out)
        tr = res.trajectory
        print(f"p_up_final={H.fmt(tr.p_up_final)} p_down_final={H.fmt(tr.p_down_final)}")
        for r in res.reports:
            print(f"t_c={H.fmt(r.t_c)} Theta={H.fmt(r.Theta)} "
                  f"predicted_survival={H.fmt(r.predicted_survival)} verdict={r.crossing_adiabatic}")
        for f in res.flags:
            print(f"flag: {f}")
    elif args.command == "sweep":
        rows = H.run_sweep(config, args.workers, out)
        n_err = sum(1 for r in rows if r.error)
        print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows, {n_err} failed)")
    elif args.command == "eta-scan":
        scan = H.run_eta_scan(config, out)
        print(f"max_eta_outside_crossing={H.fmt(scan.max_outside)}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LevelCrossError, ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
