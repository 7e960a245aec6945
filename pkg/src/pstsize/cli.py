"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 output error, 4 infeasible
target or moments, 5 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig
from .design_tools import (
    CurvePoint,
    SweepSpec,
    build_design,
    evaluate_pst,
    find_min_n,
    frequentist_n_per_group,
    frequentist_power,
    is_monte_carlo,
    sweep,
    verify,
    with_param,
)
from .errors import ConfigurationError, DomainError, InfeasibleMomentsError, InfeasibleTargetError
from .mixture import solve_mixture_hyperparams
from .presets import PRESETS, get_preset
from .unknown_precision import fit_gamma_moments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_VERIFY = 5

CSV_HEADER = ["n", "vary_name", "vary_value", "psi", "psi_star", "std_error"]


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _fmt(x) -> str:
    """Round-trippable rendering used in CSV output."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.17g}"


def parse_grid(text: str) -> list[int]:
    """``"20,40,60"`` or inclusive ``"start:stop:step"``."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step < 1:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse n grid {text!r}", field="n_grid") from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigurationError(f"--param expects KEY=VALUE, got {text!r}", field="param")
    return key.strip(), _parse_value(value.strip())


def _parse_vary(text: str):
    name, sep, values = text.partition("=")
    if not sep or not name:
        raise ConfigurationError(f"--vary expects NAME=v1,v2,..., got {text!r}", field="vary")
    try:
        return name.strip(), [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--vary values must be numbers, got {values!r}", field="vary") from None


def resolve_config(args) -> RunConfig:
    """Config file or preset first, then command-line overrides."""
    if args.config and args.preset:
        raise ConfigurationError("give --config or --preset, not both", field="config")
    if args.config:
        cfg = RunConfig.load(args.config)
    elif args.preset:
        try:
            cfg = RunConfig.from_dict(get_preset(args.preset))
        except KeyError as exc:
            raise ConfigurationError(str(exc.args[0]), field="preset") from None
    else:
        cfg = RunConfig()
    if args.model is not None:
        if args.model != cfg.model and (args.config or args.preset):
            cfg.params = {}
        cfg.model = args.model
    for item in args.param or ():
        key, value = _parse_param(item)
        cfg.params = with_param(cfg.params, key, value)
    for attr in ("n", "seed", "reps", "target", "target_kind", "n_max", "step"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "n_grid", None) is not None:
        cfg.n_grid = parse_grid(args.n_grid)
    if getattr(args, "vary", None) is not None:
        cfg.vary_name, cfg.vary_values = _parse_vary(args.vary)
    if not 0 <= int(cfg.seed) < 2 ** 64:
        raise ConfigurationError("seed must be a 64-bit unsigned integer", field="seed")
    if int(cfg.reps) != cfg.reps or cfg.reps < 1000:
        raise ConfigurationError("reps must be an integer >= 1000", field="reps")
    if args.save_config:
        _write_text(args.save_config, cfg.to_json())
    return cfg


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _emit(args, text):
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _kv(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in rows)


def _p4(x):
    return f"{x:.4f}"


def _require_n(cfg):
    if cfg.n is None:
        raise ConfigurationError("no sample size given (--n)", field="n")
    return cfg.n


# -- subcommands ------------------------------------------------------------


def cmd_pst(args) -> int:
    cfg = resolve_config(args)
    design = build_design(cfg.model, cfg.params, _require_n(cfg))
    res = evaluate_pst(design, seed=cfg.seed, reps=cfg.reps, workers=args.workers)
    lay = design.layout
    if args.format == "csv":
        row = [cfg.model, lay.n_total, lay.n_E, lay.n_C, res.psi, res.psi_star, res.prior_prob,
               res.method.value, res.std_error]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "n", "n_E", "n_C", "psi", "psi_star", "prior_prob", "method", "std_error"])
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
        _emit(args, buf.getvalue())
        return EXIT_OK
    rows = [
        ("model", cfg.model),
        ("n", lay.n_total),
        ("n_E", lay.n_E),
        ("n_C", lay.n_C),
        ("psi", _p4(res.psi)),
        ("psi_star", _p4(res.psi_star)),
        ("prior_prob", _p4(res.prior_prob)),
        ("method", res.method.value),
    ]
    if res.mc is not None:
        rows += [("std_error", f"{res.std_error:.6f}"), ("reps", res.mc.replications), ("seed", cfg.seed)]
    _emit(args, _kv(rows))
    return EXIT_OK


def curve_csv(points: list[CurvePoint], vary_name) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        w.writerow([p.n, vary_name or "", _fmt(p.vary_value), _fmt(p.psi), _fmt(p.psi_star), _fmt(p.std_error)])
    return buf.getvalue()


def read_curve_csv(text: str) -> list[CurvePoint]:
    """Inverse of :func:`curve_csv`."""

    def num(s):
        return math.nan if s == "" else float(s)

    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        CurvePoint(
            n=int(r["n"]),
            psi=num(r["psi"]),
            psi_star=num(r["psi_star"]),
            std_error=None if r["std_error"] == "" else float(r["std_error"]),
            vary_value=num(r["vary_value"]),
        )
        for r in rows
    ]


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    grid = cfg.n_grid if cfg.n_grid is not None else ([cfg.n] if cfg.n is not None else [])
    spec = SweepSpec(
        model=cfg.model,
        n_grid=grid,
        fixed=cfg.params,
        vary_name=cfg.vary_name,
        vary_values=cfg.vary_values or (),
        reps=cfg.reps,
        seed=cfg.seed,
    )
    points = sweep(spec, workers=args.workers)
    _emit(args, curve_csv(points, cfg.vary_name))
    return EXIT_OK


def cmd_size(args) -> int:
    if args.frequentist:
        missing = [f for f in ("sd", "delta_star") if getattr(args, f) is None]
        if missing:
            raise ConfigurationError(f"--frequentist needs --{missing[0].replace('_', '-')}", field=missing[0])
        try:
            m = frequentist_n_per_group(args.sd, args.delta_star, args.alpha, args.power, args.ratio)
        except DomainError as exc:
            raise ConfigurationError(str(exc), field="frequentist") from exc
        n_E = math.ceil(args.ratio * m)
        rows = [
            ("method", "frequentist"),
            ("n_per_group", m),
            ("n_E", n_E),
            ("n_C", m),
            ("n", n_E + m),
            ("power", _p4(frequentist_power(args.sd, args.delta_star, args.alpha, m, args.ratio))),
        ]
        _emit(args, _kv(rows))
        return EXIT_OK

    cfg = resolve_config(args)
    if cfg.target is None:
        raise ConfigurationError("no target given (--target)", field="target")
    design = build_design(cfg.model, cfg.params, cfg.n if cfg.n is not None else 100)
    try:
        res = find_min_n(design, cfg.target, cfg.target_kind, n_max=cfg.n_max, step=cfg.step,
                         reps=cfg.reps, seed=cfg.seed, workers=args.workers)
    except InfeasibleTargetError as exc:
        _emit(args, _kv([("status", "infeasible"), ("target", f"{exc.kind}={exc.target:g}"),
                         ("limit", _p4(exc.limit))]))
        raise _Exit(EXIT_INFEASIBLE, str(exc)) from exc
    if not res.found:
        _emit(args, _kv([("status", "not reached"), ("target", f"{res.target_kind}={res.target:g}"),
                         ("n_max", res.n_max), ("limit", _p4(res.limit))]))
        raise _Exit(EXIT_INFEASIBLE, f"target not reached for n <= {res.n_max}")
    rows = [
        ("status", "ok"),
        ("n", res.n),
        ("n_E", res.layout.n_E),
        ("n_C", res.layout.n_C),
        ("psi", _p4(res.result.psi)),
        ("psi_star", _p4(res.result.psi_star)),
        ("limit", _p4(res.limit)),
    ]
    if is_monte_carlo(design):
        rows.append(("std_error", f"{res.result.std_error:.6f}"))
    _emit(args, _kv(rows))
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        if args.kind == "mixture":
            var = args.var if args.var is not None else (args.sd ** 2 if args.sd is not None else None)
            if args.rho is None or args.mean is None or var is None:
                raise ConfigurationError("fit mixture needs --rho, --mean and --var (or --sd)", field="rho")
            prior = solve_mixture_hyperparams(args.rho, args.tau0, args.mean, var)
            rows = [("rho", f"{prior.rho:g}"), ("tau0", f"{prior.tau0:g}"),
                    ("delta1", f"{prior.delta1:.4f}"), ("var1", f"{1.0 / prior.tau1:.4f}"),
                    ("tau1", f"{prior.tau1:.6g}")]
        else:
            if args.mean is None or args.sd is None:
                raise ConfigurationError("fit gamma needs --mean and --sd", field="mean")
            g = fit_gamma_moments(args.mean, args.sd)
            rows = [("alpha0", f"{g.alpha0:.6g}"), ("beta0", f"{g.beta0:.6g}")]
    except InfeasibleMomentsError as exc:
        raise _Exit(EXIT_INFEASIBLE, str(exc)) from exc
    _emit(args, _kv(rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = resolve_config(args)
    grid = cfg.n_grid if cfg.n_grid is not None else ([cfg.n] if cfg.n is not None else [])
    if not grid:
        raise ConfigurationError("verify needs an n grid (--n-grid or --n)", field="n_grid")
    report = verify(cfg.model, cfg.params, grid, reps=cfg.reps, seed=cfg.seed, workers=args.workers,
                    tau_scale=args.perturb_tau)
    lines = [f"{'n':>6}  {'closed_form':>12}  {'monte_carlo':>12}  {'std_error':>10}  {'z':>6}  ok\n"]
    for r in report.rows:
        lines.append(f"{r.n:>6}  {r.closed_form:>12.6f}  {r.monte_carlo:>12.6f}  {r.std_error:>10.6f}  "
                     f"{r.z:>6.2f}  {'yes' if r.ok else 'NO'}\n")
    lines.append(f"max_z  {report.max_z:.3f}\n")
    lines.append(f"status  {'ok' if report.ok else 'FAILED'}\n")
    _emit(args, "".join(lines))
    return EXIT_OK if report.ok else EXIT_VERIFY


# -- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Exit(EXIT_CONFIG, message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--preset", help=f"named configuration: {', '.join(sorted(PRESETS))}")
    g.add_argument("--model", choices=["known_precision", "mixture", "unknown_precision"])
    g.add_argument("-p", "--param", action="append", metavar="KEY=VALUE", help="set a design parameter")
    g.add_argument("--n", type=int, help="total sample size")
    g.add_argument("--seed", type=int)
    g.add_argument("--reps", type=int, help="Monte Carlo replications")
    g.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo (results do not depend on it)")
    g.add_argument("--out", help="write output here instead of stdout")
    g.add_argument("--format", choices=["text", "csv"], default="text")
    g.add_argument("--save-config", metavar="PATH", help="write the effective configuration as JSON")

    parser = _Parser(prog="pstsize", description="Bayesian sample sizing by the probability of a successful trial.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pst", parents=[common], help="PST of one design")
    p.set_defaults(func=cmd_pst)

    p = sub.add_parser("sweep", parents=[common], help="PST curves as CSV")
    p.add_argument("--n-grid", help="'20,40,60' or 'start:stop:step'")
    p.add_argument("--vary", metavar="NAME=v1,v2", help="parameter to vary across curves")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("size", parents=[common], help="smallest n meeting a PST target")
    p.add_argument("--target", type=float)
    p.add_argument("--target-kind", choices=["psi", "psi_star"])
    p.add_argument("--n-max", type=int)
    p.add_argument("--step", type=int)
    p.add_argument("--frequentist", action="store_true", help="classical z-test sizing instead")
    p.add_argument("--sd", type=float)
    p.add_argument("--delta-star", type=float)
    p.add_argument("--alpha", type=float, default=0.025, help="one-sided level")
    p.add_argument("--power", type=float, default=0.80)
    p.add_argument("--ratio", type=float, default=1.0, help="allocation ratio n_E / n_C")
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("fit", parents=[common], help="prior hyperparameters from moments")
    p.add_argument("kind", choices=["mixture", "gamma"])
    p.add_argument("--rho", type=float)
    p.add_argument("--tau0", type=float, default=100.0)
    p.add_argument("--mean", type=float)
    p.add_argument("--var", type=float)
    p.add_argument("--sd", type=float)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", parents=[common], help="closed form against Monte Carlo")
    p.add_argument("--n-grid", help="'20,40,60' or 'start:stop:step'")
    p.add_argument("--perturb-tau", type=float, default=1.0, help="scale tau on the simulation side only")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except _Exit as exc:
        if str(exc):
            print(f"pstsize: {exc}", file=sys.stderr)
        return exc.code
    except ConfigurationError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"pstsize: configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"pstsize: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
