"""Command line entry point: ``vanishdist {calibrate,verify,sweep,norm,report}``.

Exit codes: 0 when every check passes, 1 on any FAIL, 2 on configuration
or usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..construction import build_squeeze1, build_squeeze2, build_transport
from ..fields import Bump, Gaussian, RadialTaper
from ..norms import NonConvergent, gn_estimate, holdout_field, sobolev_norm
from .config import CLI_NORM_METHODS, ConfigError, load_config
from .runner import RunReport, calibrate, sweep, verify_displacement

BUILTIN_FIELDS = ("radial-taper", "bump", "gaussian", "holdout", "squeeze1", "squeeze2", "transport")


def _k_list(text: str) -> tuple:
    try:
        ks = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or a comma list, got {text!r}")
    if not ks:
        raise argparse.ArgumentTypeError("empty k list")
    return ks


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--k", type=_k_list, help="scale or comma list of scales")
    common.add_argument("--out", help="output file (stdout when omitted)")
    common.add_argument("--norm-method", choices=tuple(CLI_NORM_METHODS), help="norm estimator")
    common.add_argument("--clamp", type=float, metavar="LOG10_FLOOR",
                        help="evaluate flows with lambda_eff = max(lambda_k, 10^LOG10_FLOOR)")

    parser = argparse.ArgumentParser(prog="vanishdist", description="Displacement and cost-ledger experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="calibrate the interpolation constants")
    sub.add_parser("verify", parents=[common], help="check that Phi_k displaces the unit cube")
    sub.add_parser("sweep", parents=[common], help="cost ledger over k with displacement checks")
    p = sub.add_parser("norm", parents=[common], help="estimate the norm of a built-in field")
    p.add_argument("field", choices=BUILTIN_FIELDS)
    p = sub.add_parser("report", parents=[common], help="render a stored report")
    p.add_argument("path")
    return parser


def _resolve(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.k is not None:
        changes["k"] = args.k
    if args.norm_method is not None:
        changes["norm_method"] = args.norm_method
    if args.clamp is not None:
        changes["log10_lambda"] = args.clamp
        changes["lambda_mode"] = "floor"
    try:
        return cfg.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _summary(report: RunReport) -> str:
    lines = [f"{report.kind} report (seed {report.config.get('seed')}): "
             f"{'PASS' if report.passed else 'FAIL'}"]
    for k, d in report.displacement.items():
        mx = d["min_final_x"]
        lines.append(f"  k={k}: min final x = {mx if mx is None else format(mx, '.6f')}, "
                     f"violations {d['violation_count']}, errors {len(d['errors'])} "
                     f"[{'pass' if d['pass'] else 'FAIL'}]")
    for c in report.norm_checks:
        extra = f" j0={c['j0']}" if "j0" in c else ""
        lines.append(f"  {c['name']}{extra} [{'pass' if c['pass'] else 'FAIL'}]")
    return "\n".join(lines)


def _builtin(name: str, cfg):
    n = cfg.n
    if name == "radial-taper":
        return RadialTaper(np.zeros(n), 1.0)
    if name == "bump":
        return Bump(np.zeros(n), 1.0)
    if name == "gaussian":
        return Gaussian(np.zeros(n), 0.25)
    if name == "holdout":
        return holdout_field(n)
    cp = cfg.construction(cfg.k[0])
    index = (0,) * cp.m
    build = {"squeeze1": build_squeeze1, "squeeze2": build_squeeze2, "transport": build_transport}[name]
    return build(cp, index, cfg.integrator)[0].base


def _cmd_norm(args, cfg) -> int:
    f = _builtin(args.field, cfg)
    method = cfg.flow_norm_method or "gagliardo-mc"
    if method == "gagliardo-mc":
        est = sobolev_norm(f, cfg.sp, cfg.sampler)
    else:
        if cfg.C_a is None:
            raise ConfigError("interpolation bounds need [constants] C_a and C_b in the config")
        est = gn_estimate(f, cfg.sp, cfg.C_a if method == "gn-bound-a" else cfg.C_b, method, cfg.sampler)
    rec = {"field": args.field, "method": est.method, "value": est.value, "stderr": est.stderr,
           "samples": est.sample_count, "seed": cfg.seed, "n": cfg.n, "p": cfg.p}
    _emit(json.dumps(rec, sort_keys=True), args.out)
    return 0


def _cmd_report(args) -> int:
    try:
        lines = Path(args.path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.path}: {exc}") from exc
    ok = True
    for i, line in enumerate(filter(str.strip, lines), 1):
        try:
            rep = RunReport.from_dict(json.loads(line))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{args.path}:{i}: not a run report ({exc})") from exc
        print(_summary(rep))
        ok &= rep.passed
    return 0 if ok else 1


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "report":
            return _cmd_report(args)
        cfg = _resolve(args)
        if args.command == "calibrate":
            rec = calibrate(cfg)
            _emit(json.dumps(rec, sort_keys=True), args.out)
            print(f"C_a = {rec['C_a']:.6g}, C_b = {rec['C_b']:.6g}", file=sys.stderr)
            return 0
        if args.command == "norm":
            return _cmd_norm(args, cfg)
        if args.command == "verify":
            report = verify_displacement(cfg)
            _emit(report.to_json(), args.out)
            print(_summary(report), file=sys.stderr)
            return 0 if report.passed else 1
        report, table = sweep(cfg)
        _emit(table, args.out)
        if args.out is not None:
            Path(args.out).with_suffix(".json").write_text(report.to_json(timing=False) + "\n")
        print(_summary(report), file=sys.stderr)
        return 0 if report.passed else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergent as exc:
        print(f"estimate did not converge: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
