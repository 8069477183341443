"""Command-line entry point: ``elmeta {analyze,simulate,qq,diverge}``.

Exit codes: 0 on success, 2 for bad input (files, flags, config), 3 when
every requested method failed numerically. Errors are written to stderr
as a one-line JSON document.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import analyze, to_ratio_scale
from .el import Variant
from .errors import BadConfig, BadFlags, ElMetaError, NumericalError
from .io import (
    fmt,
    format_table,
    output_dir,
    read_config,
    read_dataset,
    results_document,
    write_csv,
)
from .simulation import (
    NRule,
    Scenario,
    SimulationConfig,
    qq_pairs,
    run_coverage,
    run_divergence,
    run_qq,
)
from .types import ALL_METHODS, Method, Scale

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse parser that reports usage errors as BadFlags."""

    def error(self, message):
        raise BadFlags(message)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _methods(text: str) -> list[Method]:
    if text.strip().lower() == "all":
        return list(ALL_METHODS)
    try:
        return [Method.parse(m) for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _variants(text: str) -> list[Variant]:
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            v = Variant(Method.parse(name).value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown EL variant {name!r}")
        if v not in (Variant.INDICATOR, Variant.SYMMETRY, Variant.BOTH):
            raise argparse.ArgumentTypeError("QQ variants are EL1, EL2 and EL3")
        out.append(v)
    return out


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="elmeta", description="Meta-analysis of reported confidence intervals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="combine the study intervals in a dataset file")
    a.add_argument("--input", required=True, help="CSV or JSON dataset")
    a.add_argument("--format", choices=["csv", "json"], help="input format (default: from suffix)")
    a.add_argument("--scale", choices=[s.value for s in Scale], default=None)
    a.add_argument("--input-ratio", action="store_true",
                   help="bounds are ratios; natural logs are taken (requires --scale log)")
    a.add_argument("--methods", type=_methods, default=list(ALL_METHODS),
                   help="comma-separated method names, or 'all' (default)")
    a.add_argument("--beta", type=float, default=0.05, help="1 - confidence level (default 0.05)")
    a.add_argument("--report-scale", choices=["native", "ratio"], default="native")
    a.add_argument("--full-level-set", action="store_true",
                   help="also compute every component of the EL3 confidence set")
    a.add_argument("--json", action="store_true", help="print the JSON document instead of a table")
    a.add_argument("--output", help="also write the JSON document here")

    s = sub.add_parser("simulate", help="coverage experiments from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help="overrides out_dir in the config and $ELMETA_OUTPUT_DIR")

    q = sub.add_parser("qq", help="sample -2 log R(theta0) under chi2(4) data")
    q.add_argument("--n", type=_positive_int, required=True, help="observations per study")
    q.add_argument("--K", type=_positive_int, required=True, help="number of studies")
    q.add_argument("--replicates", type=_positive_int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--variants", type=_variants, default=[Variant.INDICATOR, Variant.SYMMETRY,
                                                           Variant.BOTH])
    q.add_argument("--out-dir")

    d = sub.add_parser("diverge", help="mean of the Gaussian combined statistic Z")
    d.add_argument("--K-list", type=_int_list, required=True)
    d.add_argument("--n-list", type=_int_list, required=True)
    d.add_argument("--replicates", type=_positive_int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--control", action="store_true",
                   help="Gaussian noise with the chi2(4) variance instead of chi2(4) noise")
    d.add_argument("--out-dir")
    return p


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    if not 0 < args.beta < 1:
        raise BadFlags(f"--beta must lie in (0, 1), got {args.beta}")
    if not args.methods:
        raise BadFlags("--methods is empty")
    dataset = read_dataset(args.input, args.format, args.scale, args.input_ratio)
    if args.report_scale == "ratio" and dataset.scale is not Scale.LOG:
        raise BadFlags("--report-scale ratio requires a log-scale dataset")
    rows = analyze(dataset, args.methods, args.beta, full_level_set=args.full_level_set)
    if args.report_scale == "ratio":
        rows = [(m, None if r is None else to_ratio_scale(r), e) for m, r, e in rows]
    doc = results_document(rows, input=str(args.input), K=dataset.K, scale=dataset.scale.value,
                           report_scale=args.report_scale, beta=args.beta,
                           study_level=dataset.common_level)
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text if args.json else format_table(rows))
    return EXIT_NUMERIC if all(r is None for _, r, _ in rows) else EXIT_OK


def _cell_name(cfg: SimulationConfig) -> str:
    return f"{cfg.scenario.value}_K{cfg.K}_tau2_{cfg.tau2!r}.csv"


def cmd_simulate(args) -> int:
    run = read_config(args.config)
    out = output_dir(args.out_dir or run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for cfg in run.cells():
        res = run_coverage(cfg, run.methods)
        name = _cell_name(cfg)
        rows = [(m, s.coverage, s.mean_width, s.replicates, s.failures)
                for m, s in res.methods.items()]
        write_csv(out / name, ["method", "coverage", "mean_width", "replicates", "failures"], rows)
        files.append({"file": name, "K": cfg.K, "tau2": cfg.tau2})
        print(f"{name}: " + ", ".join(f"{m}={s.coverage:.3f}" for m, s in res.methods.items()))
    manifest = {"version": __version__, "config": run.to_dict(), "cells": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_qq(args) -> int:
    if args.n < 2 or args.K < 2:
        raise BadFlags("--n and --K must be at least 2")
    try:
        cfg = SimulationConfig(Scenario.FIXED_CHISQ, args.K, n_rule=NRule.fixed(args.n),
                               replicates=args.replicates, seed=args.seed)
    except BadConfig as exc:
        raise BadFlags(str(exc)) from None
    res = run_qq(cfg, args.variants)
    rows = []
    for v in args.variants:
        sample, theory = qq_pairs(res.qq_samples[v.value], v.dim)
        rows.extend((s, t, v.value) for s, t in zip(sample, theory))
    out = output_dir(args.out_dir)
    name = f"qq_n{args.n}_K{args.K}_seed{args.seed}.csv"
    write_csv(out / name, ["sample_quantile", "theoretical_quantile", "variant"], rows)
    for v in args.variants:
        print(f"{v.value}: KS distance to chi2({v.dim}) = {fmt(res.ks[v.value])}")
    print(f"wrote {out / name}")
    return EXIT_OK


def cmd_diverge(args) -> int:
    if min(args.K_list) < 2 or min(args.n_list) < 2:
        raise BadFlags("K and n values must be at least 2")
    rows = run_divergence(args.K_list, args.n_list, args.replicates, args.seed, args.control)
    out = output_dir(args.out_dir)
    noise = "gaussian" if args.control else "chi2"
    name = f"diverge_{noise}_seed{args.seed}.csv"
    write_csv(out / name, ["K", "n", "mean_Z", "se_Z", "mean_Z_tau0", "noise"],
              [(r.K, r.n, r.mean_z, r.se_z, r.mean_z_tau0, noise) for r in rows])
    print(f"wrote {out / name}")
    return EXIT_OK


_COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "qq": cmd_qq,
             "diverge": cmd_diverge}


def _fail(code: int, exc: BaseException) -> int:
    doc = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    for attr in ("row", "key"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (ElMetaError, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
