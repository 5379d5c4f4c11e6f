"""
Command-line interface for selate
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from . import __version__
from .config import ExperimentConfig, config_from_dict, load_config, output_dir
from .datagen import generate_population
from .errors import ConfigError, DagParseError, EstimationError
from .estimators import list_methods
from .experiment import failed_methods, run_experiment, run_sweep, summarize, SWEEP_BETA_C, SWEEP_BETA_S
from .graphcrit import Criterion, check_criterion, classify_table1, parse_dag
from .identifiability import check_from_dict, report_to_dict
from .reporter import (atomic_write, emit_boxplot_svg, emit_csv, print_criterion, print_failures,
                       print_selection_stats, print_summary, print_table1, sweep_table)
from .rng import new_rng
from .selection import apply_selection
from .utils import Color, parse_node_list

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_INTERRUPTED = 130


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in parse_node_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got '{text}'") from exc


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in parse_node_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{text}'") from exc


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    changes = {}
    if getattr(args, 'methods', None):
        changes['methods'] = tuple(parse_node_list(args.methods))
    if getattr(args, 'seeds', None):
        changes['seeds'] = tuple(args.seeds)
    if getattr(args, 'timing', False):
        changes['record_timing'] = True
    if changes:
        cfg = replace(cfg, **changes)
        cfg.validate()
    return cfg


def cmd_gen(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    population = generate_population(cfg.population.with_seed(seed))
    dataset = population
    if args.selected:
        dataset, selection = apply_selection(population, cfg.selection, new_rng(seed).spawn("selection"))
        print(f"  kept {Color.CYAN}{selection.kept}{Color.NC}/{selection.total} "
              f"({selection.kept_fraction:.1%})")
    path = Path(args.output) if args.output else output_dir(args.output_dir) / f"dataset_seed{seed}.csv"
    atomic_write(path, dataset.save_csv)
    print(f"{Color.GREEN}✓{Color.NC} wrote {len(dataset)} units to {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_experiment(cfg, jobs=args.jobs)
    summary = summarize(report)
    out = output_dir(args.output_dir)
    csv_path = emit_csv(report, out / f"{args.stem}.csv", summary)
    svg_path = emit_boxplot_svg(report, out / f"{args.stem}.svg")

    print_selection_stats(report)
    print_summary(summary, report)
    print_failures(report)
    print(f"{Color.DIM}wrote {csv_path} and {svg_path}{Color.NC}")

    failed = failed_methods(report)
    if failed:
        print(f"{Color.RED}Every seed failed for: {', '.join(failed)}{Color.NC}")
        return EXIT_ESTIMATION
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    reports = run_sweep(cfg, args.beta_c, args.beta_s, jobs=args.jobs)
    out = output_dir(args.output_dir)
    summaries = {}
    rows = []
    for (beta_c, beta_s), report in reports.items():
        summary = summarize(report)
        summaries[(beta_c, beta_s)] = summary
        emit_csv(report, out / f"sweep_C{beta_c:g}_S{beta_s:g}.csv", summary)
        rows.extend({"beta_c": beta_c, "beta_s": beta_s, "method": s.method,
                     "mean_error": s.mean_error, "std_error": s.std_error,
                     "n": s.n, "n_failed": s.n_failed} for s in summary)
    summary_path = out / "sweep_summary.csv"
    frame = pd.DataFrame(rows, columns=["beta_c", "beta_s", "method", "mean_error", "std_error",
                                        "n", "n_failed"])
    atomic_write(summary_path,
                 lambda tmp: frame.to_csv(tmp, index=False, float_format="%.17g", na_rep="nan"))

    print(f"\n{Color.BOLD}Selection-strength sweep (mean error, std){Color.NC}")
    print(sweep_table(reports, summaries))
    print(f"{Color.DIM}wrote {summary_path}{Color.NC}")
    if any(failed_methods(report) for report in reports.values()):
        return EXIT_ESTIMATION
    return EXIT_OK


def cmd_idcheck(args) -> int:
    try:
        document = json.loads(Path(args.input).read_text(encoding='utf-8'))
    except OSError as exc:
        raise ConfigError(f"{args.input}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.input}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if args.external:
        document["external_unbiased_x"] = True
    result = json.dumps(report_to_dict(check_from_dict(document)), indent=2, allow_nan=False)
    if args.output:
        atomic_write(args.output, lambda tmp: tmp.write_text(result + "\n", encoding='utf-8'))
    else:
        print(result)
    return EXIT_OK


def cmd_dagcheck(args) -> int:
    try:
        text = Path(args.file).read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"{args.file}: {exc.strerror or exc}") from exc
    if not args.table1 and not args.criterion:
        raise ConfigError("dagcheck needs --table1 or --criterion")
    dag = parse_dag(text)
    if args.table1:
        print_table1(classify_table1(dag))
    if args.criterion:
        report = check_criterion(dag, args.criterion, parse_node_list(args.z))
        if args.pretty:
            print_criterion(report)
        else:
            print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description=f'ATE estimation under selection bias (v{__version__})',
        prog='selate'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument(
        '-v', '--verbose',
        action='count',
        default=0,
        help='Log progress (-v info, -vv debug)'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    def experiment_options(p, with_jobs=True):
        p.add_argument('config', nargs='?', default=None, help='Experiment config JSON (default: built-in defaults)')
        p.add_argument('--output-dir', default=None, help='Output directory (default: $SELATE_OUTPUT_DIR or ./selate-out)')
        p.add_argument('--seeds', type=_int_list, default=None, help='Comma separated seeds')
        if with_jobs:
            p.add_argument('-j', '--jobs', type=int, default=1, help='Parallel worker processes over seeds (default: 1)')
            p.add_argument('--methods', default=None,
                           help=f"Comma separated methods from: {', '.join(list_methods())}")
            p.add_argument('--timing', action='store_true', help='Record per-method runtimes in the CSV')

    gen = sub.add_parser('gen', help='Generate a population (or its selected part) as CSV')
    experiment_options(gen, with_jobs=False)
    gen.add_argument('--seed', type=int, default=None, help='Seed (default: first configured seed)')
    gen.add_argument('--selected', action='store_true', help='Write only the units kept by selection')
    gen.add_argument('-o', '--output', default=None, help='Output CSV path')
    gen.set_defaults(handler=cmd_gen)

    run = sub.add_parser('run', help='Run the benchmark and write CSV + SVG')
    experiment_options(run)
    run.add_argument('--stem', default='report', help='Output file stem (default: report)')
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser('sweep', help='Sweep outcome-covariate selection strengths')
    experiment_options(sweep)
    sweep.add_argument('--beta-c', type=_float_list, default=list(SWEEP_BETA_C), help='Comma separated beta_C values')
    sweep.add_argument('--beta-s', type=_float_list, default=list(SWEEP_BETA_S), help='Comma separated beta_S values')
    sweep.set_defaults(handler=cmd_sweep)

    idcheck = sub.add_parser('idcheck', help='Check the identifiability condition for two parametric models')
    idcheck.add_argument('input', help='JSON with "P" and "Q" tuples')
    idcheck.add_argument('--external', action='store_true', help='Accept external unbiased x-marginal differences')
    idcheck.add_argument('-o', '--output', default=None, help='Write the JSON report here instead of stdout')
    idcheck.set_defaults(handler=cmd_idcheck)

    dagcheck = sub.add_parser('dagcheck', help='Evaluate graphical criteria on an edge-list DAG')
    dagcheck.add_argument('file', help='Edge-list file')
    dagcheck.add_argument('--table1', action='store_true', help='Classify a four-node X/T/Y/S graph')
    dagcheck.add_argument('--criterion', choices=Criterion.ALL, default=None, help='Criterion to evaluate')
    dagcheck.add_argument('--z', default='', help='Comma separated adjustment set')
    dagcheck.add_argument('--pretty', action='store_true', help='Human readable criterion output instead of JSON')
    dagcheck.set_defaults(handler=cmd_dagcheck)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI"""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (ConfigError, DagParseError) as exc:
        print(f"{Color.RED}Error: {exc}{Color.NC}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"{Color.RED}Estimation failed: {exc}{Color.NC}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"{Color.RED}Error: {exc}{Color.NC}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        print(f"\n{Color.YELLOW}Interrupted{Color.NC}")
        return EXIT_INTERRUPTED


if __name__ == '__main__':
    sys.exit(main())
