"""
Output formatting and reporting
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import matplotlib
matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .estimators.registry import display_name  # noqa: E402
from .graphcrit import CriterionReport, Table1Class  # noqa: E402
from .model import RunReport, RunRow, SummaryRow  # noqa: E402
from .utils import Color, format_mean_std  # noqa: E402

CSV_COLUMNS = ["seed", "method", "estimate", "error", "runtime_sec"]
SVG_HASH_SALT = "selate"


def _rule() -> None:
    print(f"{Color.BOLD}{'─' * 60}{Color.NC}")


def atomic_write(path: Union[str, Path], write: Callable[[Path], None]) -> None:
    """Write through a temp file in the same directory, then rename over path"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        os.close(handle)
        try:
            write(Path(tmp_name))
            os.replace(tmp_name, path)
        finally:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror or exc}") from exc


def print_summary(summary: List[SummaryRow], report: RunReport):
    """
    Print the per-method error table.

    Args:
        summary: Rows from experiment.summarize
        report: The report they were computed from (oracle ATE, hash)
    """
    print(f"\n{Color.BOLD}{'─' * 60}{Color.NC}")
    print(f"{Color.BOLD}ATE Error Summary{Color.NC}")
    _rule()
    print(f"  Oracle ATE:  {Color.CYAN}{report.oracle_ate:.4f}{Color.NC}")
    print(f"  Config hash: {Color.DIM}{report.config_hash[:12]}{Color.NC}")
    print()
    print(f"  {'method':<16}{'mean (std)':>20}{'seeds':>8}{'failed':>8}")
    for row in summary:
        if row.n == 0:
            color = Color.RED
        elif abs(row.mean_error) < 0.5:
            color = Color.GREEN
        else:
            color = Color.YELLOW
        cell = format_mean_std(row.mean_error, row.std_error)
        note = f" {Color.DIM}(single seed){Color.NC}" if row.single_seed else ""
        failed = f"{Color.RED}{row.n_failed}{Color.NC}" if row.n_failed else "0"
        print(f"  {display_name(row.method):<16}{color}{cell:>20}{Color.NC}{row.n:>8}{failed:>8}{note}")
    _rule()


def print_selection_stats(report: RunReport):
    """Print kept counts per seed"""
    if not report.selection_counts:
        return
    print(f"\n{Color.BOLD}Selection{Color.NC}")
    for seed, counts in report.selection_counts.items():
        total = counts.get("total", 0)
        kept = counts.get("kept", 0)
        share = kept / total if total else 0.0
        overlap = counts.get("overlap_b")
        overlap_str = f", overlap {Color.CYAN}{overlap}{Color.NC}" if overlap is not None else ""
        print(f"  seed {seed}: kept {Color.CYAN}{kept}{Color.NC}/{total} "
              f"({share:.1%}), deterministic stage {counts.get('passed_deterministic', 0)}{overlap_str}")


def print_failures(report: RunReport):
    failed = [row for row in report.rows if row.failed]
    for row in failed:
        print(f"  {Color.RED}✗{Color.NC} seed {row.seed} {display_name(row.method)}: "
              f"{Color.DIM}{row.message}{Color.NC}")


def sweep_table(reports: Dict[Tuple[float, float], RunReport],
                summaries: Dict[Tuple[float, float], List[SummaryRow]]) -> str:
    """Methods as rows, (beta_c, beta_s) grid points as columns, 'mean (std)' cells"""
    points = list(reports.keys())
    methods: List[str] = []
    for key in points:
        for method in reports[key].methods:
            if method not in methods:
                methods.append(method)
    header = ["method"] + [f"C{c:g}/S{s:g}" for c, s in points]
    lines = [header]
    for method in methods:
        cells = [display_name(method)]
        for key in points:
            row = next((r for r in summaries[key] if r.method == method), None)
            cells.append(format_mean_std(row.mean_error, row.std_error) if row else "n/a")
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return "\n".join("  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
                     for line in lines)


def print_criterion(report: CriterionReport):
    icon, color = ("✓", Color.GREEN) if report.holds else ("✗", Color.RED)
    z = ", ".join(report.z) or "∅"
    print(f"{color}{Color.BOLD}{icon} {report.criterion}{Color.NC} with Z = {{{z}}}")
    if not report.holds:
        print(f"  failed clause: {Color.YELLOW}{report.failed_clause}{Color.NC}")
        if report.witness_path:
            print(f"  witness path:  {Color.CYAN}{' - '.join(report.witness_path)}{Color.NC}")


def print_table1(result: Table1Class):
    parents = ", ".join(result.selection_parents)
    print(f"{Color.BOLD}S child of {parents}{Color.NC}")
    print(f"  DAG framework: {Color.CYAN}{result.dag_framework}{Color.NC}")
    print(f"  S-id:          {Color.CYAN}{result.s_id}{Color.NC}")


def emit_csv(report: RunReport, path: Union[str, Path],
             summary: Sequence[SummaryRow] = ()) -> Path:
    """
    Write the report CSV and its <stem>.json sidecar (oracle ATE, config hash,
    summary, row messages). Both files are replaced atomically.
    """
    path = Path(path)
    frame = pd.DataFrame([[r.seed, r.method, r.estimate, r.error, r.runtime_sec] for r in report.rows],
                         columns=CSV_COLUMNS)
    atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format="%.17g", na_rep="nan"))

    sidecar = {
        "oracle_ate": report.oracle_ate,
        "config_hash": report.config_hash,
        "summary": [{"method": s.method, "mean_error": s.mean_error, "std_error": s.std_error,
                     "n": s.n, "n_failed": s.n_failed, "single_seed": s.single_seed}
                    for s in summary],
        "messages": [{"seed": r.seed, "method": r.method, "message": r.message}
                     for r in report.rows if r.message],
        "selection": {str(seed): counts for seed, counts in report.selection_counts.items()},
    }
    atomic_write(path.with_suffix(".json"),
                  lambda tmp: tmp.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8"))
    return path


def load_csv(path: Union[str, Path]) -> RunReport:
    """Read a report CSV (and its sidecar, when present) back into a RunReport"""
    path = Path(path)
    frame = pd.read_csv(path, dtype={"method": str})
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {', '.join(missing)}")
    report = RunReport(rows=[RunRow(seed=int(r.seed), method=str(r.method), estimate=float(r.estimate),
                                    error=float(r.error), runtime_sec=float(r.runtime_sec))
                             for r in frame.itertuples(index=False)])
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        report.oracle_ate = float(data.get("oracle_ate", float("nan")))
        report.config_hash = data.get("config_hash", "")
        messages = {(m["seed"], m["method"]): m["message"] for m in data.get("messages", [])}
        for row in report.rows:
            row.message = messages.get((row.seed, row.method), "")
        report.selection_counts = {int(k): v for k, v in data.get("selection", {}).items()}
    return report


def emit_boxplot_svg(report: RunReport, path: Union[str, Path]) -> Path:
    """
    One box per method over the seed-wise errors (estimate - oracle ATE),
    whiskers at 1.5 IQR, with a horizontal zero-error line. Each box carries
    the SVG id box_<method>.
    """
    path = Path(path)
    methods = [m for m in report.methods if np.isfinite(report.errors_for(m)).any()]
    data = [report.errors_for(m)[np.isfinite(report.errors_for(m))] for m in methods]

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig = Figure(figsize=(max(4.0, 1.2 * len(methods) + 1.5), 4.5))
        ax = fig.add_subplot()
        if methods:
            boxes = ax.boxplot(data, whis=1.5, patch_artist=True)
            for method, box in zip(methods, boxes["boxes"]):
                box.set_gid(f"box_{method}")
                box.set_facecolor("#cfe0f3")
            ax.set_xticks(range(1, len(methods) + 1))
            ax.set_xticklabels([display_name(m) for m in methods])
        zero = ax.axhline(0.0, color="#b22222", linestyle="--", linewidth=1.0,
                          label="zero error (estimate = oracle ATE)")
        zero.set_gid("zero_line")
        ax.set_ylabel("error = estimate - oracle ATE")
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        atomic_write(path, lambda tmp: fig.savefig(tmp, format="svg", metadata={"Date": None}))
    return path
