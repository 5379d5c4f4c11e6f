"""
Benchmark orchestration: seeds x methods, summaries and selection sweeps
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch

from .config import ExperimentConfig, config_hash
from .datagen import generate_population, oracle_ate
from .errors import EstimationError, SelateError
from .estimators import EstimationContext, create_estimator, resolve_methods
from .model import Method, RunReport, RunRow, SummaryRow
from .propensity import fit_propensity, overlap_filter
from .rng import new_rng
from .selection import SigmoidForm, apply_selection

logger = logging.getLogger(__name__)

SWEEP_BETA_C = (1.0, 3.0, 5.0)
SWEEP_BETA_S = (0.1, 0.5, 1.0)

# Errors a single method may raise without aborting the run
RECOVERABLE = (SelateError, FloatingPointError, ValueError, np.linalg.LinAlgError)


def _init_worker() -> None:
    torch.set_num_threads(1)


def _failed_row(seed: int, method: str, message: str) -> RunRow:
    return RunRow(seed=seed, method=method, estimate=math.nan, error=math.nan, message=message)


def run_seed(cfg: ExperimentConfig, seed: int, oracle: float) -> Tuple[List[RunRow], Dict[str, int]]:
    """
    One replicate: generate, select, fit the propensity, trim to overlap and
    run every requested method. Failures become NaN rows.
    """
    population = generate_population(cfg.population.with_seed(seed))
    observed, selection = apply_selection(population, cfg.selection, new_rng(seed).spawn("selection"))
    counts = {"total": selection.total, "passed_deterministic": selection.passed_deterministic,
              "kept": selection.kept}

    prop_model, regions, prop_error = None, None, ""
    try:
        prop_model = fit_propensity(observed, cfg.propensity.folds, cfg.propensity, seed=seed)
        regions = overlap_filter(observed, prop_model, cfg.c)
        counts["overlap_b"] = int(regions.b_indices.size)
    except RECOVERABLE as exc:
        prop_error = str(exc)
        logger.warning("seed %d: propensity failed: %s", seed, exc)

    context = EstimationContext(observed=observed, prop_model=prop_model, regions=regions,
                                settings=cfg.estimators, seed=seed, population=population,
                                selection_mask=selection.mask, propensity_config=cfg.propensity)
    rows = []
    for method in cfg.methods:
        start = time.perf_counter()
        try:
            if prop_model is None and method != Method.HECKMAN:
                raise EstimationError(prop_error or "propensity model unavailable")
            estimate = create_estimator(method, cfg.estimators).run(context)
        except RECOVERABLE as exc:
            logger.warning("seed %d: %s failed: %s", seed, method, exc)
            rows.append(_failed_row(seed, method, str(exc)))
            continue
        runtime = time.perf_counter() - start if cfg.record_timing else 0.0
        rows.append(RunRow(seed=seed, method=method, estimate=estimate.value,
                           error=estimate.value - oracle, runtime_sec=runtime,
                           message=",".join(estimate.flags)))
        logger.debug("seed %d: %s = %.4f (%s)", seed, method, estimate.value,
                     ", ".join(estimate.flags) or "no flags")
    return rows, counts


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunReport:
    """
    Run every (seed, method) pair. Seeds may run in parallel worker
    processes; rows keep the configured seed and method order.
    """
    cfg.validate()
    resolve_methods(cfg.methods)
    oracle = oracle_ate(cfg.population, cfg.n_mc)
    logger.info("oracle ATE %.6f over %d Monte Carlo draws", oracle, cfg.n_mc)

    seeds = list(cfg.seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker) as pool:
            results = list(pool.map(run_seed, [cfg] * len(seeds), seeds, [oracle] * len(seeds)))
    else:
        results = [run_seed(cfg, seed, oracle) for seed in seeds]

    report = RunReport(oracle_ate=oracle, config_hash=config_hash(cfg))
    for seed, (rows, counts) in zip(seeds, results):
        report.rows.extend(rows)
        report.selection_counts[seed] = counts
    return report


def summarize(report: RunReport) -> List[SummaryRow]:
    """Per-method mean and sample standard deviation of the error over seeds"""
    summary = []
    for method in report.methods:
        errors = report.errors_for(method)
        finite = errors[np.isfinite(errors)]
        n_failed = int(errors.size - finite.size)
        if finite.size == 0:
            summary.append(SummaryRow(method, math.nan, math.nan, 0, n_failed))
            continue
        single = finite.size == 1
        std = 0.0 if single else float(np.std(finite, ddof=1))
        summary.append(SummaryRow(method, float(np.mean(finite)), std, int(finite.size),
                                  n_failed, single_seed=single))
    return summary


def run_sweep(cfg: ExperimentConfig, beta_c_values: Sequence[float] = SWEEP_BETA_C,
              beta_s_values: Sequence[float] = SWEEP_BETA_S,
              jobs: int = 1) -> Dict[Tuple[float, float], RunReport]:
    """Repeat the experiment over a grid of outcome-covariate selection strengths"""
    reports = {}
    for beta_c in beta_c_values:
        for beta_s in beta_s_values:
            point = cfg.with_selection(sig_form=SigmoidForm.OUTCOME_COVARIATE,
                                       beta_c=float(beta_c), beta_s=float(beta_s))
            logger.info("sweep point beta_c=%g beta_s=%g", beta_c, beta_s)
            reports[(float(beta_c), float(beta_s))] = run_experiment(point, jobs=jobs)
    return reports


def failed_methods(report: RunReport) -> List[str]:
    """Methods whose every row failed"""
    return [m for m in report.methods
            if all(row.failed for row in report.rows if row.method == m)]
