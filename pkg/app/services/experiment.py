"""
End-to-end experiments: per trial, generate a graph, solve it directly and
through the offline or streaming core-set pipeline, and compare the values
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Tuple, Union

from app.errors import GraphFormatError
from app.models import (
    ExperimentConfig,
    ExperimentReport,
    ExperimentRow,
    Pipeline,
    Problem,
    TrialTiming,
)
from app.services.common import derive_seed
from app.services.graph import AnyGraph, gen_planted_cc, gen_random_graph, to_stream
from app.services.pipeline import offline_pipeline, solve_value
from app.services.streaming import two_pass_run

logger = logging.getLogger(__name__)

STREAM_ORDER_SALT = 3


def value_ratio(pipeline: float, baseline: float) -> float:
    if baseline > 0:
        return pipeline / baseline
    return 1.0 if pipeline == 0 else math.nan


def trial_graph(config: ExperimentConfig, seed: int) -> AnyGraph:
    if config.problem == Problem.CC:
        return gen_planted_cc(config.n, config.clusters, config.noise, seed)
    return gen_random_graph(config.n, config.delta_exp, seed)


def run_trial(config: ExperimentConfig, trial: int) -> Tuple[ExperimentRow, TrialTiming]:
    seed = derive_seed(config.rng_seed, trial)
    g = trial_graph(config, seed)

    started = time.perf_counter()
    baseline = solve_value(
        g, config.solver, seed, k=config.clusters, restarts=config.restarts, epsilon=config.epsilon
    )
    baseline_seconds = time.perf_counter() - started

    started = time.perf_counter()
    if config.pipeline == Pipeline.STREAMING:
        stream = to_stream(g, config.stream_order, derive_seed(seed, STREAM_ORDER_SALT))
        report = two_pass_run(
            stream, g.n, g.avg_degree, config.epsilon, config.solver, seed,
            problem=config.problem, k=config.clusters, c_const=config.c_const, restarts=config.restarts,
        )
        value, vertices, edges, stored = (
            report.value, report.coreset_vertices, report.coreset_edges, report.stored_items
        )
    else:
        coreset, value = offline_pipeline(
            g, config.epsilon, config.solver, seed, c_const=config.c_const,
            k=config.clusters, restarts=config.restarts, edge_sampling=config.edge_sampling,
        )
        vertices, edges, stored = coreset.n, coreset.m, coreset.n + coreset.m
    pipeline_seconds = time.perf_counter() - started

    row = ExperimentRow(
        trial=trial,
        seed=seed,
        coreset_vertices=vertices,
        coreset_edges=edges,
        baseline_value=float(baseline),
        pipeline_value=float(value),
        ratio=value_ratio(value, baseline),
        stored_items=stored,
    )
    logger.info(
        "trial %d (seed=%d): baseline %.6g, %s %.6g, ratio %.4f, |S|=%d",
        trial, seed, baseline, config.pipeline.value, value, row.ratio, vertices,
    )
    return row, TrialTiming(trial=trial, baseline_seconds=baseline_seconds, pipeline_seconds=pipeline_seconds)


class ExperimentService:
    def run(self, config: ExperimentConfig) -> ExperimentReport:
        """All trials, ordered by trial index whatever the completion order"""
        logger.info(
            "experiment: %s %s n=%d trials=%d seed=%d",
            config.problem.value, config.pipeline.value, config.n, config.trials, config.rng_seed,
        )
        trials = list(range(config.trials))
        if config.workers > 1 and config.trials > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(run_trial, [config] * len(trials), trials))
        else:
            results = [run_trial(config, t) for t in trials]
        results.sort(key=lambda pair: pair[0].trial)
        rows = [row for row, _ in results]
        return ExperimentReport(
            config=config,
            rows=rows,
            timings=[timing for _, timing in results],
            aggregate=ExperimentReport.aggregate_rows(rows),
        )

    def write_report(self, report: ExperimentReport, path: Union[str, Path]) -> List[Path]:
        """JSON report at path and the rows as CSV next to it"""
        path = Path(path)
        csv_path = path.with_suffix(".csv")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            csv_path.write_text(report.rows_csv(), encoding="utf-8")
        except OSError as e:
            raise GraphFormatError(f"cannot write report {path}: {e}")
        return [path, csv_path]


experiment_service = ExperimentService()
