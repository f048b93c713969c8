"""Orchestration: expand plans, run detectors, time them, evaluate, emit.

A run crosses datasets x schemas x detectors x criteria. Detector scoring
is wall-clock timed; metric evaluation is pure, so ``results.json`` is
byte-identical no matter how many workers execute the tasks. Everything
wall-clock-dependent lives in ``runtime.csv`` only.

Outputs under the chosen directory::

    results.json            full metric rows, aggregates, exclusions, failures
    scores/<ds>/<schema>/<detector>/<curve>.csv   raw score dumps
    tables/<criterion>.csv  detectors ranked by mean dataset f1_best
    runtime.csv             fit/inference seconds, per-sample time, parameters
    plotdata/tradeoff.csv   inference time vs mean score vs parameter size

Per-task problems (insufficient data, external-detector errors, bad score
arrays) are recorded as failures and never abort the run; only config and
dataset errors do.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import detectors as det
from .core import ScoreSeries, TimeSeries, validate_scores
from .datasets import DatasetManifest, filter_anomaly_free, load_dataset, resolve_k_delay
from .errors import (
    ConfigError,
    DatasetError,
    EmptyDataset,
    TooFewSeries,
    TsadError,
)
from .extern import ExternalDetectorSpec, drive
from .metrics import EvalCriterion, MetricReport, aggregate, evaluate_curve
from .schemas import SCHEMAS, BenchmarkPlan, Task, build_plan

EXCLUDED_ANOMALY_FREE = "anomaly_free_test"
EXCLUDED_POOLING = "statistical_pooling_unsupported"


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[str, ...]
    detectors: tuple[det.DetectorConfig | ExternalDetectorSpec, ...]
    schemas: tuple[str, ...] = ("naive",)
    criteria: tuple[EvalCriterion, ...] = (EvalCriterion(),)
    k_delay_overrides: Mapping[str, int | None] = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    allow_statistical_pooling: bool = False

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("need at least one dataset")
        if not self.detectors:
            raise ConfigError("need at least one detector")
        if not self.schemas:
            raise ConfigError("need at least one schema")
        if not self.criteria:
            raise ConfigError("need at least one criterion")
        for schema in self.schemas:
            if schema not in SCHEMAS:
                raise ConfigError(f"unknown schema {schema!r}")
        names = [_detector_name(d) for d in self.detectors]
        if len(set(names)) != len(names):
            raise ConfigError(f"detector names must be unique, got {names}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def echo(self) -> dict:
        """Config as recorded in results.json.

        Execution-only knobs (worker count) are omitted so reruns with
        different parallelism produce byte-identical reports.
        """
        return {
            "datasets": list(self.datasets),
            "detectors": [_detector_echo(d) for d in self.detectors],
            "schemas": list(self.schemas),
            "criteria": [c.to_dict() for c in self.criteria],
            "k_delay_overrides": dict(self.k_delay_overrides),
            "seed": self.seed,
            "allow_statistical_pooling": self.allow_statistical_pooling,
        }


def _detector_name(d) -> str:
    return d.display_name if isinstance(d, det.DetectorConfig) else d.name


def _detector_echo(d) -> dict:
    if isinstance(d, det.DetectorConfig):
        return {
            "kind": d.kind,
            "name": _detector_name(d),
            "window": d.window,
            "neighbors": d.neighbors,
            "ridge": d.ridge,
        }
    return {
        "kind": "external",
        "name": d.name,
        "command": list(d.command),
        "startup_timeout": d.startup_timeout,
        "message_timeout": d.message_timeout,
    }


def parse_run_config(doc: Mapping) -> RunConfig:
    """Parse and validate the run config JSON document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a JSON object")
    known = {
        "datasets", "detectors", "schemas", "criteria", "k_delay_overrides",
        "seed", "workers", "allow_statistical_pooling",
    }
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config fields {sorted(extra)}")

    detector_list = []
    for entry in doc.get("detectors", []):
        if not isinstance(entry, Mapping) or "kind" not in entry:
            raise ConfigError(f"detector entries need a kind: {entry!r}")
        if entry["kind"] == "external":
            if "command" not in entry or not entry["command"]:
                raise ConfigError("external detector needs a command list")
            detector_list.append(
                ExternalDetectorSpec(
                    command=tuple(entry["command"]),
                    name=entry.get("name", "external"),
                    startup_timeout=entry.get("startup_timeout", 30.0),
                    message_timeout=entry.get("message_timeout", 300.0),
                )
            )
        else:
            fields = {k: entry[k] for k in ("kind", "window", "neighbors", "ridge", "name") if k in entry}
            detector_list.append(det.DetectorConfig(**fields))

    criteria = [
        EvalCriterion.from_dict(c) for c in doc.get("criteria", [{"variant": "reduced_length_pa"}])
    ]
    overrides = doc.get("k_delay_overrides", {})
    if not isinstance(overrides, Mapping):
        raise ConfigError("k_delay_overrides must be an object")
    return RunConfig(
        datasets=tuple(doc.get("datasets", ())),
        detectors=tuple(detector_list),
        schemas=tuple(doc.get("schemas", ("naive",))),
        criteria=tuple(criteria),
        k_delay_overrides=dict(overrides),
        seed=doc.get("seed", 0),
        workers=doc.get("workers", 1),
        allow_statistical_pooling=doc.get("allow_statistical_pooling", False),
    )


@dataclass(frozen=True)
class MetricRow:
    dataset: str
    curve: str
    detector: str
    schema: str
    criterion: str
    k_delay: int | None
    report: MetricReport

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "curve": self.curve,
            "detector": self.detector,
            "schema": self.schema,
            "criterion": self.criterion,
            "k_delay": self.k_delay,
            "f1_best": self.report.f1_best,
            "best_threshold": _json_float(self.report.best_threshold),
            "precision_at_best": self.report.precision_at_best,
            "recall_at_best": self.report.recall_at_best,
            "auprc": self.report.auprc,
        }


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class RuntimeStat:
    fit_seconds: float = 0.0
    inference_seconds: float = 0.0
    scored_samples: int = 0
    parameter_count: int = 0
    store_size: int = 0

    @property
    def per_sample_seconds(self) -> float:
        if self.scored_samples == 0:
            return 0.0
        return self.inference_seconds / self.scored_samples


@dataclass
class RunReport:
    config_echo: dict
    rows: list[MetricRow] = field(default_factory=list)
    exclusions: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    runtime: dict[tuple[str, str], RuntimeStat] = field(default_factory=dict)

    def sorted_rows(self) -> list[MetricRow]:
        return sorted(
            self.rows,
            key=lambda r: (r.dataset, r.curve, r.detector, r.schema, r.criterion),
        )

    def aggregates(self) -> tuple[list[dict], list[dict]]:
        """Dataset-level and overall means per (detector, schema, criterion)."""
        grouped: dict[tuple[str, str, str], dict[str, list[MetricReport]]] = {}
        for row in self.rows:
            key = (row.detector, row.schema, row.criterion)
            grouped.setdefault(key, {}).setdefault(row.dataset, []).append(row.report)
        per_dataset = []
        overall = []
        for key in sorted(grouped):
            detector, schema, criterion = key
            ds_scores, total = aggregate(grouped[key])
            for ds in ds_scores:
                per_dataset.append(
                    {
                        "detector": detector,
                        "schema": schema,
                        "criterion": criterion,
                        "dataset": ds.dataset,
                        "f1_best_mean": ds.f1_best_mean,
                        "auprc_mean": ds.auprc_mean,
                        "curve_count": ds.curve_count,
                    }
                )
            overall.append(
                {
                    "detector": detector,
                    "schema": schema,
                    "criterion": criterion,
                    "f1_best_mean": total.f1_best_mean,
                    "auprc_mean": total.auprc_mean,
                    "dataset_count": total.dataset_count,
                }
            )
        return per_dataset, overall

    def to_results_doc(self) -> dict:
        per_dataset, overall = self.aggregates()
        return {
            "schema_version": 1,
            "config": self.config_echo,
            "metrics": [r.to_dict() for r in self.sorted_rows()],
            "aggregates": {"per_dataset": per_dataset, "overall": overall},
            "exclusions": sorted(
                self.exclusions,
                key=lambda e: (
                    e["dataset"], e["curve"], e.get("detector", ""), e.get("schema", ""),
                ),
            ),
            "failures": sorted(
                self.failures,
                key=lambda f: (
                    f["dataset"], f["schema"], f["detector"], ",".join(f["curves"]),
                ),
            ),
        }


@dataclass
class _TaskOutcome:
    scores: list[tuple[str, np.ndarray]]
    fit_seconds: float
    inference_seconds: float
    scored_samples: int
    parameter_count: int
    store_size: int


def _pool_values(task: Task, series_by_id: Mapping[str, TimeSeries]) -> list[np.ndarray]:
    return [
        series_by_id[sid].values[start:end] for sid, (start, end) in task.train_refs
    ]


def _run_builtin_task(
    config: det.DetectorConfig,
    task: Task,
    series_by_id: Mapping[str, TimeSeries],
) -> _TaskOutcome:
    t0 = time.perf_counter()
    fitted = det.fit(config, _pool_values(task, series_by_id))
    fit_seconds = time.perf_counter() - t0
    scores = []
    inference = 0.0
    samples = 0
    for sid, (start, end) in task.eval_refs:
        series = series_by_id[sid]
        context = series.values[:start]
        test = series.values[start:end]
        t1 = time.perf_counter()
        arr = det.score(fitted, context, test)
        inference += time.perf_counter() - t1
        scored = ScoreSeries(series_id=sid, scores=arr)
        validate_scores(scored, series)
        scores.append((sid, scored.scores))
        samples += len(test)
    return _TaskOutcome(
        scores=scores,
        fit_seconds=fit_seconds,
        inference_seconds=inference,
        scored_samples=samples,
        parameter_count=fitted.count_parameters(),
        store_size=fitted.store_size,
    )


def _run_external_task(
    spec: ExternalDetectorSpec,
    task: Task,
    series_by_id: Mapping[str, TimeSeries],
) -> _TaskOutcome:
    t0 = time.perf_counter()
    results = drive(spec, task, series_by_id)
    elapsed = time.perf_counter() - t0
    samples = sum(len(r) for r in results)
    return _TaskOutcome(
        scores=[(r.series_id, r.scores) for r in results],
        fit_seconds=0.0,  # external processes are timed end to end
        inference_seconds=elapsed,
        scored_samples=samples,
        parameter_count=0,
        store_size=0,
    )


def _dump_scores(
    out_dir: str,
    dataset: str,
    schema: str,
    detector: str,
    curve: str,
    test_start: int,
    scores: np.ndarray,
) -> None:
    directory = os.path.join(out_dir, "scores", dataset, schema, detector)
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{curve}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,score\n")
        for j, v in enumerate(scores.tolist()):
            fh.write(f"{test_start + j},{v!r}\n")


def run(config: RunConfig, output_dir: str) -> RunReport:
    """Execute the full benchmark and write score dumps under output_dir."""
    report = RunReport(config_echo=config.echo())
    os.makedirs(output_dir, exist_ok=True)

    loaded: list[tuple[str, list[TimeSeries], DatasetManifest]] = []
    seen_names = set()
    for root in config.datasets:
        series, manifest = load_dataset(root)
        if manifest.name in seen_names:
            raise DatasetError(f"duplicate dataset name {manifest.name!r}")
        seen_names.add(manifest.name)
        loaded.append((root, series, manifest))

    for _root, series, manifest in loaded:
        kept, excluded = filter_anomaly_free(series)
        for cid in excluded:
            report.exclusions.append(
                {"dataset": manifest.name, "curve": cid, "reason": EXCLUDED_ANOMALY_FREE}
            )
        if not kept:
            continue
        series_by_id = {s.id: s for s in kept}

        for schema in config.schemas:
            try:
                plan = build_plan(schema, kept, config.seed)
            except (TooFewSeries, EmptyDataset) as exc:
                report.failures.append(
                    {
                        "dataset": manifest.name,
                        "schema": schema,
                        "detector": "*",
                        "curves": sorted(series_by_id),
                        "error": type(exc).__name__,
                        "message": str(exc),
                    }
                )
                continue
            for detector in config.detectors:
                name = _detector_name(detector)
                builtin = isinstance(detector, det.DetectorConfig)
                if (
                    builtin
                    and schema != "naive"
                    and not detector.supports_pooling
                    and not config.allow_statistical_pooling
                ):
                    for task in plan.tasks:
                        for sid, _region in task.eval_refs:
                            report.exclusions.append(
                                {
                                    "dataset": manifest.name,
                                    "curve": sid,
                                    "detector": name,
                                    "schema": schema,
                                    "reason": EXCLUDED_POOLING,
                                }
                            )
                    continue
                _run_detector(
                    config, report, manifest, series_by_id, plan, detector, output_dir
                )
    return report


def _run_detector(
    config: RunConfig,
    report: RunReport,
    manifest: DatasetManifest,
    series_by_id: Mapping[str, TimeSeries],
    plan: BenchmarkPlan,
    detector,
    output_dir: str,
) -> None:
    name = _detector_name(detector)
    builtin = isinstance(detector, det.DetectorConfig)
    runner = _run_builtin_task if builtin else _run_external_task

    def job(task: Task):
        return runner(detector, task, series_by_id)

    outcomes: list[tuple[Task, _TaskOutcome | TsadError]] = []
    if config.workers > 1 and len(plan.tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(job, task) for task in plan.tasks]
            for task, future in zip(plan.tasks, futures):
                try:
                    outcomes.append((task, future.result()))
                except TsadError as exc:
                    outcomes.append((task, exc))
    else:
        for task in plan.tasks:
            try:
                outcomes.append((task, job(task)))
            except TsadError as exc:
                outcomes.append((task, exc))

    stat = report.runtime.setdefault((name, plan.schema), RuntimeStat())
    for task, outcome in outcomes:
        if isinstance(outcome, TsadError):
            report.failures.append(
                {
                    "dataset": manifest.name,
                    "schema": plan.schema,
                    "detector": name,
                    "curves": sorted(sid for sid, _ in task.eval_refs),
                    "error": type(outcome).__name__,
                    "message": str(outcome),
                }
            )
            continue
        stat.fit_seconds += outcome.fit_seconds
        stat.inference_seconds += outcome.inference_seconds
        stat.scored_samples += outcome.scored_samples
        stat.parameter_count = max(stat.parameter_count, outcome.parameter_count)
        stat.store_size = max(stat.store_size, outcome.store_size)
        for sid, arr in outcome.scores:
            series = series_by_id[sid]
            _dump_scores(
                output_dir, manifest.name, plan.schema, name,
                sid, series.test_start, arr,
            )
            _evaluate_into(
                report, config, manifest, plan.schema, name, sid,
                arr, series.test_labels(),
            )


def _evaluate_into(
    report: RunReport,
    config: RunConfig,
    manifest: DatasetManifest,
    schema: str,
    detector: str,
    curve: str,
    scores: np.ndarray,
    labels: np.ndarray,
) -> None:
    score_list = scores.tolist()
    label_list = labels.tolist()
    for criterion in config.criteria:
        k_eff = resolve_k_delay(
            config.k_delay_overrides, manifest.name, manifest, criterion.k_delay
        )
        result = evaluate_curve(score_list, label_list, criterion.with_k_delay(k_eff))
        report.rows.append(
            MetricRow(
                dataset=manifest.name,
                curve=curve,
                detector=detector,
                schema=schema,
                criterion=criterion.label,
                k_delay=k_eff,
                report=result,
            )
        )


def evaluate_scores(
    scores_root: str,
    dataset_root: str,
    criteria: Sequence[EvalCriterion],
    k_delay_overrides: Mapping[str, int | None] | None = None,
) -> RunReport:
    """Recompute metrics from score dumps without re-running detectors.

    Walks ``<scores_root>/<dataset>/<schema>/<detector>/<curve>.csv`` for
    the dataset named by the manifest; per-curve problems (truncated or
    non-finite dumps) are recorded as failures.
    """
    series, manifest = load_dataset(dataset_root)
    kept, _excluded = filter_anomaly_free(series)
    series_by_id = {s.id: s for s in kept}
    config = RunConfig(
        datasets=(dataset_root,),
        detectors=(det.DetectorConfig(kind="first_diff", name="_eval"),),
        criteria=tuple(criteria),
        k_delay_overrides=dict(k_delay_overrides or {}),
    )
    report = RunReport(
        config_echo={
            "datasets": [dataset_root],
            "criteria": [c.to_dict() for c in criteria],
            "k_delay_overrides": dict(k_delay_overrides or {}),
        }
    )
    ds_dir = os.path.join(scores_root, manifest.name)
    if not os.path.isdir(ds_dir):
        raise DatasetError(f"no score dumps for dataset {manifest.name!r} under {scores_root}")
    for schema in sorted(os.listdir(ds_dir)):
        schema_dir = os.path.join(ds_dir, schema)
        if not os.path.isdir(schema_dir):
            continue
        for detector in sorted(os.listdir(schema_dir)):
            det_dir = os.path.join(schema_dir, detector)
            if not os.path.isdir(det_dir):
                continue
            for fname in sorted(os.listdir(det_dir)):
                if not fname.endswith(".csv"):
                    continue
                curve = fname[: -len(".csv")]
                if curve not in series_by_id:
                    continue
                series_obj = series_by_id[curve]
                try:
                    arr = _load_score_dump(os.path.join(det_dir, fname))
                    scored = ScoreSeries(series_id=curve, scores=arr)
                    validate_scores(scored, series_obj)
                except TsadError as exc:
                    report.failures.append(
                        {
                            "dataset": manifest.name,
                            "schema": schema,
                            "detector": detector,
                            "curves": [curve],
                            "error": type(exc).__name__,
                            "message": str(exc),
                        }
                    )
                    continue
                _evaluate_into(
                    report, config, manifest, schema, detector, curve,
                    scored.scores, series_obj.test_labels(),
                )
    return report


def _load_score_dump(path: str) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != "index,score":
            raise DatasetError(f"{path}: expected 'index,score' header")
        for line in fh:
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DatasetError(f"{path}: malformed row {line!r}")
            values.append(float(parts[1]))
    return values


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def emit_reports(report: RunReport, output_dir: str) -> None:
    """Write results.json, ranked per-criterion tables, runtime and plot data."""
    doc = report.to_results_doc()
    if not doc["metrics"] and not doc["failures"] and not doc["exclusions"]:
        raise EmptyDataset("nothing to report")
    os.makedirs(output_dir, exist_ok=True)
    _write_json(os.path.join(output_dir, "results.json"), doc)
    write_tables(doc, os.path.join(output_dir, "tables"))
    _write_runtime_csv(report, os.path.join(output_dir, "runtime.csv"))
    _write_tradeoff_csv(report, doc, os.path.join(output_dir, "plotdata", "tradeoff.csv"))


def write_tables(results_doc: dict, tables_dir: str) -> None:
    """One CSV per criterion: rows are (detector, schema) ranked by the mean
    of their dataset-level f1_best scores, descending (name breaks ties)."""
    os.makedirs(tables_dir, exist_ok=True)
    per_dataset = results_doc["aggregates"]["per_dataset"]
    overall = results_doc["aggregates"]["overall"]
    criteria = sorted({entry["criterion"] for entry in overall})
    for criterion in criteria:
        datasets = sorted(
            {e["dataset"] for e in per_dataset if e["criterion"] == criterion}
        )
        rows = []
        for entry in overall:
            if entry["criterion"] != criterion:
                continue
            cells = {
                e["dataset"]: e["f1_best_mean"]
                for e in per_dataset
                if e["criterion"] == criterion
                and e["detector"] == entry["detector"]
                and e["schema"] == entry["schema"]
            }
            rows.append(
                (
                    -entry["f1_best_mean"],
                    entry["detector"],
                    entry["schema"],
                    cells,
                    entry["f1_best_mean"],
                )
            )
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        path = os.path.join(tables_dir, f"{criterion}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("detector,schema," + ",".join(datasets) + ",avg\n")
            for _neg, detector, schema, cells, avg in rows:
                cols = [
                    f"{cells[ds]:.6f}" if ds in cells else "" for ds in datasets
                ]
                fh.write(f"{detector},{schema}," + ",".join(cols) + f",{avg:.6f}\n")


def _write_runtime_csv(report: RunReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "detector,schema,fit_seconds,inference_seconds,scored_samples,"
            "per_sample_seconds,parameter_count,store_size\n"
        )
        for (detector, schema) in sorted(report.runtime):
            stat = report.runtime[(detector, schema)]
            fh.write(
                f"{detector},{schema},{stat.fit_seconds!r},"
                f"{stat.inference_seconds!r},{stat.scored_samples},"
                f"{stat.per_sample_seconds!r},{stat.parameter_count},"
                f"{stat.store_size}\n"
            )


def _write_tradeoff_csv(report: RunReport, results_doc: dict, path: str) -> None:
    """Plot-ready trade-off data: x = total inference seconds, y = mean
    score under the first configured criterion, size = cube root of the
    parameter count."""
    os.makedirs(os.path.dirname(path), exist_ok=True)
    criteria = results_doc["config"].get("criteria", [])
    first_label = None
    if criteria:
        first_label = EvalCriterion.from_dict(criteria[0]).label
    overall = {
        (e["detector"], e["schema"]): e["f1_best_mean"]
        for e in results_doc["aggregates"]["overall"]
        if first_label is None or e["criterion"] == first_label
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("detector,schema,inference_seconds,mean_score,parameter_count,size\n")
        for (detector, schema) in sorted(report.runtime):
            if (detector, schema) not in overall:
                continue
            stat = report.runtime[(detector, schema)]
            size = stat.parameter_count ** (1.0 / 3.0)
            fh.write(
                f"{detector},{schema},{stat.inference_seconds:.6f},"
                f"{overall[(detector, schema)]:.6f},{stat.parameter_count},"
                f"{size:.6f}\n"
            )
