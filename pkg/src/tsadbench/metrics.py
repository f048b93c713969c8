"""Evaluation engine: adjustment criteria, threshold sweep, aggregation.

Three criteria are implemented on top of a shared segment model:

* ``point_wise_pa``: every point of a true segment inherits the segment's
  best in-window score, then TP/FP/FN are counted per point.
* ``event_wise_pa``: each true segment counts once (TP if detected, FN
  otherwise); each maximal alarm run fully outside all segments counts
  once as FP.
* ``reduced_length_pa``: event-wise counting where a segment of original
  length k contributes ln(k + e) and a false-alarm run of length j
  contributes ln(j + e).

All criteria honor an optional detection-latency limit K (an event only
counts as detected if some alarm lands within K points of segment onset,
offset 0 = onset itself) and segment prolonging by L points, which
tolerates post-anomaly score lag without rewarding it.

Scores are compared with ``>=`` against thresholds. The sweep used by
``best_f1`` and ``auprc`` evaluates every unique score value incrementally
(activating points from the highest score down and maintaining alarm runs
with endpoint links); it is exactly equal to re-evaluating
``confusion_at_threshold`` per unique threshold, which the tests enforce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .core import AnomalySegment, extract_segments
from .errors import ConfigError, EmptyDataset, NoPositiveEvents

_E = math.e
_LOG = math.log

VARIANTS = ("point_wise_pa", "event_wise_pa", "reduced_length_pa")
DEFAULT_PROLONG = 9


@dataclass(frozen=True)
class EvalCriterion:
    """A fully specified evaluation configuration."""

    variant: str = "reduced_length_pa"
    k_delay: int | None = None
    prolong_len: int = DEFAULT_PROLONG

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown criterion variant {self.variant!r}")
        if self.k_delay is not None and self.k_delay < 0:
            raise ConfigError("k_delay must be >= 0")
        if self.prolong_len < 0:
            raise ConfigError("prolong_len must be >= 0")

    @property
    def label(self) -> str:
        k = f"_K{self.k_delay}" if self.k_delay is not None else ""
        return f"{self.variant}{k}_L{self.prolong_len}"

    def with_k_delay(self, k_delay: int | None) -> "EvalCriterion":
        return replace(self, k_delay=k_delay)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "k_delay": self.k_delay,
            "prolong_len": self.prolong_len,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalCriterion":
        known = {"variant", "k_delay", "prolong_len"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown criterion fields {sorted(extra)}")
        return cls(
            variant=d.get("variant", "reduced_length_pa"),
            k_delay=d.get("k_delay"),
            prolong_len=d.get("prolong_len", DEFAULT_PROLONG),
        )


def parse_criterion(spec: str) -> EvalCriterion:
    """Parse a CLI criterion spec like ``reduced_length_pa:k=3:l=9``."""
    parts = spec.split(":")
    variant = parts[0].strip()
    k_delay = None
    prolong = DEFAULT_PROLONG
    for part in parts[1:]:
        key, _, value = part.partition("=")
        key = key.strip().lower()
        try:
            if key == "k":
                k_delay = int(value)
            elif key == "l":
                prolong = int(value)
            else:
                raise ConfigError(f"unknown criterion option {key!r} in {spec!r}")
        except ValueError as exc:
            raise ConfigError(f"bad criterion option {part!r} in {spec!r}") from exc
    return EvalCriterion(variant=variant, k_delay=k_delay, prolong_len=prolong)


@dataclass(frozen=True)
class WeightedConfusion:
    """Real-valued confusion counts produced by the event-based criteria."""

    tp: float
    fp: float
    fn: float

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class MetricReport:
    f1_best: float
    best_threshold: float
    precision_at_best: float
    recall_at_best: float
    auprc: float
    criterion: EvalCriterion


@dataclass(frozen=True)
class ExtendedSegment:
    """A true segment after prolonging; keeps the original end so severity
    weighting always uses the pre-extension length."""

    start: int
    end: int
    orig_end: int

    @property
    def orig_length(self) -> int:
        return self.orig_end - self.start + 1


def prolong_segments(
    segments: Sequence[AnomalySegment], prolong_len: int, n: int
) -> list[ExtendedSegment]:
    """Extend each segment's end by up to ``prolong_len`` points.

    The extended end is min(end + L, next_start - 1, n - 1): extensions
    never merge two events and never leave the series.
    """
    if prolong_len < 0:
        raise ValueError("prolong_len must be >= 0")
    out = []
    for i, seg in enumerate(segments):
        limit = segments[i + 1].start - 1 if i + 1 < len(segments) else n - 1
        end = min(seg.end + prolong_len, limit, n - 1)
        out.append(ExtendedSegment(start=seg.start, end=end, orig_end=seg.end))
    return out


def _as_list(scores) -> list[float]:
    if isinstance(scores, np.ndarray):
        return scores.tolist()
    if isinstance(scores, list):
        return scores
    return [float(v) for v in scores]


def _detect_window_end(seg: ExtendedSegment, k_delay: int | None) -> int:
    return seg.end if k_delay is None else min(seg.end, seg.start + k_delay)


def adjust_scores_pa(
    scores, segments: Sequence[ExtendedSegment], k_delay: int | None = None
) -> list[float]:
    """Point adjustment: propagate each segment's best score to all its points.

    Without a latency limit the propagated value is the maximum raw score
    inside the extended segment. With ``k_delay`` it is the maximum over
    the positions within K of onset, so a segment whose only alarms come
    too late is treated as missed everywhere.
    """
    out = _as_list(scores)[:]
    for seg in segments:
        hi = _detect_window_end(seg, k_delay)
        peak = max(out[seg.start : hi + 1]) if hi >= seg.start else -math.inf
        out[seg.start : seg.end + 1] = [peak] * (seg.end - seg.start + 1)
    return out


def detected_within_delay(
    segment: ExtendedSegment, scores, threshold: float, k_delay: int | None = None
) -> bool:
    """True iff some raw score >= threshold lands in the extended segment
    no later than ``k_delay`` points after onset (onset itself is offset 0)."""
    scores = _as_list(scores)
    hi = _detect_window_end(segment, k_delay)
    return any(scores[p] >= threshold for p in range(segment.start, hi + 1))


def _segment_weight(seg: ExtendedSegment, weighted: bool) -> float:
    return _LOG(seg.orig_length + _E) if weighted else 1.0


def _run_weight(length: int, weighted: bool) -> float:
    return _LOG(length + _E) if weighted else 1.0


def confusion_at_threshold(
    scores,
    segments: Sequence[ExtendedSegment],
    threshold: float,
    criterion: EvalCriterion,
) -> WeightedConfusion:
    """Confusion counts at one threshold; segments must already be prolonged."""
    scores = _as_list(scores)
    n = len(scores)
    if criterion.variant == "point_wise_pa":
        adjusted = adjust_scores_pa(scores, segments, criterion.k_delay)
        mask = bytearray(n)
        for seg in segments:
            mask[seg.start : seg.end + 1] = b"\x01" * (seg.end - seg.start + 1)
        tp = fp = fn = 0
        for p in range(n):
            if adjusted[p] >= threshold:
                if mask[p]:
                    tp += 1
                else:
                    fp += 1
            elif mask[p]:
                fn += 1
        return WeightedConfusion(float(tp), float(fp), float(fn))

    weighted = criterion.variant == "reduced_length_pa"
    tp = fn = 0.0
    for seg in segments:
        w = _segment_weight(seg, weighted)
        if detected_within_delay(seg, scores, threshold, criterion.k_delay):
            tp += w
        else:
            fn += w
    in_seg = bytearray(n)
    for seg in segments:
        in_seg[seg.start : seg.end + 1] = b"\x01" * (seg.end - seg.start + 1)
    fp = 0.0
    run_len = 0
    run_clean = True
    for p in range(n):
        if scores[p] >= threshold:
            run_len += 1
            if in_seg[p]:
                run_clean = False
        elif run_len:
            if run_clean:
                fp += _run_weight(run_len, weighted)
            run_len = 0
            run_clean = True
    if run_len and run_clean:
        fp += _run_weight(run_len, weighted)
    return WeightedConfusion(tp, fp, fn)


def prf_from_confusion(c: WeightedConfusion) -> tuple[float, float, float]:
    """Precision, recall, F1 with conservative zero-denominator conventions."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def _descending_order(scores: list[float]) -> list[int]:
    if len(scores) > 64:
        return np.argsort(np.asarray(scores))[::-1].tolist()
    return sorted(range(len(scores)), key=scores.__getitem__, reverse=True)


def _sweep_event(
    scores: list[float],
    segments: Sequence[ExtendedSegment],
    k_delay: int | None,
    weighted: bool,
) -> tuple[list[float], list[float], list[float], list[float], float]:
    """Incremental event-based sweep over unique thresholds, descending.

    Points are activated from the highest score down; alarm runs are
    maintained via endpoint links (activating a point either starts a run,
    extends one, or merges two). A run touching any extended segment is
    tainted and contributes no FP weight.
    """
    n = len(scores)
    det = []
    total_w = 0.0
    for seg in segments:
        hi = _detect_window_end(seg, k_delay)
        peak = max(scores[seg.start : hi + 1])
        w = _segment_weight(seg, weighted)
        det.append((peak, w))
        total_w += w
    det.sort(key=lambda pw: pw[0], reverse=True)

    in_seg = bytearray(n)
    for seg in segments:
        in_seg[seg.start : seg.end + 1] = b"\x01" * (seg.end - seg.start + 1)

    order = _descending_order(scores)
    other_end = list(range(n))
    active = bytearray(n)
    tainted = bytearray(n)  # meaningful at a run's left endpoint

    thresholds: list[float] = []
    tps: list[float] = []
    fps: list[float] = []
    fns: list[float] = []
    tp_w = 0.0
    fp_w = 0.0
    clean_runs = 0  # exact count; forces fp to 0.0 when no clean run is left
    seg_i = 0
    n_seg = len(det)

    i = 0
    while i < n:
        t = scores[order[i]]
        j = i
        while j < n and scores[order[j]] == t:
            p = order[j]
            left = right = p
            taint = in_seg[p] != 0
            if p > 0 and active[p - 1]:
                ll = other_end[p - 1]
                if tainted[ll]:
                    taint = True
                else:
                    fp_w -= _run_weight(p - ll, weighted)
                    clean_runs -= 1
                left = ll
            if p + 1 < n and active[p + 1]:
                rr = other_end[p + 1]
                if tainted[p + 1]:
                    taint = True
                else:
                    fp_w -= _run_weight(rr - p, weighted)
                    clean_runs -= 1
                right = rr
            active[p] = 1
            other_end[left] = right
            other_end[right] = left
            tainted[left] = 1 if taint else 0
            if not taint:
                fp_w += _run_weight(right - left + 1, weighted)
                clean_runs += 1
            j += 1
        while seg_i < n_seg and det[seg_i][0] >= t:
            tp_w += det[seg_i][1]
            seg_i += 1
        thresholds.append(t)
        tps.append(tp_w)
        fps.append(fp_w if clean_runs else 0.0)
        fns.append(total_w - tp_w)
        i = j
    return thresholds, tps, fps, fns, total_w


def _sweep_point_wise(
    scores: list[float],
    segments: Sequence[ExtendedSegment],
    k_delay: int | None,
) -> tuple[list[float], list[float], list[float], list[float], float]:
    """Per-point sweep: segments contribute their full extended length once
    the propagated score clears the threshold; out-of-segment points
    contribute FPs individually."""
    n = len(scores)
    mask = bytearray(n)
    seg_vals: list[tuple[float, int]] = []
    mask_size = 0
    for seg in segments:
        hi = _detect_window_end(seg, k_delay)
        peak = max(scores[seg.start : hi + 1])
        length = seg.end - seg.start + 1
        seg_vals.append((peak, length))
        mask[seg.start : seg.end + 1] = b"\x01" * length
        mask_size += length
    out_sorted = sorted(
        (scores[p] for p in range(n) if not mask[p]), reverse=True
    )
    seg_vals.sort(key=lambda pl: pl[0], reverse=True)
    uniq = sorted(set(scores), reverse=True)

    thresholds: list[float] = []
    tps: list[float] = []
    fps: list[float] = []
    fns: list[float] = []
    tp = 0
    fp = 0
    si = 0
    oi = 0
    n_out = len(out_sorted)
    n_sv = len(seg_vals)
    for t in uniq:
        while si < n_sv and seg_vals[si][0] >= t:
            tp += seg_vals[si][1]
            si += 1
        while oi < n_out and out_sorted[oi] >= t:
            fp += 1
            oi += 1
        thresholds.append(t)
        tps.append(float(tp))
        fps.append(float(fp))
        fns.append(float(mask_size - tp))
    return thresholds, tps, fps, fns, float(mask_size)


def sweep_confusions(
    scores, labels, criterion: EvalCriterion
) -> tuple[list[float], list[float], list[float], list[float], float]:
    """Confusions at every unique score threshold, descending.

    Returns (thresholds, tps, fps, fns, total_positive_weight). Equals a
    fresh ``confusion_at_threshold`` call per unique threshold.
    """
    scores = _as_list(scores)
    segments = prolong_segments(
        extract_segments(labels), criterion.prolong_len, len(scores)
    )
    if criterion.variant == "point_wise_pa":
        return _sweep_point_wise(scores, segments, criterion.k_delay)
    weighted = criterion.variant == "reduced_length_pa"
    return _sweep_event(scores, segments, criterion.k_delay, weighted)


def _prf(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def best_f1(scores, labels, criterion: EvalCriterion) -> MetricReport:
    """Best F1 over all candidate thresholds (unique scores plus +inf).

    Ties resolve to the lowest threshold. The returned MetricReport's
    ``auprc`` field is NaN; use ``evaluate_curve`` for both metrics at once.
    """
    thresholds, tps, fps, fns, _ = sweep_confusions(scores, labels, criterion)
    best = (0.0, math.inf, 0.0, 0.0)  # the +inf / no-alarm candidate
    for t, tp, fp, fn in zip(thresholds, tps, fps, fns):
        precision, recall, f1 = _prf(tp, fp, fn)
        if f1 >= best[0]:
            best = (f1, t, precision, recall)
    return MetricReport(
        f1_best=best[0],
        best_threshold=best[1],
        precision_at_best=best[2],
        recall_at_best=best[3],
        auprc=math.nan,
        criterion=criterion,
    )


def _auprc_from_sweep(
    thresholds: list[float],
    tps: list[float],
    fps: list[float],
    fns: list[float],
) -> float:
    area = 0.0
    prev_recall = 0.0
    for tp, fp, fn in zip(tps, fps, fns):
        precision, recall, _ = _prf(tp, fp, fn)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def auprc(scores, labels, criterion: EvalCriterion) -> float:
    """Step-integrated area under the criterion's precision-recall curve."""
    if not any(labels):
        raise NoPositiveEvents("labels contain no anomaly")
    thresholds, tps, fps, fns, _ = sweep_confusions(scores, labels, criterion)
    return _auprc_from_sweep(thresholds, tps, fps, fns)


def pr_curve(scores, labels, criterion: EvalCriterion) -> list[PRPoint]:
    thresholds, tps, fps, fns, _ = sweep_confusions(scores, labels, criterion)
    points = []
    for t, tp, fp, fn in zip(thresholds, tps, fps, fns):
        precision, recall, _ = _prf(tp, fp, fn)
        points.append(PRPoint(threshold=t, precision=precision, recall=recall))
    return points


def evaluate_curve(scores, labels, criterion: EvalCriterion) -> MetricReport:
    """Both headline metrics from a single sweep."""
    if not any(labels):
        raise NoPositiveEvents("labels contain no anomaly")
    thresholds, tps, fps, fns, _ = sweep_confusions(scores, labels, criterion)
    best = (0.0, math.inf, 0.0, 0.0)
    for t, tp, fp, fn in zip(thresholds, tps, fps, fns):
        precision, recall, f1 = _prf(tp, fp, fn)
        if f1 >= best[0]:
            best = (f1, t, precision, recall)
    return MetricReport(
        f1_best=best[0],
        best_threshold=best[1],
        precision_at_best=best[2],
        recall_at_best=best[3],
        auprc=_auprc_from_sweep(thresholds, tps, fps, fns),
        criterion=criterion,
    )


@dataclass(frozen=True)
class DatasetScore:
    dataset: str
    f1_best_mean: float
    auprc_mean: float
    curve_count: int


@dataclass(frozen=True)
class OverallScore:
    f1_best_mean: float
    auprc_mean: float
    dataset_count: int


def aggregate(
    per_dataset: Mapping[str, Sequence[MetricReport]],
) -> tuple[list[DatasetScore], OverallScore]:
    """Dataset score = unweighted mean over curves; overall = unweighted
    mean over dataset scores, so curve counts never bias the ranking."""
    if not per_dataset:
        raise EmptyDataset("no datasets to aggregate")
    dataset_scores = []
    for name in sorted(per_dataset):
        reports = per_dataset[name]
        if not reports:
            raise EmptyDataset(f"dataset {name!r} has no curves")
        dataset_scores.append(
            DatasetScore(
                dataset=name,
                f1_best_mean=sum(r.f1_best for r in reports) / len(reports),
                auprc_mean=sum(r.auprc for r in reports) / len(reports),
                curve_count=len(reports),
            )
        )
    overall = OverallScore(
        f1_best_mean=sum(d.f1_best_mean for d in dataset_scores) / len(dataset_scores),
        auprc_mean=sum(d.auprc_mean for d in dataset_scores) / len(dataset_scores),
        dataset_count=len(dataset_scores),
    )
    return dataset_scores, overall
