"""Moment-retrieval evaluation: interval IoU, R1@threshold, detection AP, mAP.

Recall@1 asks whether the single top-scoring window of each query reaches
the IoU threshold against any GT segment.  AP follows the detection
convention: predictions ranked by score, greedy one-to-one matching
against the unmatched GT with highest IoU at or above the threshold, and
area under the monotone (all-point interpolated) precision envelope.
mAP@Avg averages mAP over IoU thresholds 0.5 to 0.95 in steps of 0.05.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .types import GroundTruthEntry, PredictionWindow, Segment

__all__ = [
    "MAP_THRESHOLDS",
    "DEFAULT_PREDICTION_CAP",
    "EvalResult",
    "iou",
    "rank_predictions",
    "recall_at_1",
    "average_precision",
    "mean_ap",
    "evaluate",
]

MAP_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
R1_THRESHOLDS: tuple[float, ...] = (0.5, 0.7)
DEFAULT_PREDICTION_CAP = 10


@dataclass(frozen=True)
class EvalResult:
    """Percentages per metric; map_avg is the unweighted mean over MAP_THRESHOLDS."""

    r1_at: dict[float, float]
    map_at: dict[float, float]
    map_avg: float
    num_queries: int

    def __post_init__(self) -> None:
        for table in (self.r1_at, self.map_at):
            for thr, pct in table.items():
                if not 0.0 <= pct <= 100.0:
                    raise ValueError(f"percentage out of range at threshold {thr}: {pct}")
        if not 0.0 <= self.map_avg <= 100.0:
            raise ValueError(f"map_avg out of range: {self.map_avg}")


def iou(a: Segment, b: Segment) -> float:
    """Intersection over union of two closed intervals; 0 when disjoint."""
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def rank_predictions(preds: Sequence[PredictionWindow]) -> list[PredictionWindow]:
    """Sort by score descending; ties by earlier start, then input order."""
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].segment.start, i),
    )
    return [preds[i] for i in order]


def _cap(preds: Sequence[PredictionWindow], cap: int | None) -> list[PredictionWindow]:
    ranked = rank_predictions(preds)
    return ranked if cap is None else ranked[:cap]


def recall_at_1(
    preds: Mapping[int, Sequence[PredictionWindow]],
    gts: Mapping[int, GroundTruthEntry],
    threshold: float,
) -> float:
    """Percentage of queries whose top-1 window reaches `threshold` IoU.

    Queries present in the ground truth but missing from the predictions
    count as misses.
    """
    unknown = set(preds) - set(gts)
    if unknown:
        raise KeyError(f"prediction references unknown query_id {sorted(unknown)[0]}")
    if not gts:
        raise ValueError("no ground-truth queries")
    hits = 0
    for qid, entry in gts.items():
        query_preds = preds.get(qid, ())
        if not query_preds:
            continue
        top = rank_predictions(query_preds)[0]
        if max(iou(top.segment, seg) for seg in entry.segments) >= threshold:
            hits += 1
    return 100.0 * hits / len(gts)


def average_precision(
    preds: Sequence[PredictionWindow],
    gts: Sequence[Segment],
    threshold: float,
) -> float:
    """Detection-style AP of one query's ranked predictions at one IoU threshold."""
    if len(gts) == 0:
        raise ValueError("ground-truth segment list is empty")
    if len(preds) == 0:
        return 0.0

    ranked = rank_predictions(preds)
    matched = [False] * len(gts)
    tp = np.zeros(len(ranked))
    fp = np.zeros(len(ranked))
    for rank, pred in enumerate(ranked):
        overlaps = [iou(pred.segment, g) for g in gts]
        # Highest-IoU unmatched GT at or above the threshold; skip matched ones.
        best = -1
        for gi in sorted(range(len(gts)), key=lambda g: (-overlaps[g], g)):
            if overlaps[gi] < threshold:
                break
            if not matched[gi]:
                best = gi
                break
        if best >= 0:
            matched[best] = True
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0

    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / len(gts)
    precision = tp_cum / (tp_cum + fp_cum)

    # All-point interpolation with the monotone precision envelope.
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mprec[steps]))


def mean_ap(
    preds: Mapping[int, Sequence[PredictionWindow]],
    gts: Mapping[int, GroundTruthEntry],
    thresholds: Sequence[float],
) -> dict[float, float]:
    """Per-threshold mAP (percentage): mean of per-query AP over all GT queries."""
    if len(thresholds) == 0:
        raise ValueError("threshold list is empty")
    unknown = set(preds) - set(gts)
    if unknown:
        raise KeyError(f"prediction references unknown query_id {sorted(unknown)[0]}")
    if not gts:
        raise ValueError("no ground-truth queries")
    result: dict[float, float] = {}
    for thr in thresholds:
        total = 0.0
        for qid in sorted(gts):
            entry = gts[qid]
            total += average_precision(preds.get(qid, ()), entry.segments, thr)
        result[thr] = 100.0 * total / len(gts)
    return result


def evaluate(
    preds: Mapping[int, Sequence[PredictionWindow]],
    gts: Sequence[GroundTruthEntry] | Mapping[int, GroundTruthEntry],
    r1_thresholds: Sequence[float] = R1_THRESHOLDS,
    map_thresholds: Sequence[float] = MAP_THRESHOLDS,
    cap: int | None = DEFAULT_PREDICTION_CAP,
) -> EvalResult:
    """Full protocol: R1 at the given thresholds, mAP per threshold, mAP average.

    At most `cap` predictions per query (by score) enter the evaluation.
    """
    if not isinstance(gts, Mapping):
        gt_map = {}
        for entry in gts:
            if entry.query_id in gt_map:
                raise ValueError(f"duplicate query_id {entry.query_id} in ground truth")
            gt_map[entry.query_id] = entry
    else:
        gt_map = dict(gts)
    capped = {qid: _cap(p, cap) for qid, p in preds.items()}
    r1 = {thr: recall_at_1(capped, gt_map, thr) for thr in r1_thresholds}
    per_thr = mean_ap(capped, gt_map, map_thresholds)
    avg = float(np.mean([per_thr[t] for t in map_thresholds]))
    return EvalResult(r1_at=r1, map_at=per_thr, map_avg=avg, num_queries=len(gt_map))
