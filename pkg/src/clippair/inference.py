"""Turning per-clip model outputs into scored prediction windows.

Each clip anchors a candidate window at its center time (i + 0.5) * dur/T,
shifted by the predicted start/end offsets and clamped to the video;
overlapping candidates are thinned with greedy 1-D non-maximum
suppression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metrics import iou
from .types import PredictionWindow, Segment

__all__ = [
    "ClipOutputs",
    "clip_centers",
    "assemble_windows",
    "nms_1d",
]


@dataclass(frozen=True)
class ClipOutputs:
    """Per-clip saliency plus signed start/end offsets in seconds."""

    saliency: np.ndarray
    start_offset: np.ndarray
    end_offset: np.ndarray

    def __post_init__(self) -> None:
        sal = np.asarray(self.saliency, dtype=np.float64)
        so = np.asarray(self.start_offset, dtype=np.float64)
        eo = np.asarray(self.end_offset, dtype=np.float64)
        if not (sal.shape == so.shape == eo.shape) or sal.ndim != 1:
            raise ValueError(
                f"saliency/offset vectors must share one length, got shapes "
                f"{sal.shape}, {so.shape}, {eo.shape}"
            )
        for name, arr in (("saliency", sal), ("start_offset", so), ("end_offset", eo)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "saliency", sal)
        object.__setattr__(self, "start_offset", so)
        object.__setattr__(self, "end_offset", eo)

    @property
    def num_clips(self) -> int:
        return self.saliency.shape[0]


def clip_centers(num_clips: int, duration: float) -> np.ndarray:
    """Anchor time of each clip: (i + 0.5) * duration / num_clips."""
    return (np.arange(num_clips) + 0.5) * duration / num_clips


def assemble_windows(
    outputs: ClipOutputs, duration: float
) -> tuple[list[PredictionWindow], int]:
    """Candidate windows per clip, clamped to [0, duration].

    Windows with non-positive length after clamping are dropped; the
    second return value reports how many were dropped.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    centers = clip_centers(outputs.num_clips, duration)
    starts = np.clip(centers + outputs.start_offset, 0.0, duration)
    ends = np.clip(centers + outputs.end_offset, 0.0, duration)
    windows: list[PredictionWindow] = []
    dropped = 0
    for start, end, score in zip(starts, ends, outputs.saliency):
        if end - start <= 0.0:
            dropped += 1
            continue
        windows.append(PredictionWindow(Segment(float(start), float(end)), float(score)))
    return windows, dropped


def nms_1d(
    windows: Sequence[PredictionWindow],
    iou_threshold: float = 0.7,
    max_keep: int = 10,
) -> list[PredictionWindow]:
    """Greedy non-maximum suppression over scored intervals.

    Repeatedly keeps the highest-scoring remaining window and suppresses
    every remaining window whose IoU with it is >= iou_threshold, until
    max_keep windows are kept or none remain.  Ties are broken by earlier
    start then input order, so the result is deterministic.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if max_keep < 1:
        raise ValueError(f"max_keep must be >= 1, got {max_keep}")
    order = sorted(
        range(len(windows)),
        key=lambda i: (-windows[i].score, windows[i].segment.start, i),
    )
    kept: list[PredictionWindow] = []
    suppressed = [False] * len(windows)
    for i in order:
        if suppressed[i]:
            continue
        kept.append(windows[i])
        if len(kept) >= max_keep:
            break
        for j in order:
            if not suppressed[j] and j != i:
                if iou(windows[i].segment, windows[j].segment) >= iou_threshold:
                    suppressed[j] = True
        suppressed[i] = True
    return kept
