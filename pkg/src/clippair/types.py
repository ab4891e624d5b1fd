"""Core value types shared by every other module.

All types are immutable after construction and safe to share between
threads.  Validation that reorders or normalizes data lives in explicit
functions (``validate_ground_truth``) so that it stays idempotent and
testable; constructors only enforce cheap per-field invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "Segment",
    "GroundTruthEntry",
    "ClipEmbeddings",
    "SegmentIndices",
    "MarginParams",
    "LossWeights",
    "PredictionWindow",
    "LossResult",
    "validate_ground_truth",
]


@dataclass(frozen=True)
class Segment:
    """Closed time interval ``[start, end]`` in seconds, start < end."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError(f"segment bounds must be finite, got [{self.start}, {self.end}]")
        if self.start < 0:
            raise ValueError(f"segment start must be >= 0, got {self.start}")
        if not self.start < self.end:
            raise ValueError(f"segment start must be < end, got [{self.start}, {self.end}]")

    @property
    def length(self) -> float:
        return self.end - self.start

    def normalized(self, duration: float) -> "Segment":
        """Rescale from seconds to the unit interval of a video of `duration` seconds."""
        if duration <= 0:
            raise ValueError(f"duration must be positive, got {duration}")
        return Segment(self.start / duration, self.end / duration)

    def as_tuple(self) -> tuple[float, float]:
        return (self.start, self.end)


@dataclass(frozen=True)
class GroundTruthEntry:
    """All annotated answer segments of one (query, video) pair."""

    query_id: int
    video_id: str
    duration: float
    segments: tuple[Segment, ...]
    query: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be positive and finite, got {self.duration}")
        object.__setattr__(self, "segments", tuple(self.segments))


@dataclass(frozen=True)
class ClipEmbeddings:
    """A (num_clips x dim) matrix of per-clip feature vectors, row i = clip i."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"embeddings must be a 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr).all(axis=1))[0][0])
            raise ValueError(f"embeddings contain non-finite entries (first bad row: {bad})")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def num_clips(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def as_matrix(emb) -> np.ndarray:
    """Coerce ClipEmbeddings or any array-like into a float64 (T, D) matrix."""
    if isinstance(emb, ClipEmbeddings):
        return emb.data
    arr = np.asarray(emb, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D embedding matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SegmentIndices:
    """A ground-truth segment expressed as 0-based clip indices [start_index, end_index]."""

    start_index: int
    end_index: int
    num_clips: int

    def __post_init__(self) -> None:
        if not 0 <= self.start_index <= self.end_index < self.num_clips:
            raise ValueError(
                "need 0 <= start_index <= end_index < num_clips, got "
                f"({self.start_index}, {self.end_index}, {self.num_clips})"
            )

    @property
    def normalized_length(self) -> float:
        return (self.end_index - self.start_index) / self.num_clips


@dataclass(frozen=True)
class MarginParams:
    """Dynamic hinge margin: min(threshold, base + length_scaling * normalized_length)."""

    threshold: float = 0.3
    base: float = 0.1
    length_scaling: float = 0.1

    def __post_init__(self) -> None:
        for name in ("threshold", "base", "length_scaling"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"margin parameter {name} must be strictly positive, got {v}")
        if self.base > self.threshold:
            raise ValueError(
                f"base margin {self.base} must not exceed threshold {self.threshold}"
            )


@dataclass(frozen=True)
class LossWeights:
    """Loss-term weights, contrastive temperature, and hard-negative count.

    Defaults follow the best-performing configuration: the three extra loss
    terms weighted 3.0 / 3.0 / 2.0 on top of a unit-weight basic loss, with
    20 mined hard negatives.  The auxiliary sub-weights put full weight on
    the start/end residuals and half weight on the redundant center/length
    residuals; the temperature default 0.07 is the usual contrastive choice.
    """

    lambda_basic: float = 1.0
    lambda_clip: float = 3.0
    lambda_boun: float = 3.0
    lambda_b_aux: float = 2.0
    lambda_s: float = 1.0
    lambda_e: float = 1.0
    lambda_c: float = 0.5
    lambda_l: float = 0.5
    tau: float = 0.07
    k: int = 20

    def __post_init__(self) -> None:
        for name in (
            "lambda_basic", "lambda_clip", "lambda_boun", "lambda_b_aux",
            "lambda_s", "lambda_e", "lambda_c", "lambda_l",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"weight {name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"temperature tau must be > 0, got {self.tau}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"hard-negative count k must be an integer >= 1, got {self.k}")


@dataclass(frozen=True)
class PredictionWindow:
    """One scored candidate segment for a query."""

    segment: Segment
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"prediction score must be finite, got {self.score}")


@dataclass(frozen=True)
class LossResult:
    """Scalar loss value plus its gradient with respect to the differentiable input."""

    value: float
    grad: np.ndarray

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"loss value must be finite and >= 0, got {self.value}")
        grad = np.asarray(self.grad, dtype=np.float64)
        if not np.all(np.isfinite(grad)):
            raise ValueError("loss gradient contains non-finite entries")
        grad = grad.copy()
        grad.setflags(write=False)
        object.__setattr__(self, "grad", grad)


def validate_ground_truth(entry: GroundTruthEntry) -> GroundTruthEntry:
    """Check invariants and return the entry with segments sorted by start.

    Raises ValueError naming the offending segment index for: an empty
    segment list, a segment outside [0, duration], or exact duplicates.
    (Inverted / zero-length segments are already rejected by Segment.)
    """
    if len(entry.segments) == 0:
        raise ValueError(f"qid {entry.query_id}: segment list is empty")
    for i, seg in enumerate(entry.segments):
        if seg.end > entry.duration:
            raise ValueError(
                f"qid {entry.query_id}: segment {i} [{seg.start}, {seg.end}] "
                f"exceeds duration {entry.duration}"
            )
    ordered = tuple(sorted(entry.segments, key=lambda s: (s.start, s.end)))
    for i in range(1, len(ordered)):
        if ordered[i] == ordered[i - 1]:
            raise ValueError(
                f"qid {entry.query_id}: duplicate segment "
                f"[{ordered[i].start}, {ordered[i].end}] at sorted position {i}"
            )
    if ordered == entry.segments:
        return entry
    return replace(entry, segments=ordered)
