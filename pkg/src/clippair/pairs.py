"""Positive / negative clip-pair construction and hard-negative mining.

A clip with 0-based index ``i`` counts as inside a normalized segment
``[t_s, t_e]`` iff ``t_s <= (i + 1) / T <= t_e``.  Pairs of clips inside
the same ground-truth segment are positives; pairs whose clips sit in two
different segments are assigned by an explicit policy (excluded by
default); every remaining pair is a negative.  Hard negatives are the
top-k negatives by similarity.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .types import Segment, SegmentIndices

__all__ = [
    "CrossSegmentPolicy",
    "PairSets",
    "clip_inside",
    "inside_clips",
    "segment_to_indices",
    "build_pair_sets",
    "mine_hard_negatives",
]

Pair = tuple[int, int]


class CrossSegmentPolicy(enum.Enum):
    """How to label a pair whose two clips lie in two different GT segments."""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class PairSets:
    """Unordered clip pairs (i < j) split into positives, negatives, hard negatives.

    ``hard_negatives`` is None until mined; an empty tuple means mining ran
    against an empty negative set.
    """

    positives: frozenset[Pair]
    negatives: frozenset[Pair]
    hard_negatives: Optional[tuple[Pair, ...]] = None

    def __post_init__(self) -> None:
        if self.positives & self.negatives:
            raise ValueError("positives and negatives must be disjoint")
        for (i, j) in itertools.chain(self.positives, self.negatives):
            if i >= j:
                raise ValueError(f"pairs must satisfy i < j, got ({i}, {j})")
        if self.hard_negatives is not None:
            if not set(self.hard_negatives) <= self.negatives:
                raise ValueError("hard negatives must be a subset of the negatives")


def clip_inside(i: int, num_clips: int, seg: Segment) -> bool:
    """Membership test for 0-based clip ``i`` in a segment normalized to [0, 1]."""
    if not 0 <= i < num_clips:
        raise ValueError(f"clip index {i} out of range for {num_clips} clips")
    if not (0 <= seg.start and seg.end <= 1):
        raise ValueError(f"segment must be normalized to [0, 1], got {seg.as_tuple()}")
    return seg.start <= (i + 1) / num_clips <= seg.end


def inside_clips(num_clips: int, seg: Segment) -> list[int]:
    """All 0-based clip indices inside a normalized segment, ascending."""
    return [i for i in range(num_clips) if clip_inside(i, num_clips, seg)]


def segment_to_indices(seg: Segment, num_clips: int) -> SegmentIndices:
    """Span of clips covered by a normalized segment, as SegmentIndices.

    Falls back to the single clip nearest the segment center when the
    segment is too short to contain any clip boundary point.
    """
    inside = inside_clips(num_clips, seg)
    if inside:
        return SegmentIndices(inside[0], inside[-1], num_clips)
    center = 0.5 * (seg.start + seg.end)
    nearest = int(np.clip(round(center * num_clips - 1), 0, num_clips - 1))
    return SegmentIndices(nearest, nearest, num_clips)


def build_pair_sets(
    num_clips: int,
    segments: Sequence[Segment],
    policy: CrossSegmentPolicy = CrossSegmentPolicy.EXCLUDED,
) -> PairSets:
    """Label every unordered clip pair as positive, negative, or excluded.

    A pair is positive iff both clips are inside the same segment.  Pairs
    whose clips are inside two distinct segments only are labeled per
    ``policy``.  Pairs with at least one clip outside every segment are
    negatives.  Hard negatives are left unmined.
    """
    if num_clips < 2:
        raise ValueError(f"need at least 2 clips to form pairs, got {num_clips}")
    if len(segments) == 0:
        raise ValueError("segment list is empty")

    memberships = [frozenset(inside_clips(num_clips, seg)) for seg in segments]
    in_any = frozenset().union(*memberships)

    positives: set[Pair] = set()
    negatives: set[Pair] = set()
    for i, j in itertools.combinations(range(num_clips), 2):
        if any(i in m and j in m for m in memberships):
            positives.add((i, j))
        elif i in in_any and j in in_any:
            if policy is CrossSegmentPolicy.POSITIVE:
                positives.add((i, j))
            elif policy is CrossSegmentPolicy.NEGATIVE:
                negatives.add((i, j))
            # EXCLUDED: in neither set
        else:
            negatives.add((i, j))
    return PairSets(frozenset(positives), frozenset(negatives))


def mine_hard_negatives(sims: np.ndarray, pairs: PairSets, k: int) -> PairSets:
    """Pick the min(k, |N|) negative pairs with the largest similarity.

    Output is sorted by similarity descending with ties broken by
    lexicographic (i, j) order, so mining is deterministic.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sims = np.asarray(sims, dtype=np.float64)
    if sims.ndim != 2 or sims.shape[0] != sims.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {sims.shape}")
    if not np.all(np.isfinite(sims)):
        raise ValueError("similarity matrix contains non-finite entries")

    ranked = sorted(pairs.negatives, key=lambda p: (-sims[p[0], p[1]], p[0], p[1]))
    return replace(pairs, hard_negatives=tuple(ranked[:k]))
