"""Synthetic clip features with planted answer segments.

Each query gets one video of ``clips_per_video`` clips.  Raw features
split into two halves: a signal subspace holding a global relevance
direction plus per-query concept vectors, and a nuisance subspace holding
a strong per-clip component that drowns raw cosine similarity (same-query
foreground clips only agree at ~1/(1 + scale^2) before training).  A
linear projection can learn to suppress the nuisance half, which is
exactly what the trainer is supposed to demonstrate.

Foreground clips carry the query concept; background regions carry
per-clip distractor directions; one background block per query carries a
"confuser" concept placed at distance ``cluster_separation / 2`` from the
query concept, i.e. a region that looks similar but is irrelevant.  The
confuser block is buffered away from segment boundaries so that it forms
its own saliency island rather than smearing segment boundaries.

Segment boundaries are planted on the clip grid so that the clip
membership rule (clip i inside [s, e] iff s <= (i+1)/T <= e) recovers the
planted foreground set exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pairs import inside_clips
from .types import GroundTruthEntry, Segment, validate_ground_truth

__all__ = [
    "VIDEO_DURATION",
    "SyntheticDatasetSpec",
    "SyntheticDataset",
    "generate_dataset",
    "foreground_clips",
]

VIDEO_DURATION = 150.0
RELEVANCE_MIX = 0.4       # weight of the shared relevance direction in each concept
NUISANCE_RATIO = 12.0     # per-clip nuisance magnitude per unit of noise_sigma
MIN_SPAN, MAX_SPAN = 3, 5 # segment lengths in clip-grid units
CONFUSER_MAX_CLIPS = 2


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    """Knobs of the generator; ``segments_per_query`` are probabilities of 1/2/3."""

    num_queries: int = 64
    clips_per_video: int = 32
    raw_dim: int = 16
    embed_dim: int = 8
    segments_per_query: tuple[float, float, float] = (0.2, 0.2, 0.6)
    cluster_separation: float = 1.2
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_queries", "clips_per_video", "raw_dim", "embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.raw_dim < 4 or self.raw_dim % 2:
            raise ValueError(f"raw_dim must be an even number >= 4, got {self.raw_dim}")
        if self.clips_per_video < 8:
            raise ValueError("need at least 8 clips per video to plant segments")
        probs = np.asarray(self.segments_per_query, dtype=np.float64)
        if probs.shape != (3,) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ValueError(
                f"segments_per_query must be 3 probabilities summing to 1, got {self.segments_per_query}"
            )
        if not (np.isfinite(self.cluster_separation) and self.cluster_separation >= 0):
            raise ValueError(f"cluster_separation must be finite and >= 0")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError(f"noise_sigma must be finite and >= 0")


@dataclass(frozen=True)
class SyntheticDataset:
    """Per-query feature matrices and ground truth, plus the fixed offset readout."""

    spec: SyntheticDatasetSpec
    features: tuple[np.ndarray, ...]
    entries: tuple[GroundTruthEntry, ...]
    readout_start: np.ndarray
    readout_end: np.ndarray

    @property
    def num_queries(self) -> int:
        return len(self.entries)


def foreground_clips(entry: GroundTruthEntry, num_clips: int) -> list[int]:
    """Union of clip indices inside any GT segment, via the membership rule."""
    fg: set[int] = set()
    for seg in entry.segments:
        fg.update(inside_clips(num_clips, seg.normalized(entry.duration)))
    return sorted(fg)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _plant_spans(rng: np.random.Generator, num_clips: int, n_seg: int) -> list[tuple[int, int]]:
    """Clip-grid spans (a, b), 1 <= a, b <= T, b - a in [MIN_SPAN, MAX_SPAN].

    Consecutive spans keep a distance of at least 2 grid units so their
    clip memberships never touch; the layout always leaves one gap of at
    least 3 clips to host the confuser block.
    """
    for _ in range(256):
        lengths = rng.integers(MIN_SPAN, MAX_SPAN + 1, size=n_seg)
        slack = num_clips - 1 - int(lengths.sum()) - 2 * (n_seg - 1)
        if slack < 0:
            continue
        # Split the slack over leading / inter / trailing gap slots.
        cuts = np.sort(rng.integers(0, slack + 1, size=n_seg))
        extras = np.diff(np.concatenate([[0], cuts, [slack]]))
        spans = []
        position = 1 + int(extras[0])
        for idx in range(n_seg):
            if idx > 0:
                position += 2 + int(extras[idx])
            spans.append((position, position + int(lengths[idx])))
            position = spans[-1][1]
        gaps = _gap_runs(spans, num_clips)
        if gaps and max(end - start + 1 for start, end in gaps) >= 3:
            return spans
    raise RuntimeError("could not plant segments; video too short for the request")


def _gap_runs(spans: Sequence[tuple[int, int]], num_clips: int) -> list[tuple[int, int]]:
    """Maximal runs of background clips, as inclusive 0-based (start, end)."""
    member = np.zeros(num_clips, dtype=bool)
    for a, b in spans:
        member[a - 1 : b] = True
    runs = []
    i = 0
    while i < num_clips:
        if not member[i]:
            j = i
            while j + 1 < num_clips and not member[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def generate_dataset(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    """Deterministic dataset for the given spec (bitwise identical per seed)."""
    rng = np.random.default_rng(spec.seed)
    total = spec.clips_per_video
    signal_dim = spec.raw_dim // 2

    def signal_unit() -> np.ndarray:
        # Unit vector in the signal half, orthogonal to the relevance direction.
        v = np.zeros(spec.raw_dim)
        v[1:signal_dim] = rng.standard_normal(signal_dim - 1)
        return v / np.linalg.norm(v)

    def nuisance() -> np.ndarray:
        # Per-clip corruption in the second half of the feature space.
        v = np.zeros(spec.raw_dim)
        v[signal_dim:] = rng.standard_normal(spec.raw_dim - signal_dim)
        return NUISANCE_SCALE * v / np.linalg.norm(v)

    relevance = np.zeros(spec.raw_dim)
    relevance[0] = 1.0

    readout_start = _unit(rng, spec.embed_dim)
    readout_end = _unit(rng, spec.embed_dim)

    features: list[np.ndarray] = []
    entries: list[GroundTruthEntry] = []
    for qid in range(spec.num_queries):
        concept = RELEVANCE_MIX * relevance + np.sqrt(1 - RELEVANCE_MIX**2) * signal_unit()
        n_seg = int(rng.choice([1, 2, 3], p=spec.segments_per_query))
        spans = _plant_spans(rng, total, n_seg)

        segments = tuple(
            Segment(a / total * VIDEO_DURATION, b / total * VIDEO_DURATION)
            for a, b in spans
        )
        entry = validate_ground_truth(
            GroundTruthEntry(
                query_id=qid,
                video_id=f"video_{qid:04d}",
                duration=VIDEO_DURATION,
                segments=segments,
                query=f"synthetic query {qid}",
            )
        )

        gaps = _gap_runs(spans, total)
        widest = max(gaps, key=lambda run: (run[1] - run[0], -run[0]))
        confuser_block: tuple[int, int] | None = None
        if widest[1] - widest[0] + 1 >= 3:
            room = widest[1] - widest[0] - 1
            size = min(CONFUSER_MAX_CLIPS, room)
            offset = (room - size) // 2
            confuser_block = (widest[0] + 1 + offset, widest[0] + offset + size)
        confuser_concept = concept + 0.5 * spec.cluster_separation * signal_unit()

        mat = np.zeros((total, spec.raw_dim))
        for a, b in spans:
            for i in range(a - 1, b):
                mat[i] = concept + nuisance()
        for start, end in gaps:
            for i in range(start, end + 1):
                if confuser_block and confuser_block[0] <= i <= confuser_block[1]:
                    mat[i] = confuser_concept + nuisance()
                else:
                    # Ordinary distractors are semantically unrelated to the
                    # query: keep their directions orthogonal to the concept.
                    d = signal_unit()
                    d -= (d @ concept) / (concept @ concept) * concept
                    mat[i] = d / np.linalg.norm(d) + nuisance()
        mat += spec.noise_sigma * rng.standard_normal(mat.shape)

        planted = sorted(i for a, b in spans for i in range(a - 1, b))
        recovered = foreground_clips(entry, total)
        if planted != recovered:
            raise AssertionError("planted foreground disagrees with the membership rule")

        features.append(mat)
        entries.append(entry)

    return SyntheticDataset(
        spec=spec,
        features=tuple(features),
        entries=tuple(entries),
        readout_start=readout_start,
        readout_end=readout_end,
    )
