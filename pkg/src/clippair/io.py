"""File formats: JSONL ground truth / predictions, CTB1 feature binaries, config.

Ground truth follows the public moment-retrieval JSONL convention
(qid / query / vid / duration / relevant_windows) so benchmark annotation
files load unmodified.  Features travel in a small binary container:
magic "CTB1", little-endian uint32 T and D, then T*D float32 row-major.
Configs are flat ``key = value`` lines with ``#`` comments.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .synth import SyntheticDatasetSpec
from .types import (
    GroundTruthEntry,
    LossWeights,
    MarginParams,
    PredictionWindow,
    Segment,
    validate_ground_truth,
)

__all__ = [
    "parse_ground_truth",
    "write_ground_truth",
    "parse_predictions",
    "write_predictions",
    "read_features",
    "write_features",
    "parse_config",
    "loss_weights_from_config",
    "margin_params_from_config",
    "dataset_spec_from_config",
]

FEATURE_MAGIC = b"CTB1"
HEADER = struct.Struct("<4sII")


def parse_ground_truth(path: str | Path) -> list[GroundTruthEntry]:
    """Load and validate one GroundTruthEntry per JSONL line."""
    entries: list[GroundTruthEntry] = []
    seen: set[int] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            try:
                qid = int(record["qid"])
                segments = tuple(
                    Segment(float(s), float(e)) for s, e in record["relevant_windows"]
                )
                entry = validate_ground_truth(
                    GroundTruthEntry(
                        query_id=qid,
                        video_id=str(record["vid"]),
                        duration=float(record["duration"]),
                        segments=segments,
                        query=str(record.get("query", "")),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ValueError(f"{path}: bad record on line {lineno}: {exc}") from exc
            if entry.query_id in seen:
                raise ValueError(f"{path}: duplicate qid {entry.query_id} on line {lineno}")
            seen.add(entry.query_id)
            entries.append(entry)
    return entries


def write_ground_truth(entries: Sequence[GroundTruthEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            record = {
                "qid": entry.query_id,
                "query": entry.query,
                "vid": entry.video_id,
                "duration": entry.duration,
                "relevant_windows": [[seg.start, seg.end] for seg in entry.segments],
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def parse_predictions(path: str | Path, cap: int | None = 10) -> dict[int, list[PredictionWindow]]:
    """Load per-query prediction windows, keeping at most `cap` per query by score."""
    preds: dict[int, list[PredictionWindow]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            try:
                qid = int(record["qid"])
                windows = [
                    PredictionWindow(Segment(float(s), float(e)), float(score))
                    for s, e, score in record["pred_relevant_windows"]
                ]
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: bad record on line {lineno}: {exc}") from exc
            if qid in preds:
                raise ValueError(f"{path}: duplicate qid {qid} on line {lineno}")
            windows.sort(key=lambda w: (-w.score, w.segment.start))
            preds[qid] = windows if cap is None else windows[:cap]
    return preds


def write_predictions(preds: Mapping[int, Sequence[PredictionWindow]],
                      path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for qid in sorted(preds):
            record = {
                "qid": qid,
                "pred_relevant_windows": [
                    [w.segment.start, w.segment.end, w.score] for w in preds[qid]
                ],
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def write_features(matrix: np.ndarray, path: str | Path) -> None:
    """Serialize a (T, D) matrix as CTB1 (float32, row-major, little-endian)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError(f"features must be a 2-D matrix, got shape {matrix.shape}")
    rows, cols = matrix.shape
    with open(path, "wb") as handle:
        handle.write(HEADER.pack(FEATURE_MAGIC, rows, cols))
        handle.write(matrix.tobytes(order="C"))


def read_features(path: str | Path) -> np.ndarray:
    """Read a CTB1 file back into a float32 (T, D) matrix."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size:
        raise ValueError(f"{path}: truncated CTB1 header")
    magic, rows, cols = HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    expected = HEADER.size + 4 * rows * cols
    if len(blob) != expected:
        raise ValueError(
            f"{path}: file length {len(blob)} does not match header "
            f"({rows}x{cols} floats need {expected} bytes)"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER.size)
    return data.reshape(rows, cols).copy()


def parse_config(path: str | Path) -> dict:
    """Flat ``key = value`` file with ``#`` comments; values become int, float,
    tuple of floats (comma separated), or string."""
    config: dict = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno} is not 'key = value': {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            config[key] = _parse_value(value)
    return config


def _parse_value(text: str):
    if "," in text:
        return tuple(float(part.strip()) for part in text.split(","))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _pick(config: Mapping, cls, **overrides):
    fields = cls.__dataclass_fields__
    kwargs = {name: config[name] for name in fields if name in config}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def loss_weights_from_config(config: Mapping, **overrides) -> LossWeights:
    return _pick(config, LossWeights, **overrides)


def margin_params_from_config(config: Mapping, **overrides) -> MarginParams:
    return _pick(config, MarginParams, **overrides)


def dataset_spec_from_config(config: Mapping, **overrides) -> SyntheticDatasetSpec:
    return _pick(config, SyntheticDatasetSpec, **overrides)
