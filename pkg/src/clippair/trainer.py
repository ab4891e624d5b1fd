"""Desk-scale demonstration: full-batch gradient descent of a linear projection.

The model is a single matrix ``W`` mapping raw clip features to the
embedding space in which all losses are computed.  The objective is the
weighted total of:

* the clip-level similarity loss over mined hard negatives,
* the mean per-segment boundary hinge,
* the auxiliary boundary regression loss, where each foreground clip
  predicts a window through a fixed random unit readout of its embedding,
* a basic-loss stand-in: per-clip binary cross-entropy of foreground vs
  background, driven by a sigmoid of the saliency (cosine of each clip to
  the foreground centroid).

Every gradient is chained by hand into ``dW = X^T dZ``; training is
single-threaded and bitwise deterministic for a fixed dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import metrics
from .inference import ClipOutputs, assemble_windows, clip_centers, nms_1d
from .losses import (
    BoundaryLabeling,
    aux_boundary_terms,
    boundary_loss,
    clip_similarity_loss,
    label_boundary_clips,
    similarity_matrix,
    total_loss,
)
from .pairs import (
    CrossSegmentPolicy,
    PairSets,
    build_pair_sets,
    inside_clips,
    mine_hard_negatives,
    segment_to_indices,
)
from .synth import SyntheticDataset, foreground_clips
from .types import LossWeights, MarginParams, Segment, SegmentIndices

__all__ = [
    "LinearModel",
    "TraceRow",
    "init_model",
    "train",
    "evaluate_model",
    "similarity_gap",
    "mean_boundary_error",
]

BCE_SCALE = 10.0       # logit = BCE_SCALE * (cosine saliency - BCE_BIAS)
BCE_BIAS = 0.5         # cosine level separating foreground from background
READOUT_SCALE = 0.5    # predicted offsets = READOUT_SCALE * unit readout response
BOUNDARY_WINDOW = 1
DEFAULT_LEARNING_RATE = 0.02


@dataclass(frozen=True)
class LinearModel:
    """Trainable projection (raw_dim x embed_dim) plus its step size."""

    W: np.ndarray
    learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self) -> None:
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or not np.all(np.isfinite(W)):
            raise ValueError("W must be a finite 2-D matrix")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        object.__setattr__(self, "W", W)


TraceRow = tuple[int, float, float, float, float, float]


def init_model(raw_dim: int, embed_dim: int, seed: int = 0,
               learning_rate: float = DEFAULT_LEARNING_RATE) -> LinearModel:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(raw_dim)
    return LinearModel(rng.standard_normal((raw_dim, embed_dim)) * scale, learning_rate)


@dataclass(frozen=True)
class _QueryContext:
    """Everything about one query that does not change across steps."""

    qid: int
    features: np.ndarray
    pairs: PairSets
    boundary_items: tuple[tuple[SegmentIndices, BoundaryLabeling], ...]
    fg: np.ndarray                    # foreground clip indices
    fg_targets: np.ndarray            # (n_fg, 2) normalized GT start/end per clip
    fg_mask: np.ndarray               # bool per clip


def _build_contexts(
    dataset: SyntheticDataset,
    window: int = BOUNDARY_WINDOW,
    policy: CrossSegmentPolicy = CrossSegmentPolicy.EXCLUDED,
) -> list[_QueryContext]:
    contexts = []
    for feats, entry in sorted(
        zip(dataset.features, dataset.entries), key=lambda fe: fe[1].query_id
    ):
        total = feats.shape[0]
        normalized = [seg.normalized(entry.duration) for seg in entry.segments]
        pairs = build_pair_sets(total, normalized, policy)
        items = []
        for seg in normalized:
            idx = segment_to_indices(seg, total)
            items.append((idx, label_boundary_clips(idx, window)))
        fg = np.asarray(foreground_clips(entry, total), dtype=np.int64)
        targets = np.zeros((fg.size, 2))
        for row, clip in enumerate(fg):
            for seg in normalized:
                if clip in inside_clips(total, seg):
                    targets[row] = (seg.start, seg.end)
                    break
        mask = np.zeros(total, dtype=bool)
        mask[fg] = True
        contexts.append(
            _QueryContext(entry.query_id, feats, pairs, tuple(items), fg, targets, mask)
        )
    return contexts


def _readout_predictions(emb: np.ndarray, fg: np.ndarray, dataset: SyntheticDataset):
    """Per-foreground-clip predicted (start, end) in normalized coordinates."""
    total = emb.shape[0]
    rows = emb[fg]
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row in offset readout")
    resp_start = rows @ dataset.readout_start / norms
    resp_end = rows @ dataset.readout_end / norms
    centers = (fg + 0.5) / total
    return (centers + READOUT_SCALE * resp_start,
            centers + READOUT_SCALE * resp_end,
            rows, norms, resp_start, resp_end)


def _aux_loss_and_grad(emb, ctx: _QueryContext, dataset, weights):
    if ctx.fg.size == 0:
        return 0.0, np.zeros_like(emb)
    pred_start, pred_end, rows, norms, resp_start, resp_end = _readout_predictions(
        emb, ctx.fg, dataset
    )
    value = 0.0
    grad = np.zeros_like(emb)
    scale = 1.0 / ctx.fg.size
    for row, clip in enumerate(ctx.fg):
        ts, te = ctx.fg_targets[row]
        v, g_s, g_e = aux_boundary_terms(
            float(pred_start[row]), float(pred_end[row]), ts, te, weights
        )
        value += v * scale
        z = rows[row]
        nz = norms[row]
        d_resp_s = dataset.readout_start / nz - resp_start[row] * z / nz**2
        d_resp_e = dataset.readout_end / nz - resp_end[row] * z / nz**2
        grad[clip] += scale * READOUT_SCALE * (g_s * d_resp_s + g_e * d_resp_e)
    return value, grad


def _bce_loss_and_grad(emb, ctx: _QueryContext):
    """Foreground/background BCE on sigmoid(BCE_SCALE * cos(clip, fg centroid)).

    The centroid is part of the computational graph, so its contribution to
    the gradient of every foreground row is included.
    """
    total = emb.shape[0]
    centroid = emb[ctx.fg].mean(axis=0)
    c_norm = float(np.linalg.norm(centroid))
    norms = np.linalg.norm(emb, axis=1)
    if c_norm == 0.0 or np.any(norms == 0.0):
        raise ValueError("zero-norm vector in saliency computation")
    sal = emb @ centroid / (norms * c_norm)
    logits = BCE_SCALE * (sal - BCE_BIAS)
    labels = ctx.fg_mask.astype(np.float64)
    value = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))

    prob = 1.0 / (1.0 + np.exp(-logits))
    dsal = BCE_SCALE * (prob - labels) / total
    inv = 1.0 / (norms * c_norm)
    grad = dsal[:, None] * (centroid[None, :] * inv[:, None]
                            - (sal / norms**2)[:, None] * emb)
    dcentroid = (dsal[:, None] * (emb * inv[:, None]
                                  - (sal / c_norm**2)[:, None] * centroid[None, :])).sum(axis=0)
    grad[ctx.fg] += dcentroid / ctx.fg.size
    return value, grad


def _query_losses(W, ctx: _QueryContext, dataset, weights, margin):
    """All four loss components and d(total)/dW for one query."""
    emb = ctx.features @ W

    sims = similarity_matrix(emb)
    mined = mine_hard_negatives(sims, ctx.pairs, weights.k)
    clip_part = clip_similarity_loss(emb, mined, weights.tau)

    boun_value = 0.0
    boun_grad = np.zeros_like(emb)
    for idx, labeling in ctx.boundary_items:
        part = boundary_loss(emb, idx, labeling, margin)
        boun_value += part.value
        boun_grad += part.grad
    boun_value /= len(ctx.boundary_items)
    boun_grad /= len(ctx.boundary_items)

    aux_value, aux_grad = _aux_loss_and_grad(emb, ctx, dataset, weights)
    basic_value, basic_grad = _bce_loss_and_grad(emb, ctx)

    demb = (weights.lambda_basic * basic_grad
            + weights.lambda_clip * clip_part.grad
            + weights.lambda_boun * boun_grad
            + weights.lambda_b_aux * aux_grad)
    return basic_value, clip_part.value, boun_value, aux_value, ctx.features.T @ demb


def train(
    model: LinearModel,
    dataset: SyntheticDataset,
    weights: LossWeights,
    steps: int,
    margin: MarginParams = MarginParams(),
) -> tuple[LinearModel, list[TraceRow]]:
    """Full-batch gradient descent on the weighted total loss.

    Loss components in the trace are means over queries (reduced in
    query-id order).  Raises on a non-finite loss, naming the step.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    contexts = _build_contexts(dataset)
    W = model.W.copy()
    trace: list[TraceRow] = []
    n = len(contexts)
    for step in range(steps):
        sums = np.zeros(4)
        dW = np.zeros_like(W)
        for ctx in contexts:
            basic, clip, boun, aux, grad = _query_losses(
                W, ctx, dataset, weights, margin
            )
            sums += (basic, clip, boun, aux)
            dW += grad
        means = sums / n
        total = total_loss(*means, weights)
        if not math.isfinite(total):
            raise ValueError(f"non-finite total loss at step {step}; reduce the learning rate")
        trace.append((step, means[0], means[1], means[2], means[3], total))
        W = W - model.learning_rate * (dW / n)
    return replace(model, W=W), trace


SEED_NEIGHBORS = 3
RUN_CUT_FRACTION = 0.35   # saliency cut sits this far below the per-video max


def _saliency(emb: np.ndarray) -> np.ndarray:
    """Cosine of every clip to the densest clip of the video.

    The seed clip is the one whose top-3 neighbor similarities are largest:
    answer clips share one concept, so after training they form the most
    coherent cluster, while background clips scatter.  No labels involved.
    """
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row in saliency computation")
    unit = emb / norms[:, None]
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)
    neighbors = min(SEED_NEIGHBORS, sims.shape[0] - 1)
    top = np.sort(sims, axis=1)[:, -neighbors:]
    seed = int(np.argmax(top.mean(axis=1)))
    return unit @ unit[seed]


def evaluate_model(
    model: LinearModel,
    dataset: SyntheticDataset,
    oracle_offsets: bool = False,
    nms_threshold: float = 0.7,
    max_keep: int = metrics.DEFAULT_PREDICTION_CAP,
) -> metrics.EvalResult:
    """Assemble, suppress, and score predictions for every query.

    Saliency is the cosine of each clip to the video's own densest clip
    (no labels involved).  Offsets either come from the ground truth
    (oracle mode) or from a nearest-boundary heuristic: clips inside a
    thresholded saliency run point at the run's boundaries; clips outside
    any run yield no window.
    """
    contexts = _build_contexts(dataset)
    preds: dict[int, list] = {}
    for ctx in contexts:
        entry = next(e for e in dataset.entries if e.query_id == ctx.qid)
        emb = ctx.features @ model.W
        total = emb.shape[0]
        duration = entry.duration
        sal = _saliency(emb)
        centers = clip_centers(total, duration)
        start_off = np.zeros(total)
        end_off = np.zeros(total)
        if oracle_offsets:
            for row, clip in enumerate(ctx.fg):
                ts, te = ctx.fg_targets[row]
                start_off[clip] = ts * duration - centers[clip]
                end_off[clip] = te * duration - centers[clip]
        else:
            cut = sal.max() - RUN_CUT_FRACTION * (sal.max() - sal.min())
            above = sal >= cut
            i = 0
            while i < total:
                if above[i]:
                    j = i
                    while j + 1 < total and above[j + 1]:
                        j += 1
                    run_start = (i + 1) / total * duration
                    run_end = (j + 1) / total * duration
                    for clip in range(i, j + 1):
                        start_off[clip] = run_start - centers[clip]
                        end_off[clip] = run_end - centers[clip]
                    i = j + 1
                else:
                    i += 1
        windows, _ = assemble_windows(ClipOutputs(sal, start_off, end_off), duration)
        preds[ctx.qid] = nms_1d(windows, nms_threshold, max_keep)
    return metrics.evaluate(preds, dataset.entries, cap=max_keep)


def similarity_gap(model: LinearModel, dataset: SyntheticDataset) -> float:
    """Mean positive-pair cosine minus mean negative-pair cosine, over queries."""
    contexts = _build_contexts(dataset)
    gaps = []
    for ctx in contexts:
        sims = similarity_matrix(ctx.features @ model.W)
        pos = np.array([sims[i, j] for i, j in sorted(ctx.pairs.positives)])
        neg = np.array([sims[i, j] for i, j in sorted(ctx.pairs.negatives)])
        if pos.size and neg.size:
            gaps.append(pos.mean() - neg.mean())
    return float(np.mean(gaps))


def mean_boundary_error(model: LinearModel, dataset: SyntheticDataset) -> float:
    """Mean |predicted - GT| boundary gap of the offset readout, normalized units."""
    contexts = _build_contexts(dataset)
    errors = []
    for ctx in contexts:
        if ctx.fg.size == 0:
            continue
        emb = ctx.features @ model.W
        pred_start, pred_end, *_ = _readout_predictions(emb, ctx.fg, dataset)
        err = 0.5 * (np.abs(pred_start - ctx.fg_targets[:, 0])
                     + np.abs(pred_end - ctx.fg_targets[:, 1]))
        errors.append(err.mean())
    return float(np.mean(errors))
